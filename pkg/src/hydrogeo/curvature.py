"""Riemann and sectional curvature of the density manifold.

Two evaluation routes:

``general``
    the three-block formula (``chi''`` block, nested Gamma block and the
    commutator block through the pseudo-inverse), valid on any domain.
``closed_form_1d``
    the one-dimensional reduction ``1/2 int chi'' chi^2 {...}``.

On the torus the reduction drops a zero-mode term: inverting ``Delta_chi``
on a commutator ``d/dx m`` gives ``m/chi`` minus a constant fixed by
periodicity, and that constant carries curvature.  ``closed_form_torus``
adds it back (:func:`torus_correction`) and agrees with ``general``.
"""
from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePlaneError
from .geometry import GammaOrder, _State
from .models import DensityField, MobilityModel

CURVATURE_DEALIAS = 2.0 / 3.0
Z_RTOL = 1e-12

G1 = GammaOrder.ChiPrime
G2 = GammaOrder.ChiDoublePrime


class Method(str, enum.Enum):
    general = "general"
    closed_form_1d = "closed_form_1d"
    closed_form_torus = "closed_form_torus"


@dataclass(frozen=True)
class RiemannValue:
    """Signed value together with the blocks it was summed from."""

    value: float
    blocks: tuple
    scale: float


@dataclass(frozen=True)
class CurvatureReport:
    value: float
    numerator: float
    z: float
    method: str
    n: int
    model: str
    scale: float = float("nan")
    fields_digest: str = ""

    def to_dict(self):
        return {k: getattr(self, k) for k in ("value", "numerator", "z", "method", "n", "model")}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), default=_json_float)


def _json_float(x):
    return float(x)


def _digest(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a, dtype=float).tobytes())
    return h.hexdigest()[:16]


def _state(rho, model, dealias):
    return _State(rho.grid, model, rho.values,
                  CURVATURE_DEALIAS if dealias is None else dealias)


def _general_terms(s: _State, p1, p2, p3, p4):
    """Every signed integral of the three-block formula, block by block."""
    phis = {1: p1, 2: p2, 3: p3, 4: p4}
    L = {i: s.lap(phis[i]) for i in phis}
    g2 = lambda a, b: s.gamma(G2, phis[a], phis[b])
    g1 = lambda a, b: s.gamma(G1, phis[a], phis[b])

    b1 = [
        -0.5 * s.integrate(g2(2, 4) * L[1] * L[3]),
        -0.5 * s.integrate(g2(1, 3) * L[2] * L[4]),
        0.5 * s.integrate(g2(2, 3) * L[1] * L[4]),
        0.5 * s.integrate(g2(1, 4) * L[2] * L[3]),
    ]

    def nest(a, b, c, d, sign):
        inner = g1(a, b)
        return 0.25 * sign * s.g(s.gamma(G1, inner, phis[c]), phis[d])

    b2 = [
        nest(2, 4, 1, 3, -1), nest(2, 4, 3, 1, -1),
        nest(1, 3, 2, 4, -1), nest(1, 3, 4, 2, -1),
        nest(2, 3, 1, 4, +1), nest(2, 3, 4, 1, +1),
        nest(1, 4, 2, 3, +1), nest(1, 4, 3, 2, +1),
        0.25 * s.g(g1(1, 3), g1(2, 4)),
        -0.25 * s.g(g1(2, 3), g1(1, 4)),
    ]

    C = {}

    def comm(a, b):
        if (a, b) not in C:
            C[(a, b)] = s.commutator(phis[a], phis[b])
        return C[(a, b)]

    def pair(a, b, c, d):
        # int [Va,Vb] Delta_chi^+ [Vc,Vd] dx, with Delta_chi^+ = -(A)^+
        return -s.integrate(comm(a, b) * s.solve(comm(c, d)))

    b3 = [
        -0.25 * pair(1, 3, 2, 4),
        0.25 * pair(2, 3, 1, 4),
        -0.5 * pair(3, 4, 1, 2),
    ]
    return b1, b2, b3


def _closed_terms(s: _State, p1, p2, p3, p4):
    d = {i: s.d(p) for i, p in enumerate((p1, p2, p3, p4), 1)}
    dd = {i: s.grid.deriv(p, 2) for i, p in enumerate((p1, p2, p3, p4), 1)}
    w = 0.5 * s.chi2 * s.chi**2
    terms = [
        -s.integrate(w * d[2] * d[4] * dd[1] * dd[3]),
        -s.integrate(w * d[1] * d[3] * dd[2] * dd[4]),
        s.integrate(w * d[2] * d[3] * dd[1] * dd[4]),
        s.integrate(w * d[1] * d[4] * dd[2] * dd[3]),
    ]
    return terms


def _mu(s: _State, pa, pb):
    """``int chi'(rho) (pa'' pb' - pb'' pa') dx``."""
    da, db = s.d(pa), s.d(pb)
    dda, ddb = s.grid.deriv(pa, 2), s.grid.deriv(pb, 2)
    return s.integrate(s.chi1 * (dda * db - ddb * da))


def _correction_terms(s: _State, p1, p2, p3, p4):
    phis = {1: p1, 2: p2, 3: p3, 4: p4}
    mu = lambda a, b: _mu(s, phis[a], phis[b])
    w = s.integrate(1.0 / s.chi)
    return [0.25 * mu(1, 4) * mu(2, 3) / w,
            -0.25 * mu(1, 3) * mu(2, 4) / w,
            -0.5 * mu(1, 2) * mu(3, 4) / w]


def _fields(rho, phis):
    g = rho.grid
    return [g.project_zero_mean(p) for p in phis]


def _value(terms) -> RiemannValue:
    flat = [t for block in terms for t in block]
    return RiemannValue(value=float(sum(flat)), blocks=tuple(float(sum(b)) for b in terms),
                        scale=float(sum(abs(t) for t in flat)))


def riemann_general_detail(rho, model, phi1, phi2, phi3, phi4, dealias=None) -> RiemannValue:
    s = _state(rho, model, dealias)
    return _value(_general_terms(s, *_fields(rho, (phi1, phi2, phi3, phi4))))


def riemann_1d_detail(rho, model, phi1, phi2, phi3, phi4, dealias=None) -> RiemannValue:
    s = _state(rho, model, dealias)
    return _value([_closed_terms(s, *_fields(rho, (phi1, phi2, phi3, phi4)))])


def riemann_general(rho: DensityField, model: MobilityModel, phi1, phi2, phi3, phi4,
                    dealias=None) -> float:
    """``<R(V1, V2) V3, V4>`` from the general three-block formula."""
    return riemann_general_detail(rho, model, phi1, phi2, phi3, phi4, dealias).value


def riemann_1d(rho: DensityField, model: MobilityModel, phi1, phi2, phi3, phi4,
               dealias=None) -> float:
    """``<R(V1, V2) V3, V4>`` from the one-dimensional closed form."""
    return riemann_1d_detail(rho, model, phi1, phi2, phi3, phi4, dealias).value


def torus_correction(rho: DensityField, model: MobilityModel, phi1, phi2, phi3, phi4) -> float:
    """Zero-mode term missing from the closed form on the periodic domain.

    ``(mu14 mu23 - mu13 mu24 - 2 mu12 mu34) / (4 int 1/chi)`` with
    ``mu_ab = int chi' (phi_a'' phi_b' - phi_b'' phi_a')``.
    """
    s = _state(rho, model, 1.0)
    return float(sum(_correction_terms(s, *_fields(rho, (phi1, phi2, phi3, phi4)))))


def riemann(rho, model, phi1, phi2, phi3, phi4, method="general", dealias=None) -> RiemannValue:
    method = Method(method)
    phis = _fields(rho, (phi1, phi2, phi3, phi4))
    s = _state(rho, model, dealias)
    if method is Method.general:
        return _value(_general_terms(s, *phis))
    terms = [_closed_terms(s, *phis)]
    if method is Method.closed_form_torus:
        terms.append(_correction_terms(s, *phis))
    return _value(terms)


def plane_z(rho: DensityField, model: MobilityModel, phi1, phi2):
    """``Z = g11 g22 - g12^2`` and the threshold below which the plane is degenerate."""
    s = _state(rho, model, 1.0)
    g11, g22, g12 = s.g(phi1, phi1), s.g(phi2, phi2), s.g(phi1, phi2)
    return g11 * g22 - g12**2, Z_RTOL * abs(g11 * g22)


def sectional(rho: DensityField, model: MobilityModel, phi1, phi2, method="general",
              dealias=None) -> CurvatureReport:
    """Sectional curvature of the plane spanned by ``V_phi1`` and ``V_phi2``."""
    method = Method(method)
    p1, p2 = _fields(rho, (phi1, phi2))
    z, tol = plane_z(rho, model, p1, p2)
    if not z > tol:
        raise DegeneratePlaneError(f"directions are metrically parallel (Z = {z:.3e})")
    r = riemann(rho, model, p1, p2, p2, p1, method=method, dealias=dealias)
    return CurvatureReport(value=r.value / z, numerator=r.value, z=z, method=method.value,
                           n=rho.grid.n_points, model=model.name, scale=r.scale / z,
                           fields_digest=_digest(rho.values, p1, p2))


def lemma8_terms(grid, phi1, phi2, phi3, phi4, dealias=CURVATURE_DEALIAS):
    """Signed pointwise terms of the quartic derivative identity.

    Ten nested Euclidean Gamma terms, built from ``Gamma_1(a, b) = a' b'``
    as ``Gamma_1(Gamma_1(Gamma_1(a, b), c), d)``, plus three products of
    Wronskian-type brackets ``phi_b'' phi_a' - phi_a'' phi_b'``.  Their sum
    vanishes identically in the continuum.
    """
    frac = dealias
    p = (lambda f: f) if frac >= 1 else (lambda f: grid.dealias(f, frac))
    phis = {1: phi1, 2: phi2, 3: phi3, 4: phi4}
    d = {i: grid.deriv(v) for i, v in phis.items()}
    dd = {i: grid.deriv(v, 2) for i, v in phis.items()}
    g1 = lambda a, b: p(a * b)

    def nest(a, b, c, e):
        inner = g1(d[a], d[b])
        return p(grid.deriv(p(grid.deriv(inner) * d[c])) * d[e])

    def cross(a, b):
        return p(dd[b] * d[a] - dd[a] * d[b])

    terms = [
        -nest(2, 4, 1, 3), -nest(2, 4, 3, 1), -nest(1, 3, 2, 4), -nest(1, 3, 4, 2),
        nest(2, 3, 1, 4), nest(2, 3, 4, 1), nest(1, 4, 2, 3), nest(1, 4, 3, 2),
        p(grid.deriv(g1(d[1], d[3])) * grid.deriv(g1(d[2], d[4]))),
        -p(grid.deriv(g1(d[2], d[3])) * grid.deriv(g1(d[1], d[4]))),
        p(cross(1, 3) * cross(2, 4)),
        -p(cross(2, 3) * cross(1, 4)),
        2 * p(cross(1, 2) * cross(3, 4)),
    ]
    return terms


def lemma8_residual(grid, phi1, phi2, phi3, phi4, dealias=CURVATURE_DEALIAS):
    """Pointwise sum of :func:`lemma8_terms` (expected to vanish up to aliasing)."""
    return np.sum(lemma8_terms(grid, phi1, phi2, phi3, phi4, dealias), axis=0)
