"""Residuals of the exact identities satisfied by connection and curvature.

Each check returns a :class:`Check` with a dimensionless residual (absolute
mismatch over the size of the terms involved) and the tolerance it is held
to.  ``informational`` checks are reported but never fail a suite.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curvature import CURVATURE_DEALIAS, lemma8_terms, riemann
from .geometry import (GammaOrder, _State, commutator, commutator_1d_closed, connection_form,
                       levi_civita, metric_derivative)
from .grid import Grid
from .models import DensityField, MobilityModel, default_length

TOL_CONNECTION = 1e-8
TOL_COMMUTATOR = 1e-8
TOL_QUARTIC = 1e-8
TOL_SYMMETRY = 1e-9
TOL_CLOSED_FORM = 1e-6
TOL_SIGN = 1e-12
TOL_FLAT = 1e-10


@dataclass(frozen=True)
class Check:
    identity: str
    residual: float
    tolerance: float
    informational: bool = False

    @property
    def passed(self) -> bool:
        return bool(self.residual <= self.tolerance)

    @property
    def status(self) -> str:
        if self.informational:
            return "info"
        return "pass" if self.passed else "fail"


def _rel(diff, *parts) -> float:
    scale = max(float(np.max(np.abs(p))) for p in parts)
    return float(np.max(np.abs(diff))) / scale if scale > 0 else float(np.max(np.abs(diff)))


def _over(value, scale) -> float:
    return abs(value) / scale if scale > 0 else abs(value)


def sample_inputs(grid: Grid, model: MobilityModel, rng, max_mode: int = 3, count: int = 4):
    """Seeded admissible density and ``count`` smooth zero-mean potentials."""
    base = 1.0 / grid.length
    pert = grid.random_smooth_field(rng, 2)
    # peak deviation of half the mean keeps every builtin model admissible
    pert *= 0.5 * base / np.max(np.abs(pert))
    rho = DensityField.normalized(grid, base + pert)
    model.check(rho.values)
    phis = [grid.random_smooth_field(rng, max_mode=max_mode) for _ in range(count)]
    return rho, phis


def connection_checks(rho, model, p1, p2, p3) -> list:
    s = _State(rho.grid, model, rho.values, 1.0)
    n12, n21 = levi_civita(rho, model, p1, p2), levi_civita(rho, model, p2, p1)
    v_gamma = s.V(s.gamma(GammaOrder.ChiPrime, p1, p2))
    comm = commutator(rho, model, p1, p2)
    lhs = metric_derivative(rho, model, p1, p2, p3)
    a = connection_form(rho, model, p1, p2, p3)
    b = connection_form(rho, model, p1, p3, p2)
    return [
        Check("connection_symmetric_part", _rel(n12 + n21 - v_gamma, n12, n21, v_gamma),
              TOL_CONNECTION),
        Check("torsion_free", _rel(n12 - n21 - comm, n12, n21, comm), TOL_CONNECTION),
        Check("metric_compatibility", abs(lhs - a - b) / max(abs(lhs), abs(a), abs(b)),
              TOL_CONNECTION),
    ]


def commutator_check(rho, model, p1, p2) -> Check:
    c = commutator(rho, model, p1, p2)
    closed = commutator_1d_closed(rho, model, p1, p2)
    return Check("commutator_closed_form", _rel(c - closed, c, closed), TOL_COMMUTATOR)


def quartic_check(grid, p1, p2, p3, p4, dealias=CURVATURE_DEALIAS) -> Check:
    terms = lemma8_terms(grid, p1, p2, p3, p4, dealias)
    res = np.sum(terms, axis=0)
    scale = max(float(np.max(np.abs(t))) for t in terms)
    return Check("quartic_identity", float(np.max(np.abs(res))) / scale, TOL_QUARTIC)


def symmetry_checks(rho, model, p1, p2, p3, p4, dealias=None) -> list:
    """Antisymmetries, pair symmetry and first Bianchi of the general Riemann form."""
    R = lambda a, b, c, d: riemann(rho, model, a, b, c, d, "general", dealias)
    r1234, r2134, r1243 = R(p1, p2, p3, p4), R(p2, p1, p3, p4), R(p1, p2, p4, p3)
    r3412, r2314, r3124 = R(p3, p4, p1, p2), R(p2, p3, p1, p4), R(p3, p1, p2, p4)
    scale = max(r.scale for r in (r1234, r2134, r1243, r3412, r2314, r3124))
    return [
        Check("riemann_antisymmetry_12", abs(r1234.value + r2134.value) / scale, TOL_SYMMETRY),
        Check("riemann_antisymmetry_34", abs(r1234.value + r1243.value) / scale, TOL_SYMMETRY),
        Check("riemann_pair_symmetry", abs(r1234.value - r3412.value) / scale, TOL_SYMMETRY),
        Check("first_bianchi", abs(r1234.value + r2314.value + r3124.value) / scale,
              TOL_SYMMETRY),
    ]


def closed_form_checks(rho, model, p1, p2, p3, p4, dealias=None) -> list:
    """General formula against the closed forms, with and without the zero-mode term."""
    g = riemann(rho, model, p1, p2, p3, p4, "general", dealias)
    t = riemann(rho, model, p1, p2, p3, p4, "closed_form_torus", dealias)
    c = riemann(rho, model, p1, p2, p3, p4, "closed_form_1d", dealias)
    scale = max(g.scale, t.scale, c.scale)
    return [
        Check("general_vs_closed_form_torus", abs(g.value - t.value) / scale, TOL_CLOSED_FORM),
        Check("general_vs_closed_form_1d", abs(g.value - c.value) / scale, TOL_CLOSED_FORM,
              informational=True),
    ]


def sign_checks(rho, model, p1, p2, dealias=None) -> list:
    """Sign of the sectional numerator implied by the convexity of the mobility.

    Convex mobility gives a nonnegative closed form, concave a nonpositive
    one and linear zero.  The general route adds the nonnegative zero-mode
    term, so only its sign for convex mobilities is guaranteed; for the
    others it is reported without failing.
    """
    conv = model.convexity
    out = []
    for method in ("closed_form_1d", "general"):
        r = riemann(rho, model, p1, p2, p2, p1, method, dealias)
        if conv == "linear":
            res, tol = _over(r.value, r.scale), TOL_FLAT
        elif conv == "convex":
            res, tol = _over(max(0.0, -r.value), r.scale), TOL_SIGN
        else:
            res, tol = _over(max(0.0, r.value), r.scale), TOL_SIGN
        info = method == "general" and conv != "convex"
        out.append(Check(f"sign_{method}", res, tol, informational=info))
    return out


def run_sample(model: MobilityModel, n: int, seed, max_mode: int = 3,
               dealias: float = CURVATURE_DEALIAS, length: float | None = None) -> list:
    """Every check on one seeded sample; the domain defaults to the model's natural length."""
    length = default_length(model) if length is None else length
    grid = Grid(n, length)
    rng = np.random.default_rng(seed)
    rho, (p1, p2, p3, p4) = sample_inputs(grid, model, rng, max_mode)
    checks = connection_checks(rho, model, p1, p2, p3)
    checks.append(commutator_check(rho, model, p1, p2))
    checks.append(quartic_check(grid, p1, p2, p3, p4, dealias))
    checks += symmetry_checks(rho, model, p1, p2, p3, p4, dealias)
    checks += closed_form_checks(rho, model, p1, p2, p3, p4, dealias)
    checks += sign_checks(rho, model, p1, p2, dealias)
    return checks
