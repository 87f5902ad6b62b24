"""Gamma operators, commutators, Levi-Civita connection and Hessians.

Everything is evaluated on the potential side.  Integrals of the form
``int Gamma_chi(a, b)`` are routed through the discrete metric so that the
identities between connection, commutator and metric hold to roundoff for
the discretised manifold rather than only in the continuum limit.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grid import Grid
from .models import DensityField, MobilityModel
from .operator import _inner, _response, _solve


class GammaOrder(enum.Enum):
    Chi = 0
    ChiPrime = 1
    ChiDoublePrime = 2


class _State:
    """Mobility coefficients of one density, evaluated once."""

    def __init__(self, grid: Grid, model: MobilityModel, values, dealias: float | None = None):
        r = model.check(values)
        self.grid = grid
        self.rho = r
        self.chi = model.chi(r)
        self.chi1 = model.chi1(r)
        self.chi2 = model.chi2(r)
        self.frac = grid.dealias_fraction if dealias is None else dealias

    def weight(self, order: GammaOrder):
        return (self.chi, self.chi1, self.chi2)[order.value]

    def d(self, f):
        return self.grid.deriv(f)

    def p(self, f):
        """Dealias a pointwise product."""
        return f if self.frac >= 1.0 else self.grid.dealias(f, self.frac)

    def gamma(self, order, a, b):
        return self.p(self.d(a) * self.weight(order) * self.d(b))

    def V(self, phi):
        return _response(self.grid, self.chi, phi)

    def lap(self, phi):
        """``Delta_chi phi``."""
        return -self.V(phi)

    def lap_dir(self, w, psi):
        """``Delta_{W chi} psi = d/dx(W chi'(rho) d/dx psi)``."""
        return self.d(self.p(w * self.chi1 * self.d(psi)))

    def g(self, a, b):
        return _inner(self.grid, self.chi, a, b)

    def solve(self, sigma):
        return _solve(self.grid, self.chi, sigma)[0]

    def integrate(self, f):
        return self.grid.integrate(f)

    def commutator(self, phi1, phi2):
        return -self.lap_dir(self.V(phi1), phi2) + self.lap_dir(self.V(phi2), phi1)

    def commutator_closed(self, phi1, phi2):
        d1, d2 = self.d(phi1), self.d(phi2)
        dd1, dd2 = self.grid.deriv(phi1, 2), self.grid.deriv(phi2, 2)
        return self.d(self.p(self.chi * self.chi1 * (dd1 * d2 - dd2 * d1)))

    def levi_civita(self, phi1, phi2):
        return -0.5 * (self.lap_dir(self.V(phi1), phi2) - self.lap_dir(self.V(phi2), phi1)
                       + self.lap(self.gamma(GammaOrder.ChiPrime, phi1, phi2)))

    def connection_form(self, phi1, phi2, phi3):
        gp = lambda a, b: self.gamma(GammaOrder.ChiPrime, a, b)
        return 0.5 * (self.g(gp(phi2, phi3), phi1) - self.g(gp(phi1, phi3), phi2)
                      + self.g(gp(phi1, phi2), phi3))


def _state(rho, model, dealias=None) -> _State:
    return _State(rho.grid, model, rho.values, dealias)


def gamma(order: GammaOrder, rho: DensityField, model: MobilityModel, phi1, phi2) -> np.ndarray:
    """Pointwise ``phi1' w(rho) phi2'`` with ``w`` in ``{chi, chi', chi''}``."""
    return _state(rho, model).gamma(GammaOrder(order), phi1, phi2)


def directional_chi(rho: DensityField, model: MobilityModel, phi) -> np.ndarray:
    """Variation of ``chi(rho)`` along the tangent ``V_phi``."""
    s = _state(rho, model)
    return s.V(phi) * s.chi1


def commutator(rho: DensityField, model: MobilityModel, phi1, phi2) -> np.ndarray:
    """``[V1, V2] = -Delta_{V1 chi} phi2 + Delta_{V2 chi} phi1``."""
    return _state(rho, model).commutator(phi1, phi2)


def commutator_1d_closed(rho: DensityField, model: MobilityModel, phi1, phi2) -> np.ndarray:
    """``d/dx(chi chi' (phi1'' phi2' - phi2'' phi1'))``."""
    return _state(rho, model).commutator_closed(phi1, phi2)


def levi_civita(rho: DensityField, model: MobilityModel, phi1, phi2) -> np.ndarray:
    """Tangent field ``nabla_{V1} V2``."""
    return _state(rho, model).levi_civita(phi1, phi2)


def connection_form(rho: DensityField, model: MobilityModel, phi1, phi2, phi3) -> float:
    """``<nabla_{V1} V2, V3>`` assembled from Gamma operators."""
    return _state(rho, model).connection_form(phi1, phi2, phi3)


def metric_derivative(rho: DensityField, model: MobilityModel, phi1, phi2, phi3) -> float:
    """``V1 <V2, V3>`` for potentials held fixed, ``-int phi2 Delta_{V1 chi} phi3``."""
    s = _state(rho, model)
    return -s.integrate(phi2 * s.lap_dir(s.V(phi1), phi3))


@dataclass(frozen=True)
class LocalFunctional:
    """``F(rho) = int f(x, rho) dx`` with its first two density derivatives.

    The callables take ``(x, rho)`` arrays and return arrays.
    """

    f: Callable
    d_rho: Callable
    d2_rho: Callable
    name: str = "F"

    def __call__(self, rho: DensityField) -> float:
        g = rho.grid
        return g.integrate(self.f(g.nodes, rho.values))

    def first_variation(self, rho: DensityField) -> np.ndarray:
        return self.d_rho(rho.grid.nodes, rho.values)

    def check_derivatives(self, x, r, eps=1e-4) -> float:
        """Largest relative mismatch between supplied and finite-difference derivatives."""
        x, r = np.asarray(x, float), np.asarray(r, float)
        fd1 = (self.f(x, r + eps) - self.f(x, r - eps)) / (2 * eps)
        fd2 = (self.d_rho(x, r + eps) - self.d_rho(x, r - eps)) / (2 * eps)
        e1 = np.abs(fd1 - self.d_rho(x, r)) / np.maximum(1.0, np.abs(fd1))
        e2 = np.abs(fd2 - self.d2_rho(x, r)) / np.maximum(1.0, np.abs(fd2))
        return float(max(e1.max(), e2.max()))


def free_energy_functional(model: MobilityModel, pi: DensityField) -> LocalFunctional:
    """Bregman free energy ``D_f(., pi)`` as a local functional."""
    from .models import _f_values

    p = model.check(pi.values, "equilibrium")
    fpp = model.fsecond
    if fpp is None:
        def fpp(r):
            eps = 1e-5 * np.maximum(1.0, np.abs(r))
            return (model.fprime(r + eps) - model.fprime(r - eps)) / (2 * eps)
    return LocalFunctional(
        f=lambda x, r: _f_values(model, r, p),
        d_rho=lambda x, r: model.fprime(r) - model.fprime(p),
        d2_rho=lambda x, r: fpp(r),
        name="bregman",
    )


def hessian_form(F: LocalFunctional, rho: DensityField, model: MobilityModel, phi1, phi2) -> float:
    """``Hess F(rho)<V1, V2>`` for a local functional."""
    s = _state(rho, model)
    x = s.grid.nodes
    dF = F.d_rho(x, s.rho)
    d2F = F.d2_rho(x, s.rho)
    l1, l2 = s.lap(phi1), s.lap(phi2)
    gp = lambda a, b: s.gamma(GammaOrder.ChiPrime, a, b)
    second = s.integrate(d2F * l1 * l2)
    corr = 0.5 * (s.g(gp(phi2, dF), phi1) + s.g(gp(phi1, dF), phi2) - s.g(gp(phi1, phi2), dF))
    return second + corr
