"""Scalar mobility models, Einstein free energies and equilibria.

A model bundles the mobility ``chi(rho)`` with its first two derivatives
and the free-energy integrand ``f`` whose second derivative ties the
diffusion coefficient to the mobility, ``D(rho) = chi(rho) f''(rho)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import AdmissibilityError, InvalidArgument
from .grid import Grid

#: Densities closer than this to a finite end of the admissible interval are rejected.
ADMISSIBILITY_MARGIN = 1e-8
MASS_TOL = 1e-12
REGISTRATION_TOL = 1e-6

Scalar = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class MobilityModel:
    name: str
    chi: Scalar
    chi1: Scalar
    chi2: Scalar
    fprime: Scalar
    admissible: tuple[float, float]
    convexity: str
    f: Scalar | None = None
    fsecond: Scalar | None = None

    def diffusion(self, rho):
        """Einstein relation ``D = chi * f''``."""
        rho = np.asarray(rho, dtype=float)
        if self.fsecond is not None:
            fpp = self.fsecond(rho)
        else:
            eps = 1e-5 * np.maximum(1.0, np.abs(rho))
            fpp = (self.fprime(rho + eps) - self.fprime(rho - eps)) / (2 * eps)
        return self.chi(rho) * fpp

    def check(self, values, what="density"):
        """Raise :class:`AdmissibilityError` unless every value is admissible."""
        v = np.asarray(values, dtype=float)
        lo, hi = self.admissible
        if not np.all(np.isfinite(v)):
            raise AdmissibilityError(f"{what} contains non-finite values")
        vmin, vmax = float(v.min()), float(v.max())
        if np.isfinite(lo) and vmin <= lo + ADMISSIBILITY_MARGIN:
            raise AdmissibilityError(
                f"{what} min {vmin:.6g} outside admissible interval {self.admissible} "
                f"of model {self.name!r}")
        if np.isfinite(hi) and vmax >= hi - ADMISSIBILITY_MARGIN:
            raise AdmissibilityError(
                f"{what} max {vmax:.6g} outside admissible interval {self.admissible} "
                f"of model {self.name!r}")
        return v


def _independent():
    return MobilityModel(
        name="independent",
        chi=lambda r: np.asarray(r, dtype=float) * 1.0,
        chi1=lambda r: np.ones_like(np.asarray(r, dtype=float)),
        chi2=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
        f=lambda r: r * np.log(r),
        fprime=lambda r: np.log(r) + 1.0,
        fsecond=lambda r: 1.0 / r,
        admissible=(0.0, np.inf),
        convexity="linear",
    )


def _sep():
    return MobilityModel(
        name="sep",
        chi=lambda r: r * (1.0 - r),
        chi1=lambda r: 1.0 - 2.0 * r,
        chi2=lambda r: np.full_like(np.asarray(r, dtype=float), -2.0),
        f=lambda r: r * np.log(r) + (1.0 - r) * np.log1p(-r),
        fprime=lambda r: np.log(r) - np.log1p(-r),
        fsecond=lambda r: 1.0 / (r * (1.0 - r)),
        admissible=(0.0, 1.0),
        convexity="concave",
    )


def _kmp():
    return MobilityModel(
        name="kmp",
        chi=lambda r: np.asarray(r, dtype=float) ** 2,
        chi1=lambda r: 2.0 * np.asarray(r, dtype=float),
        chi2=lambda r: np.full_like(np.asarray(r, dtype=float), 2.0),
        f=lambda r: -np.log(r),
        fprime=lambda r: -1.0 / r,
        fsecond=lambda r: 1.0 / r**2,
        admissible=(0.0, np.inf),
        convexity="convex",
    )


_BUILTINS = {"independent": _independent, "sep": _sep, "kmp": _kmp}
BUILTIN_NAMES = tuple(_BUILTINS)


def builtin_model(name: str) -> MobilityModel:
    try:
        return _BUILTINS[name]()
    except KeyError:
        raise InvalidArgument(
            f"unknown model {name!r}; expected one of {', '.join(BUILTIN_NAMES)}"
        ) from None


def _sample_points(admissible, n=17):
    lo, hi = admissible
    if np.isfinite(lo) and np.isfinite(hi):
        return np.linspace(lo, hi, n + 2)[1:-1]
    if np.isfinite(lo):
        return lo + np.geomspace(1e-1, 1e1, n)
    if np.isfinite(hi):
        return hi - np.geomspace(1e-1, 1e1, n)
    return np.linspace(-5.0, 5.0, n)


def _fd_mismatch(fn, dfn, r, eps):
    fd = (fn(r + eps) - fn(r - eps)) / (2 * eps)
    exact = dfn(r)
    scale = np.maximum(1.0, np.abs(exact))
    return float(np.max(np.abs(fd - exact) / scale))


def custom_model(name, chi, chi1, chi2, fprime, admissible, *, f=None, fsecond=None,
                 convexity=None) -> MobilityModel:
    """Register a user model after checking its derivatives by finite differences.

    Callables must be vectorised over numpy arrays.  Raises
    :class:`InvalidArgument` when a supplied derivative disagrees with the
    central difference of its parent by more than ``REGISTRATION_TOL``.
    """
    lo, hi = map(float, admissible)
    if not lo < hi:
        raise InvalidArgument(f"empty admissible interval {admissible}")
    r = _sample_points((lo, hi))
    span = (hi - lo) if np.isfinite(hi - lo) else 1.0
    eps = 1e-4 * min(span, 1.0) * np.minimum(1.0, np.abs(r) + 1e-3)
    c = np.asarray(chi(r), dtype=float)
    if np.any(c <= 0):
        raise InvalidArgument(f"chi must be positive on {admissible}")
    checks = [("chi1", chi, chi1), ("chi2", chi1, chi2)]
    if f is not None:
        checks.append(("fprime", f, fprime))
    if fsecond is not None:
        checks.append(("fsecond", fprime, fsecond))
    for label, fn, dfn in checks:
        err = _fd_mismatch(fn, dfn, r, eps)
        if err > REGISTRATION_TOL:
            raise InvalidArgument(f"{label} of model {name!r} fails the finite-difference "
                                  f"check (relative error {err:.3g})")
    if convexity is None:
        c2 = np.asarray(chi2(r), dtype=float)
        if np.all(c2 == 0):
            convexity = "linear"
        elif np.all(c2 >= 0):
            convexity = "convex"
        elif np.all(c2 <= 0):
            convexity = "concave"
        else:
            convexity = "indefinite"
    return MobilityModel(name=name, chi=chi, chi1=chi1, chi2=chi2, fprime=fprime,
                         admissible=(lo, hi), convexity=convexity, f=f, fsecond=fsecond)


@dataclass(frozen=True)
class DensityField:
    """A positive density of unit mass on a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = self.grid._check(self.values).copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        mass = self.grid.integrate(v)
        if abs(mass - 1.0) > MASS_TOL * max(1.0, self.grid.length):
            raise InvalidArgument(f"density has mass {mass!r}, expected 1")

    @classmethod
    def normalized(cls, grid: Grid, values) -> "DensityField":
        """Shift ``values`` by a constant so the mass is exactly one."""
        v = np.asarray(values, dtype=float)
        return cls(grid, v + (1.0 - grid.integrate(v)) / grid.length)

    @classmethod
    def uniform(cls, grid: Grid) -> "DensityField":
        return cls(grid, grid.constant(1.0 / grid.length))


def default_length(model: MobilityModel) -> float:
    """Domain length that puts the uniform unit-mass density mid-interval."""
    lo, hi = model.admissible
    if np.isfinite(hi):
        return 1.0 / (0.5 * (lo + hi))
    return 1.0


def eval_mobility(model: MobilityModel, rho: DensityField):
    r = model.check(rho.values)
    return model.chi(r), model.chi1(r), model.chi2(r)


def _f_values(model, rho, pi):
    """``f(rho) - f(pi) - f'(pi)(rho - pi)`` pointwise."""
    if model.f is not None:
        return model.f(rho) - model.f(pi) - model.fprime(pi) * (rho - pi)
    # integral of f'(s) - f'(pi) over [pi, rho] by Gauss-Legendre
    nodes, weights = np.polynomial.legendre.leggauss(32)
    half = 0.5 * (rho - pi)
    s = pi[:, None] + half[:, None] * (nodes[None, :] + 1.0)
    integrand = model.fprime(s) - model.fprime(pi)[:, None]
    return half * (integrand @ weights)


def bregman_divergence(model: MobilityModel, rho: DensityField, pi: DensityField) -> float:
    r = model.check(rho.values)
    p = model.check(pi.values, "equilibrium")
    return rho.grid.integrate(_f_values(model, r, p))


def free_energy_slope(model: MobilityModel, rho: DensityField, pi: DensityField) -> np.ndarray:
    """First variation ``f'(rho) - f'(pi)`` of the free energy."""
    r = model.check(rho.values)
    p = model.check(pi.values, "equilibrium")
    return model.fprime(r) - model.fprime(p)


@dataclass(frozen=True)
class EquilibriumSpec:
    pi: DensityField
    drift: np.ndarray


def equilibrium(model: MobilityModel, pi: DensityField) -> EquilibriumSpec:
    """Stationary state together with the drift ``E = d/dx f'(pi)`` it induces."""
    p = model.check(pi.values, "equilibrium")
    return EquilibriumSpec(pi=pi, drift=pi.grid.deriv(model.fprime(p)))
