"""Onsager response operator, its pseudo-inverse and the metric.

The discrete operator is ``A(rho) = D^T diag(chi) D + c q q^T`` with ``D``
the spectral derivative and ``q`` the normalised alternating mode.  The
spectral derivative annihilates ``q`` as well as constants, so without the
second term the sawtooth would be a spurious zero-cost direction.  The
constant ``c = k_nyq**2`` does not depend on ``rho``; derivatives of ``A``
along tangents are therefore those of the unregularised operator and every
connection and curvature formula stays exact for the discrete metric.
"""
from __future__ import annotations

import functools

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, lu_factor, lu_solve

from .errors import ConditioningError, InvalidArgument
from .grid import Grid
from .models import DensityField, MobilityModel

MIN_CHI = 1e-10
PCG_RTOL = 1e-12
ZERO_MEAN_RTOL = 1e-10
DENSE_MAX_N = 512


def nyquist_weight(grid: Grid) -> float:
    """Stiffness assigned to the alternating mode."""
    return grid.nyquist_wavenumber**2


def mobility(rho: DensityField, model: MobilityModel) -> np.ndarray:
    return model.chi(model.check(rho.values))


# -- array kernels used by the higher layers -----------------------------

def _response(grid: Grid, chi, phi) -> np.ndarray:
    """``A phi``; equals ``-d/dx(chi d/dx phi)`` off the alternating mode."""
    out = -grid.deriv(chi * grid.deriv(phi))
    return out + nyquist_weight(grid) * grid.nyquist_component(phi)


def _inner(grid: Grid, chi, phi1, phi2) -> float:
    """``h phi1^T A phi2`` evaluated by quadrature."""
    val = grid.integrate(grid.deriv(phi1) * chi * grid.deriv(phi2))
    alt = grid._alternating
    n = grid.n_points
    return val + nyquist_weight(grid) * grid.h * (phi1 @ alt) * (phi2 @ alt) / n


def _precondition(grid: Grid, r, chi_bar) -> np.ndarray:
    rh = np.fft.rfft(r)
    k2 = grid.wavenumbers**2
    out = np.zeros_like(rh)
    out[1:-1] = rh[1:-1] / (chi_bar * k2[1:-1])
    out[-1] = rh[-1] / nyquist_weight(grid)
    return np.fft.irfft(out, n=grid.n_points)


def _solve(grid: Grid, chi, sigma, rtol=PCG_RTOL, maxiter=None):
    """Preconditioned CG for ``A phi = sigma`` on mean-zero fields.

    Returns ``(phi, relative_residual, iterations)``.  Stops at ``rtol`` or
    when the residual stagnates at roundoff level.
    """
    chi_min = float(np.min(chi))
    if chi_min < MIN_CHI:
        raise ConditioningError(
            f"mobility too small for the potential solve (min chi = {chi_min:.3e})",
            min_chi=chi_min)
    sigma = sigma - np.mean(sigma)
    bnorm = np.linalg.norm(sigma)
    n = grid.n_points
    if bnorm == 0.0:
        return np.zeros(n), 0.0, 0
    maxiter = 10 * n if maxiter is None else maxiter
    chi_bar = float(np.mean(chi))
    x = _precondition(grid, sigma, chi_bar)
    r = sigma - _response(grid, chi, x)
    z = _precondition(grid, r, chi_bar)
    p = z.copy()
    rz = r @ z
    best = (np.linalg.norm(r) / bnorm, x.copy())
    stall = 0
    it = 0
    for it in range(1, maxiter + 1):
        if best[0] <= rtol:
            break
        Ap = _response(grid, chi, p)
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        res = np.linalg.norm(r) / bnorm
        if res < 0.999 * best[0]:
            stall = 0
        else:
            stall += 1
        if res < best[0]:
            best = (res, x.copy())
        if stall >= 20:
            break
        z = _precondition(grid, r, chi_bar)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    res, x = best
    # true residual, guarding against drift of the recursive one
    res = np.linalg.norm(sigma - _response(grid, chi, x)) / bnorm
    if res > 1e-8:
        raise ConditioningError(
            f"potential solve did not converge (relative residual {res:.3e} after {it} "
            f"iterations, min chi = {chi_min:.3e})", min_chi=chi_min)
    return x - np.mean(x), res, it


@functools.lru_cache(maxsize=8)
def _derivative_matrix(n: int, length: float) -> np.ndarray:
    k = 2 * np.pi * np.fft.rfftfreq(n, d=length / n)
    k[-1] = 0.0
    eye = np.eye(n)
    D = np.fft.irfft(1j * k[:, None] * np.fft.rfft(eye, axis=0), n=n, axis=0)
    D.setflags(write=False)
    return D


def _dense_solver(grid: Grid, chi, min_chi=MIN_CHI):
    """Factor ``A + 11^T/n`` once; the returned callable solves many right-hand sides.

    Used where one density serves several solves (parallel transport).  The
    rank-one term fixes the constant mode, so zero-mean data give zero-mean
    potentials.
    """
    chi_min = float(np.min(chi))
    if chi_min < min_chi:
        raise ConditioningError(
            f"mobility too small for the potential solve (min chi = {chi_min:.3e})",
            min_chi=chi_min)
    n = grid.n_points
    if n > DENSE_MAX_N:
        return lambda sigma: _solve(grid, chi, sigma)[0]
    D = _derivative_matrix(n, grid.length)
    alt = grid._alternating
    A = D.T @ (chi[:, None] * D) + nyquist_weight(grid) * np.outer(alt, alt) / n + 1.0 / n
    try:
        fac = cho_factor(A)
        back = cho_solve
    except LinAlgError:
        # floored mobilities can push the smallest eigenvalue below roundoff
        fac = lu_factor(A)
        back = lu_solve

    def solve(sigma):
        sigma = sigma - np.mean(sigma)
        x = back(fac, sigma)
        return x - np.mean(x)
    return solve


def _check_tangent(grid: Grid, sigma) -> np.ndarray:
    sigma = grid._check(sigma)
    scale = max(1.0, float(np.sum(np.abs(sigma)) * grid.h))
    if abs(grid.integrate(sigma)) > ZERO_MEAN_RTOL * scale:
        raise InvalidArgument(
            f"tangent field must have zero mean (integral {grid.integrate(sigma):.3e})")
    return sigma


# -- public API ------------------------------------------------------------

def apply_response(rho: DensityField, model: MobilityModel, phi) -> np.ndarray:
    """Tangent ``V_phi = -d/dx(chi(rho) d/dx phi)``."""
    return _response(rho.grid, mobility(rho, model), rho.grid._check(phi))


def response_laplacian(rho: DensityField, model: MobilityModel, phi) -> np.ndarray:
    """``Delta_chi phi = d/dx(chi d/dx phi)``, i.e. ``-V_phi``."""
    return -apply_response(rho, model, phi)


def solve_potential(rho: DensityField, model: MobilityModel, sigma) -> np.ndarray:
    """Mean-zero potential ``phi`` with ``apply_response(phi) = sigma``."""
    grid = rho.grid
    sigma = _check_tangent(grid, sigma)
    phi, _, _ = _solve(grid, mobility(rho, model), sigma)
    return phi


def metric_inner(rho: DensityField, model: MobilityModel, phi1, phi2) -> float:
    """``int phi1' chi(rho) phi2' dx``."""
    grid = rho.grid
    return _inner(grid, mobility(rho, model), grid._check(phi1), grid._check(phi2))


def metric_inner_tangent(rho: DensityField, model: MobilityModel, sigma1, sigma2) -> float:
    """Dual form ``int sigma1 (-Delta_chi)^+ sigma2 dx``."""
    grid = rho.grid
    sigma1 = _check_tangent(grid, sigma1)
    sigma2 = _check_tangent(grid, sigma2)
    chi = mobility(rho, model)
    phi2, _, _ = _solve(grid, chi, sigma2)
    return grid.integrate(sigma1 * phi2)
