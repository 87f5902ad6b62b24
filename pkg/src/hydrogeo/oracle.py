"""Brute-force geometry of the discretised density simplex.

The unit-mass grid densities form an ``(n-1)``-dimensional manifold.  The
chart keeps the first ``n-1`` nodal values and eliminates the last one by
the mass constraint; the chart basis vector ``i`` pushes forward to the
grid vector ``e_i - e_n``.  The metric matrix is assembled from a dense
pseudo-inverse of the response operator, and connection and curvature
come from finite differences of that matrix only.  Nothing here reuses
the analytic formulas, which makes it an independent reference.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import ConditioningError, InvalidArgument
from .grid import Grid
from .models import DensityField, MobilityModel, default_length
from .operator import MIN_CHI

MAX_ORACLE_N = 24
STEP1 = 1e-4
STEP2 = 1e-3


@dataclass(frozen=True)
class Chart:
    n: int
    coords: np.ndarray
    h: float

    @property
    def length(self) -> float:
        return self.n * self.h

    @property
    def grid(self) -> Grid:
        return Grid(self.n, self.length)

    @classmethod
    def from_density(cls, rho: DensityField) -> "Chart":
        g = rho.grid
        return cls(g.n_points, np.array(rho.values[:-1]), g.h)

    def reconstruct(self) -> DensityField:
        return DensityField(self.grid, self.grid_values(self.coords))

    def grid_values(self, coords) -> np.ndarray:
        last = 1.0 / self.h - np.sum(coords)
        return np.append(coords, last)

    @property
    def basis(self) -> np.ndarray:
        """``n x (n-1)`` pushforward of the chart basis to grid vectors."""
        E = np.zeros((self.n, self.n - 1))
        E[: self.n - 1, :] = np.eye(self.n - 1)
        E[-1, :] = -1.0
        return E

    def to_chart(self, sigma) -> np.ndarray:
        """Chart components of a mean-zero grid vector."""
        sigma = np.asarray(sigma, dtype=float)
        if abs(sigma.sum()) > 1e-10 * max(1.0, np.abs(sigma).sum()):
            raise InvalidArgument("chart tangents must have zero sum")
        return sigma[:-1].copy()


@dataclass(frozen=True)
class MetricMatrix:
    g: np.ndarray

    @property
    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.g + self.g.T)).min())


def _dense_derivative(n: int, length: float) -> np.ndarray:
    k = 2 * np.pi * np.fft.fftfreq(n, d=length / n)
    k[n // 2] = 0.0
    eye = np.eye(n)
    return np.real(np.fft.ifft(1j * k[:, None] * np.fft.fft(eye, axis=0), axis=0))


class _Dense:
    """Dense ``h A(rho)^+`` on grid vectors for one chart geometry."""

    def __init__(self, chart: Chart, model: MobilityModel):
        self.chart = chart
        self.model = model
        n = chart.n
        self.D = _dense_derivative(n, chart.length)
        alt = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
        knyq = np.pi * n / chart.length
        self.reg = knyq**2 * np.outer(alt, alt) / n
        self.ones = np.full((n, n), 1.0 / n)

    def A(self, values):
        chi = self.model.chi(self.model.check(values))
        if chi.min() < MIN_CHI:
            raise ConditioningError(f"min chi = {chi.min():.3e}", min_chi=float(chi.min()))
        return self.D.T @ (chi[:, None] * self.D) + self.reg

    def M(self, values):
        """``h A^+`` restricted to mean-zero vectors (grid representation)."""
        A = self.A(values)
        P = np.eye(len(values)) - self.ones
        return self.chart.h * P @ np.linalg.solve(A + self.ones, P)

    def dM(self, values, w, step):
        return (self.M(values + step * w) - self.M(values - step * w)) / (2 * step)


def metric_matrix(chart: Chart, model: MobilityModel) -> MetricMatrix:
    """``g_ij = h e_i^T A^+ e_j`` in chart coordinates."""
    dense = _Dense(chart, model)
    E = chart.basis
    G = E.T @ dense.M(chart.grid_values(chart.coords)) @ E
    return MetricMatrix(0.5 * (G + G.T))


def christoffel_fd(chart: Chart, model: MobilityModel, step: float = STEP1) -> np.ndarray:
    """First-kind symbols ``Gamma[k, i, j] = <nabla_i d_j, d_k>`` by central differences."""
    dense = _Dense(chart, model)
    E = chart.basis
    rho = chart.grid_values(chart.coords)
    m = chart.n - 1
    dG = np.empty((m, m, m))  # dG[i] = d_i g
    for i in range(m):
        dG[i] = E.T @ dense.dM(rho, E[:, i], step) @ E
    # Gamma_kij = 1/2 (d_i g_jk + d_j g_ik - d_k g_ij)
    return 0.5 * (np.transpose(dG, (2, 0, 1)) + np.transpose(dG, (2, 1, 0)) - dG)


def connection_fd(chart: Chart, model: MobilityModel, phi1, phi2, phi3,
                  step: float = STEP1) -> float:
    """``<nabla_{V1} V2, V3>`` for the potential-induced fields ``V_i = A(rho) phi_i``."""
    dense = _Dense(chart, model)
    rho = chart.grid_values(chart.coords)
    A = dense.A(rho)
    u, v, w = A @ phi1, A @ phi2, A @ phi3
    Gam = christoffel_fd(chart, model, step)
    cu, cv, cw = chart.to_chart(u), chart.to_chart(v), chart.to_chart(w)
    coord_part = np.einsum("kij,i,j,k->", Gam, cu, cv, cw)
    # V2 varies with the point; its coordinate derivative along V1
    dv = (dense.A(rho + step * u) - dense.A(rho - step * u)) @ phi2 / (2 * step)
    M = dense.M(rho)
    return float(coord_part + dv @ M @ w)


def riemann_fd(chart: Chart, model: MobilityModel, sigma1, sigma2, step: float = STEP2,
               step1: float = STEP1) -> float:
    """Sectional curvature of the chart manifold on the plane of two grid tangents."""
    dense = _Dense(chart, model)
    rho = chart.grid_values(chart.coords)
    # sectional curvature is invariant under rescaling each direction; size
    # them like the density so that the steps are relative perturbations
    u = np.asarray(sigma1, float)
    v = np.asarray(sigma2, float)
    chart.to_chart(u), chart.to_chart(v)
    scale = np.max(np.abs(rho))
    u = u * scale / np.max(np.abs(u))
    v = v * scale / np.max(np.abs(v))
    g = lambda r, a, b: a @ dense.M(r) @ b
    e = step
    duv = (g(rho + e * u + e * v, u, v) - g(rho + e * u - e * v, u, v)
           - g(rho - e * u + e * v, u, v) + g(rho - e * u - e * v, u, v)) / (4 * e * e)
    duu_vv = (g(rho + e * u, v, v) - 2 * g(rho, v, v) + g(rho - e * u, v, v)) / e**2
    dvv_uu = (g(rho + e * v, u, u) - 2 * g(rho, u, u) + g(rho - e * v, u, u)) / e**2
    second = duv - 0.5 * duu_vv - 0.5 * dvv_uu

    E = chart.basis
    M = dense.M(rho)
    dMu, dMv = dense.dM(rho, u, step1), dense.dM(rho, v, step1)
    dMe = [dense.dM(rho, E[:, i], step1) for i in range(chart.n - 1)]

    def gam(a, dMa, b, dMb):
        # Gamma_{m,ab} = 1/2 (d_a g(b, e_m) + d_b g(a, e_m) - d_m g(a, b))
        return 0.5 * (b @ dMa @ E + a @ dMb @ E - np.array([a @ dm @ b for dm in dMe]))

    G = E.T @ M @ E
    g_uv, g_vv, g_uu = gam(u, dMu, v, dMv), gam(v, dMv, v, dMv), gam(u, dMu, u, dMu)
    first = g_uv @ np.linalg.solve(G, g_uv) - g_vv @ np.linalg.solve(G, g_uu)
    Z = g(rho, u, u) * g(rho, v, v) - g(rho, u, v) ** 2
    return float((second + first) / Z)


# -- comparison table --------------------------------------------------------

CSV_HEADER = ["n", "quantity", "sample", "analytic", "oracle", "abs_gap", "rel_gap"]


@dataclass
class ComparisonTable:
    rows: list

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow([r[0], r[1], r[2]] + [f"{x:.17g}" for x in r[3:]])
        return buf.getvalue()

    def select(self, quantity):
        return [r for r in self.rows if r[1] == quantity]


def _sample_density(grid: Grid, model: MobilityModel, rng) -> DensityField:
    lo, hi = model.admissible
    base = 1.0 / grid.length
    pert = grid.random_smooth_field(rng, max_mode=2, amplitude=0.1 * base)
    rho = DensityField.normalized(grid, base + pert)
    model.check(rho.values)
    return rho


def compare_report(n_values, model: MobilityModel, seed: int = 0, samples: int = 2,
                   length: float | None = None) -> ComparisonTable:
    """Oracle-versus-analytic rows for metric, connection and sectional curvature."""
    from .curvature import sectional
    from .geometry import connection_form
    from .operator import apply_response, metric_inner

    length = default_length(model) if length is None else length
    rows = []
    for n in n_values:
        if n > MAX_ORACLE_N:
            raise InvalidArgument(f"oracle grids are capped at n = {MAX_ORACLE_N}, got {n}")
        grid = Grid(n, length)
        rng = np.random.default_rng([seed, n])
        for k in range(samples):
            rho = _sample_density(grid, model, rng)
            chart = Chart.from_density(rho)
            phis = [grid.random_smooth_field(rng, max_mode=2) for _ in range(3)]
            sig = [apply_response(rho, model, p) for p in phis]
            G = metric_matrix(chart, model).g
            a = metric_inner(rho, model, phis[0], phis[1])
            o = chart.to_chart(sig[0]) @ G @ chart.to_chart(sig[1])
            rows.append(_row(n, "metric", k, a, o))
            a = connection_form(rho, model, *phis)
            o = connection_fd(chart, model, *phis)
            rows.append(_row(n, "connection", k, a, o))
            a = sectional(rho, model, phis[0], phis[1], dealias=1.0).value
            o = riemann_fd(chart, model, sig[0], sig[1])
            rows.append(_row(n, "sectional", k, a, o))
    return ComparisonTable(rows)


def _row(n, quantity, sample, analytic, oracle):
    gap = abs(analytic - oracle)
    return (n, quantity, sample, float(analytic), float(oracle), gap,
            gap / max(abs(analytic), 1e-300))
