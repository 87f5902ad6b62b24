"""Uniform periodic 1-D grid with Fourier collocation calculus.

Fields are plain ``numpy`` float arrays of length ``grid.n_points``; the
grid object carries the wavenumbers and performs differentiation,
quadrature, gauge projection and dealiasing on them.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InvalidArgument

MIN_POINTS = 8


@dataclass(frozen=True)
class Grid:
    """Equispaced nodes ``x_k = k * length / n_points`` on the torus."""

    n_points: int
    length: float = 1.0
    dealias_fraction: float = 1.0

    def __post_init__(self):
        n = self.n_points
        if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
            raise InvalidArgument(f"n_points must be an integer, got {n!r}")
        if n < MIN_POINTS or n % 2:
            raise InvalidArgument(f"n_points must be even and >= {MIN_POINTS}, got {n}")
        if not self.length > 0:
            raise InvalidArgument(f"length must be positive, got {self.length}")
        if not 0 < self.dealias_fraction <= 1:
            raise InvalidArgument(
                f"dealias_fraction must lie in (0, 1], got {self.dealias_fraction}"
            )

    @property
    def h(self) -> float:
        return self.length / self.n_points

    @cached_property
    def nodes(self) -> np.ndarray:
        x = np.arange(self.n_points) * self.h
        x.flags.writeable = False
        return x

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers for ``rfft`` output, Nyquist included."""
        k = 2 * np.pi * np.fft.rfftfreq(self.n_points, d=self.h)
        k.flags.writeable = False
        return k

    @property
    def nyquist_wavenumber(self) -> float:
        return np.pi * self.n_points / self.length

    def with_dealias(self, fraction: float) -> "Grid":
        return Grid(self.n_points, self.length, fraction)

    # -- calculus ---------------------------------------------------------

    def deriv(self, f, order: int = 1) -> np.ndarray:
        """Spectral derivative; the Nyquist coefficient is dropped for odd orders."""
        fh = np.fft.rfft(self._check(f))
        ik = (1j * self.wavenumbers) ** order
        if order % 2:
            ik[-1] = 0.0
        return np.fft.irfft(fh * ik, n=self.n_points)

    def integrate(self, f) -> float:
        return float(np.sum(self._check(f)) * self.h)

    def mean(self, f) -> float:
        return self.integrate(f) / self.length

    def project_zero_mean(self, f) -> np.ndarray:
        f = self._check(f)
        return f - np.mean(f)

    def dealias(self, f, fraction: float | None = None) -> np.ndarray:
        """Zero all modes with index above ``fraction * n/2``."""
        frac = self.dealias_fraction if fraction is None else fraction
        f = self._check(f)
        if frac >= 1.0:
            return f.copy()
        fh = np.fft.rfft(f)
        fh[np.arange(fh.size) > frac * (self.n_points // 2)] = 0.0
        return np.fft.irfft(fh, n=self.n_points)

    def nyquist_component(self, f) -> np.ndarray:
        """Projection of ``f`` onto the alternating mode ``(-1)^k``."""
        f = self._check(f)
        alt = self._alternating
        return alt * (f @ alt) / self.n_points

    @cached_property
    def _alternating(self) -> np.ndarray:
        return np.where(np.arange(self.n_points) % 2 == 0, 1.0, -1.0)

    def _check(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape != (self.n_points,):
            raise InvalidArgument(
                f"field has shape {f.shape}, grid expects ({self.n_points},)"
            )
        return f

    # -- field construction -----------------------------------------------

    def constant(self, value: float) -> np.ndarray:
        return np.full(self.n_points, float(value))

    def fourier_field(self, modes, mean: float = 0.0) -> np.ndarray:
        """Sum of ``a cos(2 pi k x / L) + b sin(2 pi k x / L)`` over ``(k, a, b)``."""
        x = self.nodes
        out = np.full(self.n_points, float(mean))
        for k, a, b in modes:
            arg = 2 * np.pi * k * x / self.length
            out += a * np.cos(arg) + b * np.sin(arg)
        return out

    def random_smooth_field(self, rng: np.random.Generator, max_mode: int = 4,
                            decay: float = 1.5, amplitude: float = 1.0) -> np.ndarray:
        """Random zero-mean trigonometric polynomial with decaying spectrum."""
        k = np.arange(1, max_mode + 1)
        a = rng.standard_normal(max_mode) / k**decay
        b = rng.standard_normal(max_mode) / k**decay
        return amplitude * self.fourier_field(zip(k, a, b))


def make_grid(n: int, length: float = 1.0, dealias_fraction: float = 1.0) -> Grid:
    return Grid(n, float(length), float(dealias_fraction))


def deriv(grid: Grid, f) -> np.ndarray:
    return grid.deriv(f)


def integrate(grid: Grid, f) -> float:
    return grid.integrate(f)


def project_zero_mean(grid: Grid, f) -> np.ndarray:
    return grid.project_zero_mean(f)


def dealias(grid: Grid, f) -> np.ndarray:
    return grid.dealias(f)


def write_field_csv(path, grid: Grid, values) -> None:
    values = grid._check(values)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "value"])
        for x, v in zip(grid.nodes, values):
            w.writerow([f"{x:.17g}", f"{v:.17g}"])


def read_field_csv(path, grid: Grid | None = None):
    """Read a field written by :func:`write_field_csv`.

    Returns ``(grid, values)``; the grid is inferred from the node column
    when not supplied.
    """
    xs, vs = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [h.strip() for h in header] != ["x", "value"]:
            raise InvalidArgument(f"unexpected header {header} in {path}")
        for row in reader:
            xs.append(float(row[0]))
            vs.append(float(row[1]))
    values = np.array(vs)
    if grid is None:
        n = len(xs)
        h = xs[1] - xs[0]
        grid = make_grid(n, length=h * n)
    grid._check(values)
    return grid, values
