"""Time integration on the density manifold.

Gradient flows of the Bregman free energy, geodesics, parallel transport
along stored curves, and the least-action distance by direct
transcription.  All explicit integration is classical RK4.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import AdmissibilityError, ConditioningError, InvalidArgument
from .geometry import _State
from .grid import Grid
from .models import DensityField, MobilityModel, bregman_divergence
from .operator import MIN_CHI, _dense_solver, _inner, _response, _solve

log = logging.getLogger(__name__)

MASS_TOL = 1e-11


@dataclass(frozen=True)
class FlowConfig:
    dt: float = 1e-3
    t_end: float = 1.0
    integrator: str = "rk4"
    store_every: int = 1
    cfl_safety: float = 0.25

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidArgument(f"dt must be positive, got {self.dt}")
        if not self.t_end > 0:
            raise InvalidArgument(f"t_end must be positive, got {self.t_end}")
        if self.integrator != "rk4":
            raise InvalidArgument(f"unsupported integrator {self.integrator!r}")
        if int(self.store_every) != self.store_every or self.store_every < 1:
            raise InvalidArgument(f"store_every must be a positive integer, got {self.store_every}")
        if not 0 < self.cfl_safety <= 1:
            raise InvalidArgument(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass
class Trajectory:
    """Stored states of a curve ``t -> rho(t)`` with potentials ``d rho/dt = V_phi``."""

    grid: Grid
    model: str
    times: np.ndarray
    densities: np.ndarray
    potentials: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    status: str = "ok"
    events: list = field(default_factory=list)
    dt: float | None = None
    store_every: int = 1

    def __len__(self):
        return len(self.times)

    def density(self, i) -> DensityField:
        return DensityField(self.grid, self.densities[i])

    def csv_texts(self) -> dict:
        """CSV text keyed by quantity: wide ``density``/``potential``, long ``diagnostics``."""
        out = {}
        for name, arr in (("density", self.densities), ("potential", self.potentials)):
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(["time"] + [f"x{i}" for i in range(self.grid.n_points)])
            for t, row in zip(self.times, arr):
                w.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in row])
            out[name] = buf.getvalue()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "name", "value"])
        for i, t in enumerate(self.times):
            for name in sorted(self.diagnostics):
                w.writerow([f"{t:.17g}", name, f"{self.diagnostics[name][i]:.17g}"])
        out["diagnostics"] = buf.getvalue()
        return out

    def write_csv(self, prefix) -> list:
        """Write ``<prefix>_density.csv``, ``_potential.csv`` and ``_diagnostics.csv``."""
        paths = []
        for name, text in self.csv_texts().items():
            path = f"{prefix}_{name}.csv"
            with open(path, "w", newline="") as fh:
                fh.write(text)
            paths.append(path)
        return paths


def _rk4(f, y, dt):
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _checked(model, grid, r):
    r = model.check(r)
    mass = grid.integrate(r)
    if abs(mass - 1.0) > MASS_TOL * max(1.0, grid.length):
        raise InvalidArgument(f"mass drifted to {mass!r}")
    return r


# -- gradient flow -----------------------------------------------------------

def _flux_divergence(grid, chi, xi):
    # no alternating-mode stiffness here: it belongs to the metric, not the
    # physical flux, and would break the explicit stability limit
    return grid.deriv(chi * grid.deriv(xi))


def _stiffness(model, r) -> float:
    """Diffusion bound for the explicit step, ``max chi * max f''``.

    This dominates ``max D = max chi f''`` and bounds the spectrum of the
    discrete operator ``d/dx chi d/dx f''`` even when ``chi`` and ``f''``
    peak at different nodes.
    """
    chi = model.chi(r)
    fpp = model.diffusion(r) / chi
    return float(np.max(chi) * np.max(fpp))


def gradient_flow(model: MobilityModel, rho0: DensityField, pi: DensityField,
                  cfg: FlowConfig) -> Trajectory:
    """Onsager gradient flow ``d rho/dt = d/dx(chi d/dx (f'(rho) - f'(pi)))``.

    Halts with ``status = "admissibility_exit"`` if a stage leaves the
    admissible interval; ``dt`` is reduced when the explicit diffusion
    limit ``cfl_safety h^2 / max D`` is violated.
    """
    grid = rho0.grid
    if pi.grid != grid:
        raise InvalidArgument("rho0 and pi live on different grids")
    p = model.check(pi.values, "equilibrium")
    fp_pi = model.fprime(p)

    def slope(r):
        return model.fprime(r) - fp_pi

    def rhs(r):
        r = model.check(r)
        return _flux_divergence(grid, model.chi(r), slope(r))

    r = _checked(model, grid, rho0.values.copy())
    dt = cfg.dt
    t = 0.0
    times, rhos, phis = [], [], []
    diag = {"mass": [], "free_energy": [], "dissipation_rate": [], "dt": []}
    events = []

    def store(r, t):
        xi = grid.project_zero_mean(slope(r))
        times.append(t)
        rhos.append(r.copy())
        phis.append(-xi)
        diag["mass"].append(grid.integrate(r))
        diag["free_energy"].append(bregman_divergence(model, DensityField(grid, r), pi))
        dxi = grid.deriv(xi)
        diag["dissipation_rate"].append(grid.integrate(model.chi(r) * dxi * dxi))
        diag["dt"].append(dt)

    store(r, t)
    status = "ok"
    step = 0
    while t < cfg.t_end * (1 - 1e-12):
        dmax = _stiffness(model, r)
        limit = cfg.cfl_safety * grid.h**2 / dmax if dmax > 0 else np.inf
        if dt > limit:
            events.append({"time": t, "event": "dt_reduced", "old": dt, "new": limit})
            log.info("dt reduced from %g to %g at t=%g", dt, limit, t)
            dt = limit
        h = min(dt, cfg.t_end - t)
        try:
            r_new = _checked(model, grid, _rk4(rhs, r, h))
        except AdmissibilityError as exc:
            status = "admissibility_exit"
            events.append({"time": t, "event": "admissibility_exit", "detail": str(exc)})
            break
        r = r_new
        t += h
        step += 1
        if step % cfg.store_every == 0 or t >= cfg.t_end * (1 - 1e-12):
            store(r, t)
    return Trajectory(grid, model.name, np.array(times), np.array(rhos), np.array(phis),
                      {k: np.array(v) for k, v in diag.items()}, status, events, cfg.dt,
                      cfg.store_every)


def gradient_flow_rhs(model: MobilityModel, rho: DensityField, pi: DensityField) -> np.ndarray:
    """Right-hand side of the gradient flow at one state."""
    r = model.check(rho.values)
    xi = model.fprime(r) - model.fprime(model.check(pi.values, "equilibrium"))
    return _flux_divergence(rho.grid, model.chi(r), xi)


# -- geodesics ---------------------------------------------------------------

def _geodesic_rhs(model, grid):
    n = grid.n_points

    def rhs(y):
        r, phi = y[:n], y[n:]
        r = model.check(r)
        chi = model.chi(r)
        dphi = grid.deriv(phi)
        return np.concatenate([_response(grid, chi, phi),
                               grid.project_zero_mean(-0.5 * dphi * model.chi1(r) * dphi)])
    return rhs


def geodesic_flow(model: MobilityModel, rho0: DensityField, phi0, cfg: FlowConfig) -> Trajectory:
    """Integrate ``d rho/dt = V_phi``, ``d phi/dt = -1/2 Gamma_chi'(phi, phi)`` (mean removed)."""
    grid = rho0.grid
    n = grid.n_points
    rhs = _geodesic_rhs(model, grid)
    y = np.concatenate([_checked(model, grid, rho0.values.copy()),
                        grid.project_zero_mean(phi0)])
    dt = cfg.dt
    nsteps = cfg.n_steps
    if not math.isclose(nsteps * dt, cfg.t_end, rel_tol=1e-9):
        raise InvalidArgument("t_end must be an integer multiple of dt for geodesics")
    times, rhos, phis, speed, mass = [], [], [], [], []

    def store(y, t):
        times.append(t)
        rhos.append(y[:n].copy())
        phis.append(y[n:].copy())
        speed.append(_inner(grid, model.chi(y[:n]), y[n:], y[n:]))
        mass.append(grid.integrate(y[:n]))

    store(y, 0.0)
    status, events = "ok", []
    for k in range(1, nsteps + 1):
        try:
            y_new = _rk4(rhs, y, dt)
            _checked(model, grid, y_new[:n])
        except AdmissibilityError as exc:
            status = "admissibility_exit"
            events.append({"time": (k - 1) * dt, "event": "admissibility_exit",
                           "detail": str(exc)})
            break
        y = y_new
        if k % cfg.store_every == 0 or k == nsteps:
            store(y, k * dt)
    return Trajectory(grid, model.name, np.array(times), np.array(rhos), np.array(phis),
                      {"speed": np.array(speed), "mass": np.array(mass)}, status, events,
                      dt, cfg.store_every)


# -- parallel transport ------------------------------------------------------

@dataclass
class TransportPath:
    """Transported potentials ``eta(t)`` on the base times they were computed at."""

    times: np.ndarray
    etas: np.ndarray
    base_index: np.ndarray

    def __len__(self):
        return len(self.etas)

    def __getitem__(self, i):
        return self.etas[i]

    def __iter__(self):
        return iter(self.etas)


def parallel_transport(model: MobilityModel, base: Trajectory, eta0) -> TransportPath:
    """Solve ``V_{d eta/dt} + nabla_{V_phi} V_eta = 0`` along a stored curve.

    The base must be stored at every integration step with uniform spacing.
    RK4 stages use consecutive stored states, so ``eta`` advances with step
    ``2 dt`` and is returned at every other base time.
    """
    return transport_many(model, base, [eta0])[0]


def transport_many(model: MobilityModel, base: Trajectory, etas0) -> list:
    """Transport several potentials along one base curve, sharing the solves."""
    grid = base.grid
    times = np.asarray(base.times)
    if len(times) < 3:
        raise InvalidArgument("base trajectory needs at least three stored states")
    steps = np.diff(times)
    if base.store_every != 1 or not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
        raise InvalidArgument("base trajectory must be stored at every step with uniform dt")
    states = {}

    def rhs(i, eta):
        if i not in states:
            s = _State(grid, model, base.densities[i], 1.0)
            states[i] = (s, _dense_solver(grid, s.chi))
        s, solve = states[i]
        lc = s.levi_civita(base.potentials[i], eta)
        return grid.project_zero_mean(-solve(lc))

    H = 2 * steps[0]
    etas = [grid.project_zero_mean(e) for e in etas0]
    idx = [0]
    out = [[e.copy()] for e in etas]
    for i in range(0, len(times) - 2, 2):
        for j, eta in enumerate(etas):
            k1 = rhs(i, eta)
            k2 = rhs(i + 1, eta + 0.5 * H * k1)
            k3 = rhs(i + 1, eta + 0.5 * H * k2)
            k4 = rhs(i + 2, eta + H * k3)
            etas[j] = eta + H / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            out[j].append(etas[j].copy())
        idx.append(i + 2)
        states.pop(i, None)
        states.pop(i + 1, None)
    idx = np.array(idx)
    return [TransportPath(times[idx], np.array(o), idx) for o in out]


def transported_inner(model: MobilityModel, base: Trajectory, path1: TransportPath,
                      path2: TransportPath) -> np.ndarray:
    """``<V_eta1, V_eta2>`` at each transported time."""
    return np.array([
        _inner(base.grid, model.chi(base.densities[i]), a, b)
        for i, a, b in zip(path1.base_index, path1.etas, path2.etas)
    ])


# -- least-action distance ---------------------------------------------------

CHI_FLOOR = 1e-12


@dataclass(frozen=True)
class OptimizerConfig:
    max_iter: int = 500
    gtol: float = 1e-12
    ftol: float = 1e-15
    penalty: float = 1e6
    margin: float = 1e-6
    restarts: int = 5


@dataclass
class DistanceResult:
    value: float
    action: float
    path: Trajectory
    status: str
    iterations: int

    def __iter__(self):
        return iter((self.value, self.path))


def _action_and_grad(model, grid, rho_nodes, dtau, opt, floor=True):
    """Discrete action ``sum_k dt g_{rho_mid}(sigma_k, sigma_k)`` and its node gradient."""
    K = len(rho_nodes) - 1
    h = grid.h
    lo, hi = model.admissible
    total = 0.0
    grad = np.zeros_like(rho_nodes)
    phis = []
    for k in range(K):
        mid = 0.5 * (rho_nodes[k] + rho_nodes[k + 1])
        sigma = (rho_nodes[k + 1] - rho_nodes[k]) / dtau
        chi = model.chi(mid)
        chi1 = model.chi1(mid)
        if floor:
            low = chi < CHI_FLOOR
            chi = np.where(low, CHI_FLOOR, chi)
            chi1 = np.where(low, 0.0, chi1)
        phi = _dense_solver(grid, chi, CHI_FLOOR if floor else MIN_CHI)(sigma)
        phis.append(phi)
        total += dtau * h * (sigma @ phi)
        g_sigma = 2 * dtau * h * phi
        dphi = grid.deriv(phi)
        g_mid = -dtau * h * chi1 * dphi * dphi
        grad[k + 1] += g_sigma / dtau + 0.5 * g_mid
        grad[k] += -g_sigma / dtau + 0.5 * g_mid
    pen = 0.0
    if floor and opt is not None:
        inner = rho_nodes[1:-1]
        below = np.maximum(0.0, (lo + opt.margin) - inner) if np.isfinite(lo) else 0 * inner
        above = np.maximum(0.0, inner - (hi - opt.margin)) if np.isfinite(hi) else 0 * inner
        pen = opt.penalty * float(np.sum(below**2 + above**2)) * h
        grad[1:-1] += opt.penalty * 2 * h * (above - below)
    return total + pen, grad, phis


def distance(model: MobilityModel, rho0: DensityField, rho1: DensityField, n_time: int = 8,
             opt: OptimizerConfig | None = None) -> DistanceResult:
    """Least-action distance between two densities over unit time.

    Unknowns are the interior densities of ``n_time`` uniform intervals.
    Each interval carries the tangent ``sigma_k = (rho_{k+1} - rho_k)/dt``
    and the optimal momentum ``-chi d/dx phi_k`` with ``A(rho_mid) phi_k =
    sigma_k``; mass is held fixed by keeping updates mean-free.
    """
    opt = OptimizerConfig() if opt is None else opt
    grid = rho0.grid
    if rho1.grid != grid:
        raise InvalidArgument("densities live on different grids")
    if n_time < 1:
        raise InvalidArgument(f"n_time must be positive, got {n_time}")
    a = model.check(rho0.values)
    b = model.check(rho1.values)
    K = n_time
    dtau = 1.0 / K
    n = grid.n_points
    s = np.linspace(0.0, 1.0, K + 1)[:, None]
    init = (1 - s) * a + s * b

    # optimise in w with d = |k| w (Fourier multiplier): the action is close
    # to a negative-order Sobolev norm of d, so this evens out its spectrum
    mult = np.abs(grid.wavenumbers) / (2 * np.pi / grid.length)
    mult[0] = 0.0

    def precond(z):
        return np.fft.irfft(np.fft.rfft(z, axis=-1) * mult, n=n, axis=-1)

    def nodes(z):
        r = init.copy()
        if K > 1:
            r[1:-1] += precond(z.reshape(K - 1, n))
        return r

    S0, _, _ = _action_and_grad(model, grid, init, dtau, opt)
    scale = S0 if S0 > 0 else 1.0
    status = "ok"
    iterations = 0
    z = np.zeros((K - 1) * n)
    if K > 1 and S0 > 0:
        best = [np.inf, z]

        def fun(z):
            try:
                S, g, _ = _action_and_grad(model, grid, nodes(z), dtau, opt)
            except ConditioningError:
                return np.inf, np.zeros_like(z)
            f = S / scale
            if f < best[0]:
                best[:] = [f, z.copy()]
            return f, precond(g[1:-1]).ravel() / scale

        status = "not_converged"
        for _ in range(opt.restarts + 1):
            f_start = best[0]
            res = minimize(fun, best[1], jac=True, method="L-BFGS-B",
                           options={"maxiter": opt.max_iter - iterations, "gtol": opt.gtol,
                                    "ftol": opt.ftol, "maxcor": 20})
            iterations += int(res.nit)
            log.debug("distance optimizer: %s", res.message)
            if res.success:
                status = "ok"
                break
            if "ABNORMAL" not in str(res.message) or iterations >= opt.max_iter:
                break
            # a failed line search keeps the best point seen; restart with
            # fresh curvature memory unless nothing was gained
            if not best[0] < f_start * (1 - 4 * np.finfo(float).eps):
                status = "ok"
                break
        z = best[1]
        if status != "ok":
            log.warning("distance optimizer stopped: %s", res.message)
    r = nodes(z)
    try:
        for row in r:
            model.check(row)
        S, _, phis = _action_and_grad(model, grid, r, dtau, None, floor=False)
    except (AdmissibilityError, ConditioningError):
        status = "infeasible"
        S, _, phis = _action_and_grad(model, grid, r, dtau, opt)
    pots = np.array(phis + [phis[-1]])
    times = np.linspace(0.0, 1.0, K + 1)
    mass = np.array([grid.integrate(row) for row in r])
    interval_action = np.array([dtau * _inner(grid, model.chi(0.5 * (r[k] + r[k + 1])),
                                              phis[k], phis[k]) for k in range(K)] + [np.nan])
    path = Trajectory(grid, model.name, times, r, pots,
                      {"mass": mass, "interval_action": interval_action}, status, [], dtau, 1)
    return DistanceResult(value=math.sqrt(max(S, 0.0)), action=S, path=path, status=status,
                          iterations=iterations)
