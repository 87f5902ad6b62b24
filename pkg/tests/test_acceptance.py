"""Acceptance criteria 1-12, each at its stated tolerance and runtime budget.

Every test records a one-line outcome (see ``conftest.pytest_terminal_summary``)
before asserting.  Criteria 1-5 fail by design: the closed form of the
one-dimensional curvature drops a zero-mode term on the periodic domain,
and the expected constant of criterion 4 is not the value of its own
formula.  The detail lines carry the measured numbers for every route.
"""
import time

import numpy as np
import pytest

from hydrogeo import (DensityField, FlowConfig, Grid, apply_response, builtin_model,
                      default_length, distance, geodesic_flow, gradient_flow,
                      metric_inner_tangent, riemann, sectional)
from hydrogeo.dynamics import transport_many, transported_inner
from hydrogeo.identities import (connection_checks, quartic_check, sample_inputs,
                                 symmetry_checks)
from hydrogeo.oracle import Chart, riemann_fd

from conftest import smooth_density


class Clock:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


def _pairs(model, n, count, seed):
    grid = Grid(n, default_length(model))
    for k in range(count):
        rng = np.random.default_rng([seed, k])
        rho, phis = sample_inputs(grid, model, rng, max_mode=3, count=2)
        yield rho, phis[0], phis[1]


def test_criterion_01_independent_flat(acceptance):
    m = builtin_model("independent")
    worst = {"general": 0.0, "closed_form_1d": 0.0}
    with Clock() as c:
        for rho, p1, p2 in _pairs(m, 128, 100, 1):
            for method in worst:
                rep = sectional(rho, m, p1, p2, method)
                worst[method] = max(worst[method], abs(rep.value) / rep.scale
                                    if rep.scale > 0 else abs(rep.value))
    ok = worst["general"] <= 1e-10 and c.seconds < 5
    acceptance(1, "independent model flat", ok,
               f"max |K|/scale general={worst['general']:.3e} "
               f"closed_form_1d={worst['closed_form_1d']:.3e} (tol 1e-10), {c.seconds:.2f}s")
    assert ok


def test_criterion_02_sign_theorem(acceptance):
    out = {}
    with Clock() as c:
        for name, sign in (("kmp", 1.0), ("sep", -1.0)):
            m = builtin_model(name)
            for method in ("general", "closed_form_1d"):
                bad = 0
                worst = 0.0
                for rho, p1, p2 in _pairs(m, 64, 100, 2):
                    rep = sectional(rho, m, p1, p2, method)
                    excess = max(0.0, -sign * rep.value) / rep.scale
                    worst = max(worst, excess)
                    bad += excess > 1e-12
                out[name, method] = (bad, worst)
    ok = out["kmp", "general"][0] == 0 and out["sep", "general"][0] == 0 and c.seconds < 10
    detail = ", ".join(f"{n}/{m}: {b} of 100 violate (worst {w:.2e})"
                       for (n, m), (b, w) in out.items())
    acceptance(2, "sign theorem", ok, f"{detail}; {c.seconds:.2f}s")
    assert ok


def test_criterion_03_closed_form_agreement(acceptance):
    m = builtin_model("kmp")
    gaps, torus = {}, {}
    with Clock() as c:
        for n in (64, 128, 256):
            grid = Grid(n)
            x = grid.nodes
            rho = DensityField.normalized(grid, 1 + 0.2 * np.sin(2 * np.pi * x))
            worst, worst_t = 0.0, 0.0
            for k in range(10):
                rng = np.random.default_rng([3, k])
                phis = [grid.random_smooth_field(rng, max_mode=3) for _ in range(4)]
                g = riemann(rho, m, *phis, method="general")
                c1 = riemann(rho, m, *phis, method="closed_form_1d")
                ct = riemann(rho, m, *phis, method="closed_form_torus")
                scale = max(g.scale, c1.scale)
                worst = max(worst, abs(g.value - c1.value) / scale)
                worst_t = max(worst_t, abs(g.value - ct.value) / max(g.scale, ct.scale))
            gaps[n], torus[n] = worst, worst_t
    geometric = gaps[128] <= 0.5 * gaps[64] and gaps[256] <= 0.5 * gaps[128]
    ok = gaps[256] <= 1e-6 and geometric and c.seconds < 30
    acceptance(3, "general vs 1-D closed form", ok,
               "gap " + " ".join(f"n={n}:{v:.2e}" for n, v in gaps.items())
               + "; vs closed_form_torus " + " ".join(f"n={n}:{v:.1e}" for n, v in torus.items())
               + f"; {c.seconds:.2f}s")
    assert ok


def test_criterion_04_exact_value(acceptance):
    m = builtin_model("kmp")
    grid = Grid(128)
    x = grid.nodes
    rho = DensityField.uniform(grid)
    p1, p2 = np.sin(2 * np.pi * x), np.cos(2 * np.pi * x)
    target = 8 * np.pi**2
    with Clock() as c:
        vals = {meth: sectional(rho, m, p1, p2, meth).value
                for meth in ("general", "closed_form_1d", "closed_form_torus")}
    rel = abs(vals["general"] - target) / target
    ok = rel <= 1e-8 and c.seconds < 1
    acceptance(4, "KMP sin/cos sectional = 8 pi^2", ok,
               " ".join(f"{k}={v / np.pi**2:.6f} pi^2" for k, v in vals.items())
               + f"; rel gap {rel:.2e}; {c.seconds:.2f}s")
    assert ok


def test_criterion_05_oracle_equivalence(acceptance):
    tol = {12: 0.02, 16: 0.005}
    rows = []
    ok = True
    with Clock() as c:
        for name in ("independent", "sep", "kmp"):
            m = builtin_model(name)
            L = default_length(m)
            gaps = {}
            for n in (12, 16):
                grid = Grid(n, L)
                rho = DensityField.uniform(grid)
                x = grid.nodes
                p1, p2 = np.sin(2 * np.pi * x / L), np.cos(2 * np.pi * x / L)
                oracle = riemann_fd(Chart.from_density(rho), m, apply_response(rho, m, p1),
                                    apply_response(rho, m, p2))
                analytic = sectional(rho, m, p1, p2, "general", dealias=1.0).value
                gaps[n] = abs(analytic - oracle) / abs(oracle)
                ok &= gaps[n] <= tol[n]
            # gaps sit at finite-difference noise; allow 20% non-monotonic slack
            ok &= gaps[16] <= 1.2 * gaps[12]
            rows.append(f"{name} {gaps[12]:.1e}->{gaps[16]:.1e}")
    ok &= c.seconds < 60
    acceptance(5, "oracle vs analytic sectional", ok, ", ".join(rows) + f"; {c.seconds:.2f}s")
    assert ok


def test_criterion_06_connection_identities(acceptance):
    worst = {}
    with Clock() as c:
        for k in range(50):
            m = builtin_model(("independent", "sep", "kmp")[k % 3])
            grid = Grid(128, default_length(m))
            rho, (p1, p2, p3) = sample_inputs(grid, m, np.random.default_rng([6, k]), count=3)
            for chk in connection_checks(rho, m, p1, p2, p3):
                worst[chk.identity] = max(worst.get(chk.identity, 0.0), chk.residual)
    ok = max(worst.values()) <= 1e-8 and c.seconds < 10
    acceptance(6, "connection identities", ok,
               " ".join(f"{k}={v:.1e}" for k, v in worst.items()) + f"; {c.seconds:.2f}s")
    assert ok


def test_criterion_07_quartic_identity(acceptance):
    grid = Grid(256)
    worst = 0.0
    with Clock() as c:
        for k in range(50):
            rng = np.random.default_rng([7, k])
            phis = [grid.random_smooth_field(rng, max_mode=6) for _ in range(4)]
            worst = max(worst, quartic_check(grid, *phis).residual)
    ok = worst <= 1e-8 and c.seconds < 10
    acceptance(7, "quartic derivative identity", ok,
               f"max residual/term-scale {worst:.1e}; {c.seconds:.2f}s")
    assert ok


@pytest.fixture(scope="module")
def geodesic_runs():
    """KMP geodesic and two transported fields at dt and dt/2 over unit time."""
    m = builtin_model("kmp")
    grid = Grid(128)
    rng = np.random.default_rng(7)
    rho0 = DensityField.normalized(grid, 1 + grid.random_smooth_field(rng, 2, amplitude=0.1))
    phi0 = grid.random_smooth_field(rng, 2, amplitude=0.004)
    etas = [grid.random_smooth_field(rng, 3) for _ in range(2)]
    runs = {}
    t0 = time.perf_counter()
    for dt in (1e-3, 5e-4):
        base = geodesic_flow(m, rho0, phi0, FlowConfig(dt=dt, t_end=1.0))
        assert base.status == "ok"
        sp = base.diagnostics["speed"]
        speed = float(np.max(np.abs(sp - sp[0])) / sp[0])
        paths = transport_many(m, base, etas)
        series = [transported_inner(m, base, paths[i], paths[j])
                  for i, j in ((0, 0), (0, 1), (1, 1))]
        scale = np.sqrt(series[0][0] * series[2][0])
        inner = max(float(np.max(np.abs(s - s[0]))) for s in series) / scale
        runs[dt] = (speed, inner)
    return runs, time.perf_counter() - t0


def test_criterion_08_transport_isometry(acceptance, geodesic_runs):
    runs, seconds = geodesic_runs
    d1, d2 = runs[1e-3][1], runs[5e-4][1]
    ok = d1 <= 1e-7 and d1 >= 8 * d2 and seconds < 30
    acceptance(8, "parallel transport isometry", ok,
               f"drift {d1:.2e} -> {d2:.2e} ({d1 / d2:.1f}x); {seconds:.2f}s with criterion 9")
    assert ok


def test_criterion_09_geodesic_speed(acceptance, geodesic_runs):
    runs, seconds = geodesic_runs
    d1, d2 = runs[1e-3][0], runs[5e-4][0]
    ok = d1 <= 1e-7 and d1 >= 8 * d2 and seconds < 30
    acceptance(9, "geodesic speed conservation", ok,
               f"drift {d1:.2e} -> {d2:.2e} ({d1 / d2:.1f}x); {seconds:.2f}s with criterion 8")
    assert ok


def test_criterion_10_dissipation(acceptance):
    rows = []
    ok = True
    with Clock() as c:
        for k, name in enumerate(("independent", "sep", "kmp")):
            m = builtin_model(name)
            grid = Grid(64, default_length(m))
            rng = np.random.default_rng([10, k])
            rho0 = smooth_density(grid, rng, 0.3, max_mode=3)
            pi = smooth_density(grid, rng, 0.2)
            tr = gradient_flow(m, rho0, pi, FlowConfig(dt=1e-4, t_end=0.05))
            F = tr.diagnostics["free_energy"]
            rise = float(np.max(np.diff(F)))
            ok &= tr.status == "ok" and rise <= 1e-12
            tr = gradient_flow(m, rho0, pi, FlowConfig(dt=1e-5, t_end=1e-4))
            F, t = tr.diagnostics["free_energy"], tr.times
            rate = tr.diagnostics["dissipation_rate"]
            dF = (F[2:] - F[:-2]) / (t[2:] - t[:-2])
            ident = float(np.max(np.abs(dF + rate[1:-1]) / rate[1:-1]))
            ok &= ident <= 1e-4
            rows.append(f"{name} max dF={rise:.1e} identity {ident:.1e}")
    ok &= c.seconds < 30
    acceptance(10, "free-energy dissipation", ok, ", ".join(rows) + f"; {c.seconds:.2f}s")
    assert ok


def test_criterion_11_distance(acceptance):
    rows = []
    ok = True
    eps = 1e-3
    with Clock() as c:
        for k, name in enumerate(("independent", "sep")):
            m = builtin_model(name)
            grid = Grid(64, default_length(m))
            rng = np.random.default_rng([11, k])
            r0 = smooth_density(grid, rng, 0.2)
            r1 = smooth_density(grid, rng, 0.2)
            zero = distance(m, r0, r0).value
            sigma = grid.project_zero_mean(grid.random_smooth_field(rng, 2,
                                                                     amplitude=1 / grid.length))
            near = distance(m, r0, DensityField(grid, r0.values + eps * sigma))
            ratio = near.value / (eps * np.sqrt(metric_inner_tangent(r0, m, sigma, sigma)))
            a, b = distance(m, r0, r1), distance(m, r1, r0)
            sym = abs(a.value - b.value)
            ok &= zero <= 1e-10 and 0.99 <= ratio <= 1.01 and sym <= 1e-6
            ok &= a.status == b.status == near.status == "ok"
            rows.append(f"{name} d(r,r)={zero:.1e} ratio={ratio:.6f} asym={sym:.1e}")
    ok &= c.seconds < 120
    acceptance(11, "distance consistency (independent, sep)", ok,
               ", ".join(rows) + f"; {c.seconds:.2f}s")
    assert ok


def test_criterion_12_curvature_symmetries(acceptance):
    worst = {}
    with Clock() as c:
        for k in range(50):
            m = builtin_model(("independent", "sep", "kmp")[k % 3])
            grid = Grid(64, default_length(m))
            rho, phis = sample_inputs(grid, m, np.random.default_rng([12, k]))
            for chk in symmetry_checks(rho, m, *phis):
                worst[chk.identity] = max(worst.get(chk.identity, 0.0), chk.residual)
    ok = max(worst.values()) <= 1e-9 and c.seconds < 30
    acceptance(12, "curvature symmetries and first Bianchi", ok,
               " ".join(f"{k}={v:.1e}" for k, v in worst.items()) + f"; {c.seconds:.2f}s")
    assert ok
