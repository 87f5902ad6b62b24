import numpy as np
import pytest

from hydrogeo import (AdmissibilityError, DensityField, Grid, InvalidArgument,
                      bregman_divergence, builtin_model, custom_model, default_length,
                      equilibrium)
from hydrogeo.models import eval_mobility, free_energy_slope

from conftest import model_grid, smooth_density


def test_builtin_values():
    ind, sep, kmp = (builtin_model(n) for n in ("independent", "sep", "kmp"))
    assert ind.chi(0.5) == 0.5 and ind.chi2(0.5) == 0.0
    assert sep.chi(0.5) == 0.25 and sep.chi2(0.3) == -2.0
    assert kmp.chi(2.0) == 4.0 and kmp.chi2(0.7) == 2.0
    assert (ind.convexity, sep.convexity, kmp.convexity) == ("linear", "concave", "convex")


def test_unknown_model():
    with pytest.raises(InvalidArgument):
        builtin_model("zrp")


def test_derivatives_match_finite_differences(model):
    lo, hi = model.admissible
    r = np.linspace(0.1, 0.9, 9) if np.isfinite(hi) else np.linspace(0.2, 3.0, 9)
    eps = 1e-5
    fd1 = (model.chi(r + eps) - model.chi(r - eps)) / (2 * eps)
    fd2 = (model.chi1(r + eps) - model.chi1(r - eps)) / (2 * eps)
    assert np.allclose(fd1, model.chi1(r), atol=1e-8)
    assert np.allclose(fd2, model.chi2(r), atol=1e-8)
    fdf = (model.f(r + eps) - model.f(r - eps)) / (2 * eps)
    assert np.allclose(fdf, model.fprime(r), atol=1e-8)


def test_builtins_have_unit_diffusion(model):
    # D = chi f'' is identically one for the three zero-range examples
    r = np.linspace(0.1, 0.9, 9)
    assert np.allclose(model.diffusion(r), 1.0, atol=1e-12)


def test_eval_mobility():
    g = Grid(16, 2.0)
    chi, chi1, chi2 = eval_mobility(builtin_model("sep"), DensityField.uniform(g))
    assert np.allclose(chi, 0.25) and np.allclose(chi1, 0.0) and np.allclose(chi2, -2.0)
    g = Grid(16)
    chi, chi1, chi2 = eval_mobility(builtin_model("kmp"), DensityField.uniform(g))
    assert np.allclose(chi, 1) and np.allclose(chi1, 2) and np.allclose(chi2, 2)
    rho = DensityField.normalized(g, 1 + 0.3 * np.sin(2 * np.pi * g.nodes))
    assert np.all(eval_mobility(builtin_model("independent"), rho)[2] == 0)


def test_density_mass():
    g = Grid(16)
    with pytest.raises(InvalidArgument):
        DensityField(g, g.constant(2.0))
    rho = DensityField.normalized(g, g.constant(3.0) + np.sin(2 * np.pi * g.nodes))
    assert g.integrate(rho.values) == pytest.approx(1.0, abs=1e-14)


def test_sep_margin():
    g = Grid(16)  # uniform density 1 sits on the boundary of (0, 1)
    with pytest.raises(AdmissibilityError):
        builtin_model("sep").check(DensityField.uniform(g).values)
    assert default_length(builtin_model("sep")) == 2.0
    assert default_length(builtin_model("kmp")) == 1.0


def test_bregman_zero_at_equilibrium(model, rng):
    g = model_grid(model)
    pi = smooth_density(g, rng)
    assert bregman_divergence(model, pi, pi) == 0.0
    assert np.all(free_energy_slope(model, pi, pi) == 0.0)


def test_bregman_nonnegative(model, rng):
    g = model_grid(model)
    for _ in range(10):
        assert bregman_divergence(model, smooth_density(g, rng), smooth_density(g, rng)) > 0


def test_bregman_independent_form(rng):
    m = builtin_model("independent")
    g = Grid(64)
    rho, pi = smooth_density(g, rng), smooth_density(g, rng)
    r, p = rho.values, pi.values
    # the linear terms integrate to zero for unit-mass densities
    assert bregman_divergence(m, rho, pi) == pytest.approx(
        g.integrate(r * np.log(r) - r * np.log(p)), abs=1e-13)


def test_bregman_kmp_quadrature():
    g = Grid(128)
    rho = DensityField.uniform(g)
    pi = DensityField.normalized(g, 1 + 0.1 * np.sin(2 * np.pi * g.nodes))
    q = rho.values / pi.values
    expected = g.integrate(q - np.log(q) - 1)
    assert abs(bregman_divergence(builtin_model("kmp"), rho, pi) - expected) < 1e-10


def test_slope_forms(rng):
    g = Grid(64)
    rho, pi = smooth_density(g, rng), smooth_density(g, rng)
    kmp = builtin_model("kmp")
    assert np.allclose(free_energy_slope(kmp, rho, pi), 1 / pi.values - 1 / rho.values)
    ind = builtin_model("independent")
    # rho / pi constant gives a constant slope log c
    pi2 = DensityField.uniform(g)
    assert np.allclose(free_energy_slope(ind, pi2, pi2), 0.0)


def test_equilibrium_drift(model, rng):
    g = model_grid(model)
    pi = smooth_density(g, rng)
    eq = equilibrium(model, pi)
    assert np.allclose(eq.drift, g.deriv(model.fprime(pi.values)), atol=1e-10)


def test_custom_model_checks():
    m = custom_model("cubic", chi=lambda r: r**3, chi1=lambda r: 3 * r**2,
                     chi2=lambda r: 6 * r, fprime=lambda r: -0.5 / r**2,
                     admissible=(0, np.inf))
    assert m.convexity == "convex"
    with pytest.raises(InvalidArgument):
        custom_model("bad", chi=lambda r: r**3, chi1=lambda r: 2 * r**2,
                     chi2=lambda r: 6 * r, fprime=lambda r: -0.5 / r**2,
                     admissible=(0, np.inf))


def test_custom_model_without_f_uses_quadrature(rng):
    kmp = builtin_model("kmp")
    m = custom_model("kmp2", kmp.chi, kmp.chi1, kmp.chi2, kmp.fprime, (0, np.inf))
    g = Grid(64)
    rho, pi = smooth_density(g, rng), smooth_density(g, rng)
    assert bregman_divergence(m, rho, pi) == pytest.approx(bregman_divergence(kmp, rho, pi),
                                                           rel=1e-12)
