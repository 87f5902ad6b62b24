import numpy as np
import pytest

from hydrogeo import DensityField, Grid, builtin_model, default_length

MODELS = ("independent", "sep", "kmp")

# acceptance outcomes, printed once at the end of the session
_ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """Record ``(number, title, passed, detail)`` for the terminal summary."""
    def record(number, title, passed, detail):
        _ACCEPTANCE[number] = (title, bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {title}: {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, passed, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(
            f"criterion {number:>2}  {'PASS' if passed else 'FAIL'}  {title}: {detail}")


@pytest.fixture(params=MODELS)
def model(request):
    return builtin_model(request.param)


def model_grid(model, n=64):
    return Grid(n, default_length(model))


def smooth_density(grid, rng, rel=0.2, max_mode=2):
    """Unit-mass density with peak relative deviation ``rel`` from uniform."""
    base = 1.0 / grid.length
    pert = grid.random_smooth_field(rng, max_mode=max_mode)
    pert *= rel * base / np.max(np.abs(pert))
    return DensityField.normalized(grid, base + pert)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
