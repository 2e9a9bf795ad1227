import numpy as np
import pytest
import sympy as sp

from superpsc.solver import (NewtonDivergence, log_level_residual, make_grid, radial_residual,
                             solve_radial)


@pytest.fixture(scope="module")
def profile():
    return solve_radial(n=2, nodes=2000, eps=1e-2, tol=1e-10)


def test_exact_profile_has_zero_residual():
    t = np.linspace(0, 0.99, 50)
    for n in (1, 2, 3):
        res = radial_residual(n, t, -np.log1p(-t), 1 / (1 - t), 1 / (1 - t) ** 2)
        np.testing.assert_allclose(res / np.exp((n + 1) * -np.log1p(-t)), 0, atol=1e-13)


def test_zero_profile_residual_is_minus_one():
    t = np.linspace(0, 0.9, 7)
    np.testing.assert_array_equal(radial_residual(2, t, 0 * t, 0 * t, 0 * t), -1)


def test_perturbed_profile_against_symbolic():
    T = sp.symbols("t")
    n = 2
    f = -sp.log(1 - T) + sp.Rational(1, 100) * sp.sin(sp.pi * T)
    fp, fpp = sp.diff(f, T), sp.diff(f, T, 2)
    expr = fp ** (n - 1) * (fp + T * fpp) - sp.exp((n + 1) * f)
    t = np.linspace(0.0, 0.95, 20)
    F, Fp, Fpp, R = (sp.lambdify(T, e, "numpy") for e in (f, fp, fpp, expr))
    got = radial_residual(n, t, F(t), Fp(t), Fpp(t))
    want = np.array([float(expr.subs(T, v).evalf(30)) for v in t])
    assert np.abs(got - want).max() <= 1e-9 * max(1.0, np.abs(want).max())
    assert np.abs(got).max() > 1e-3


def test_solution_accuracy(profile):
    assert profile.deviation(0.99) <= 1e-6
    np.testing.assert_allclose(profile.rho, profile.t - 1, atol=1e-6)
    assert log_level_residual(profile).max() <= 1e-7


def test_solution_is_strictly_psh(profile):
    t, fp, fpp = profile.t[1:-1], profile.fp[1:-1], profile.fpp[1:-1]
    assert np.all(fp > 0)
    assert np.all(fp + t * fpp > 0)
    assert np.all(np.diff(profile.f) > 0)


def test_mesh_refinement_ratio(profile):
    coarse = solve_radial(n=2, nodes=1000)
    assert coarse.deviation(0.99) / profile.deviation(0.99) >= 3


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_converges_for_small_dimensions(n):
    p = solve_radial(n=n, nodes=800)
    assert p.iterations <= 30
    assert p.deviation(0.99) <= 1e-5


@pytest.mark.parametrize("n", [1, 2, 3, 4])
@pytest.mark.xfail(strict=True, raises=NewtonDivergence,
                   reason="a flat start has f' = 0, outside the log-form domain; the default start is a ramp")
def test_converges_from_zero(n):
    solve_radial(n=n, nodes=2000, initial=np.zeros(2000))


def test_grids():
    for kind in ("log", "graded", "uniform"):
        t = make_grid(100, 1e-2, kind)
        assert t[0] == 0 and t[-1] == pytest.approx(0.99)
        assert np.all(np.diff(t) > 0)
    with pytest.raises(ValueError):
        make_grid(10, 1e-2, "cosine")


@pytest.mark.parametrize("kwargs", [dict(n=0), dict(eps=0.5), dict(eps=0.0), dict(nodes=3)])
def test_rejects_bad_arguments(kwargs):
    with pytest.raises(ValueError):
        solve_radial(**kwargs)
