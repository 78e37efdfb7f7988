import math

import numpy as np
import pytest
from scipy.integrate import quad

from telegraph_interface import kernels
from telegraph_interface.kernels import SkewParams
from telegraph_interface.model import Grid, LineDensity, ParameterError

SKEW = SkewParams(0.7, 0.3)


def gauss(t, z):
    return np.exp(-z * z / (2 * t)) / math.sqrt(2 * math.pi * t)


def test_symmetric_weights_give_heat_kernel():
    y = np.linspace(-4, 4, 81)
    sp = SkewParams(0.4, 0.4)
    np.testing.assert_allclose(kernels.gamma_plus(0.8, 0.6, y, sp), gauss(0.8, y - 0.6), rtol=1e-15)
    np.testing.assert_allclose(kernels.gamma_minus(0.8, -0.6, y, sp), gauss(0.8, y + 0.6), rtol=1e-15)


def test_q_zero_gives_reflected_kernel():
    y = np.linspace(-3, 3, 61)
    g = kernels.gamma_plus(1.0, 0.5, y, SkewParams(1.0, 0.0))
    right = y > 0
    np.testing.assert_allclose(g[right], gauss(1.0, y[right] - 0.5) + gauss(1.0, y[right] + 0.5), rtol=1e-14)
    assert np.all(g[~right] == 0)


def test_p_one_q_zero_left_start_is_killed_with_transfer():
    # everything lost at 0 from the left reappears on the right
    sp = SkewParams(1.0, 0.0)
    assert kernels.gamma_integral(1.0, -0.8, sp) == pytest.approx(1.0, abs=1e-10)
    y = np.array([-1.0, -0.2])
    np.testing.assert_allclose(kernels.gamma_minus(1.0, -0.8, y, sp), gauss(1, y + 0.8) - gauss(1, y - 0.8), rtol=1e-14)


def test_normalization_example():
    assert abs(kernels.gamma_integral(1.0, 0.5, SKEW) - 1.0) < 1e-8


def test_kernel_argument_errors():
    with pytest.raises(ValueError):
        kernels.gamma_plus(0.0, 1.0, 0.0, SKEW)
    with pytest.raises(ValueError):
        kernels.gamma_plus(1.0, -1.0, 0.0, SKEW)
    with pytest.raises(ValueError):
        kernels.gamma_minus(1.0, 1.0, 0.0, SKEW)
    with pytest.raises(ParameterError):
        SkewParams(0.0, 0.0)


def test_gamma_nonnegative_everywhere():
    y = np.linspace(-5, 5, 201)
    for p, q in [(1, 0), (0, 1), (0.9, 0.1), (0.5, 0.5)]:
        sp = SkewParams(p, q)
        for x in (-2.0, -0.01, 0.0, 0.01, 2.0):
            assert np.all(kernels.gamma(0.5, x, y, sp) >= 0)


def test_skewness_matches_weights():
    sp = SkewParams(0.7, 0.3)
    assert sp.theta == pytest.approx(0.4)
    assert sp.right_weight == pytest.approx(1.4) and sp.left_weight == pytest.approx(0.6)


# --- densities --------------------------------------------------------------


def smooth(grid, center=-0.5, width=0.6):
    edges = grid.edges
    from scipy.special import erf

    cdf = 0.5 * (1 + erf((edges - center) / (width * math.sqrt(2))))
    return LineDensity(grid, np.diff(cdf) / grid.dx)


def test_short_time_is_near_identity():
    grid = Grid(6.0, 1200)
    psi = smooth(grid)
    out = kernels.skew_density_evolve(psi, 1e-6, SKEW)
    assert grid.dx * np.sum(np.abs(out.values - psi.values)) < 1e-3


def test_symmetric_skew_evolution_is_heat():
    grid = Grid(6.0, 600)
    psi = smooth(grid)
    a = kernels.skew_density_evolve(psi, 0.7, SkewParams(0.3, 0.3))
    b = kernels.heat_evolve(psi, 0.7)
    np.testing.assert_allclose(a.values, b.values, rtol=1e-12, atol=1e-15)


def test_skew_evolution_matches_pointwise_kernel():
    grid = Grid(6.0, 1200)
    psi = smooth(grid)
    out = kernels.skew_density_evolve(psi, 0.5, SKEW)
    density0 = lambda x: gauss(0.36, x + 0.5)  # noqa: E731
    for y in (-1.5, -0.4, 0.3, 1.2):
        k = grid.cell_of(y)
        yc = grid.centers[k]
        exact = sum(
            quad(lambda x: float(kernels.gamma(0.5, x, yc, SKEW) * density0(x)), a, b, epsabs=1e-12)[0]
            for a, b in ((-np.inf, 0.0), (0.0, np.inf))
        )
        assert out.values[k] == pytest.approx(exact, abs=2e-4)


def test_skew_evolution_mass_and_transmission_condition():
    gaps = []
    for n in (400, 800, 1600):
        grid = Grid(8.0, n)
        out = kernels.skew_density_evolve(smooth(grid), 0.5, SKEW)
        assert out.mass() == pytest.approx(1.0, abs=1e-9)
        m = grid.mid
        # one-sided limits by linear extrapolation of the two nearest cells
        left = 1.5 * out.values[m - 1] - 0.5 * out.values[m - 2]
        right = 1.5 * out.values[m] - 0.5 * out.values[m + 1]
        gaps.append(abs(SKEW.p * left - SKEW.q * right))
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 1e-3


def test_minimal_kernel_examples():
    assert kernels.minimal_bm_kernel(1.0, 0.7, 0.0) == 0.0
    assert kernels.minimal_bm_kernel(0.6, 0.3, 1.1) == pytest.approx(kernels.minimal_bm_kernel(0.6, 1.1, 0.3), rel=1e-14)
    surv = quad(lambda y: float(kernels.minimal_bm_kernel(1.0, 0.5, y)), 0, np.inf, epsabs=1e-13)[0]
    assert abs(surv - math.erf(0.5 / math.sqrt(2))) < 1e-8
    xs = np.linspace(0.01, 3, 20)
    assert np.all(kernels.minimal_bm_kernel(0.3, xs[:, None], xs[None, :]) > 0)
    with pytest.raises(ValueError):
        kernels.minimal_bm_kernel(1.0, -0.1, 0.5)
    with pytest.raises(ValueError):
        kernels.minimal_bm_kernel(0.0, 0.1, 0.5)


def test_minimal_evolution_far_from_zero_loses_nothing():
    # support beyond 6 sqrt(t) from 0, grid wide enough that nothing leaves it
    grid = Grid(20.0, 4000)
    psi = smooth(grid, center=-7.0, width=0.1)
    out = kernels.minimal_density_evolve(psi, 1.0)
    assert psi.mass() - out.mass() < 1e-8


def test_minimal_evolution_point_mass_survival():
    grid = Grid(8.0, 16000)
    values = np.zeros(grid.n_cells)
    values[grid.cell_of(0.5)] = 1.0 / grid.dx
    out = kernels.minimal_density_evolve(LineDensity(grid, values), 1.0)
    assert out.mass() == pytest.approx(math.erf(0.5 / math.sqrt(2)), abs=1e-3)
    assert math.erf(0.5 / math.sqrt(2)) == pytest.approx(0.3829, abs=1e-4)


def test_minimal_evolution_loss_matches_erf_integral():
    grid = Grid(8.0, 1600)
    psi = smooth(grid, center=0.3, width=0.8)
    out = kernels.minimal_density_evolve(psi, 0.9)
    assert out.mass() == pytest.approx(kernels.analytic_survival(psi, 0.9), abs=1e-6)
    assert kernels.minimal_density_evolve(psi, 0.0) is psi


def test_killed_resolvent_constant_and_zero():
    r = kernels.killed_resolvent_apply(np.ones_like, 0.5)
    assert r(np.array([1.0]))[0] == pytest.approx(2 * (1 - math.exp(-1)), abs=1e-9)
    f = lambda y: np.cos(3 * y) * np.exp(-0.2 * y)  # noqa: E731
    assert abs(kernels.killed_resolvent_apply(f, 1.7)(np.array([0.0]))[0]) < 1e-14
    with pytest.raises(ValueError):
        kernels.killed_resolvent_apply(f, 0.0)


def test_killed_resolvent_identity():
    f = lambda y: np.exp(-((y - 1.0) ** 2))  # noqa: E731
    lam, mu = 0.5, 1.0
    r_lam = kernels.killed_resolvent_apply(f, lam)
    r_mu = kernels.killed_resolvent_apply(f, mu)
    x = np.linspace(0.0, 4.0, 9)
    composed = kernels.killed_resolvent_apply(r_mu, lam)(x)
    assert np.max(np.abs(r_lam(x) - r_mu(x) - (mu - lam) * composed)) < 1e-6
