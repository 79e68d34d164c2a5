import numpy as np
import pytest
from scipy.integrate import quad

from .. import conf
from ..exceptions import DomainError, NumericalError
from ..free_path import (UPSILON_ZERO, PathDistribution, UpsilonEvaluator,
                         laplace_p, laplace_pdot, laplace_tp, p_dot, p_of_t,
                         p_series, pdot_series, tabulate, upsilon,
                         upsilon_tail_coefficient)


def test_upsilon_constant_branch():
    t = np.linspace(1e-6, 0.5, 101)
    assert upsilon(0.25) == 24 / np.pi**2
    assert np.all(upsilon(t) == UPSILON_ZERO)


@pytest.mark.parametrize("t, delta, tol", [
    (0.5, 1e-5, 1e-6),
    (0.5, 1e-10, 1e-9),
    (1.0, 1e-10, 1e-9),
])
def test_upsilon_continuity(t, delta, tol):
    assert abs(upsilon(t - delta) - upsilon(t + delta)) <= tol


@pytest.mark.parametrize("t", [0.5 + 1e-3, 1 - 1e-3, 1 + 1e-3])
def test_series_windows_match_closed_form(t):
    narrow = UpsilonEvaluator(singular_switch_width=1e-4)
    wide = UpsilonEvaluator(singular_switch_width=5e-3)
    assert abs(narrow(t) - wide(t)) < 1e-12


def test_large_time_expansion_matches_closed_form():
    t = np.linspace(4, 8, 41)
    direct = UpsilonEvaluator(series_threshold=100)
    np.testing.assert_allclose(upsilon(t), direct(t), rtol=1e-10)


def test_upsilon_nonnegative():
    t = np.logspace(-3, 4, 2000)
    assert np.all(upsilon(t) >= 0)


@pytest.mark.parametrize("t", [0, -1, np.nan])
def test_upsilon_domain(t):
    with pytest.raises(DomainError):
        upsilon(t)


def test_upsilon_evaluator_arguments():
    with pytest.raises(DomainError):
        UpsilonEvaluator(singular_switch_width=0.3)
    with pytest.raises(DomainError):
        UpsilonEvaluator(series_threshold=1)


def test_upsilon_integral():
    total = sum(quad(upsilon, a, b, epsabs=1e-12, epsrel=1e-12, limit=200)[0]
                for a, b in ((0, 0.5), (0.5, 1), (1, np.inf)))
    assert abs(total - 2) <= 1e-6


def test_upsilon_tail_coefficient():
    # leading term of the large-time expansion
    assert upsilon_tail_coefficient() == pytest.approx(2 / np.pi**2,
                                                       rel=1e-3)


def test_normalizations():
    assert abs(p_of_t(0) - 1) <= 1e-6
    assert abs(p_dot(0) + 2) <= 1e-4


def test_constant_branch_closed_forms():
    t = np.array([0.1, 0.25, 0.5])
    np.testing.assert_allclose(p_dot(t), -2 + t * UPSILON_ZERO, atol=1e-8)
    np.testing.assert_allclose(p_of_t(t), 1 - 2 * t + UPSILON_ZERO * t**2 / 2,
                               atol=1e-8)


def test_tail_law():
    assert abs(100 * p_of_t(100) * np.pi**2 - 1) <= 0.05
    assert -2e-3 <= p_dot(100) < 0


@pytest.mark.parametrize("t", [-1e-3, -1])
def test_negative_times(t):
    with pytest.raises(DomainError):
        p_of_t(t)
    with pytest.raises(DomainError):
        p_dot(t)


@pytest.mark.parametrize("t", [2, 5, 20, 300])
def test_series_matches_quadrature(t):
    assert p_series(t) == pytest.approx(p_of_t(t), abs=1e-9)
    assert pdot_series(t) == pytest.approx(p_dot(t), abs=1e-9)


def test_tail_cutoff_is_configurable():
    with conf.set_temp('tail_cutoff', 1e3):
        assert abs(p_of_t(0) - 1) <= 1e-6
        assert p_of_t(10) == pytest.approx(p_series(10), rel=1e-5)


def test_tabulate_matches_direct_quadrature(distribution):
    index = np.array([0, 37, 50, 100, 370, 2000])
    t = distribution.grid[index]
    np.testing.assert_allclose(distribution.p_values[index], p_of_t(t),
                               atol=1e-10)
    np.testing.assert_allclose(distribution.pdot_values[index], p_dot(t),
                               atol=1e-10)


def test_tabulate_shape(distribution):
    p = distribution.p_values
    assert len(distribution.grid) == 2001
    assert distribution.t_max == 20
    assert abs(p[0] - 1) <= 1e-6
    assert np.all(np.diff(p) < 0)
    assert np.all(np.diff(p, 2) >= -1e-9)
    assert np.all((p > 0) & (p <= 1 + 1e-6))
    assert np.all(distribution.pdot_values <= 0)
    distribution.validate()


def test_finite_differences_match_derivative(distribution):
    h = distribution.step
    fd = (distribution.p_values[2:] - distribution.p_values[:-2]) / (2 * h)
    gap = np.abs(fd - distribution.pdot_values[1:-1])
    assert gap.max() <= max(1e-4, 10 * h**2)


def test_tail_coefficient(distribution):
    assert distribution.tail_coefficient == pytest.approx(1 / np.pi**2,
                                                          rel=0.01)


def test_inverse_t_bounds(distribution):
    c_lower, c_upper = distribution.inverse_t_bounds()
    assert 0 < c_lower <= 10 * p_of_t(10) <= c_upper
    assert c_upper < 1
    with pytest.raises(DomainError):
        distribution.inverse_t_bounds(t_min=30)


def test_interpolation_is_monotone(distribution):
    t = np.linspace(0, 20, 20011)
    p = distribution.p(t)
    assert np.all(np.diff(p) <= 0)
    assert np.all((p > 0) & (p <= 1 + 1e-6))


def test_beyond_the_table(distribution):
    assert distribution.p(50.0) == pytest.approx(p_of_t(50), abs=1e-9)
    assert distribution.pdot(50.0) == pytest.approx(p_dot(50), abs=1e-9)
    assert distribution(np.array([10.0, 50.0])).shape == (2,)
    with pytest.raises(DomainError):
        distribution.p(-1.0)


def test_short_table_uses_quadrature():
    dist = tabulate(t_max=1, n_points=101)
    assert dist.p(1.5) == pytest.approx(p_of_t(1.5), abs=1e-10)


def test_to_table(distribution):
    table = distribution.to_table()
    assert table.colnames == ['t', 'p', 'pdot', 'upsilon']
    assert table['upsilon'][0] == UPSILON_ZERO
    assert table['p'][0] == distribution.p_values[0]


@pytest.mark.parametrize("t_max, n_points", [(0, 10), (-1, 10), (5, 1)])
def test_tabulate_arguments(t_max, n_points):
    with pytest.raises(DomainError):
        tabulate(t_max=t_max, n_points=n_points)


def test_validate_flags_bad_tables():
    grid = np.linspace(0, 1, 5)
    dist = PathDistribution(grid, [1, 0.8, 0.7, 0.75, 0.5],
                            -2 * np.ones(5), 0.1)
    with pytest.raises(NumericalError) as exc:
        dist.validate()
    assert 'first_increase_at' in exc.value.diagnostics


@pytest.mark.parametrize("lam", [1e-3, 0.1, 1, 10, 1e3])
def test_laplace_integration_by_parts(lam):
    # lambda L[p] - L[pdot] = p(0)
    u = np.log(lam)
    assert lam * laplace_p(u) - laplace_pdot(u) == pytest.approx(1, abs=1e-9)


@pytest.mark.parametrize("lam", [0.01, 1, 10])
def test_laplace_tp_is_derivative(lam):
    du = 1e-4
    u = np.log(lam)
    derivative = (laplace_p(u + du) - laplace_p(u - du)) / (2 * du)
    assert -derivative / lam == pytest.approx(np.exp(laplace_tp(u)),
                                              rel=1e-6)


def test_laplace_small_rates():
    # the integral of t p(t) exp(-lambda t) grows like 1/(pi^2 lambda)
    u = -200.0
    assert laplace_tp(u) + u == pytest.approx(-np.log(np.pi**2), abs=1e-2)
    assert np.isfinite(laplace_p(u))
