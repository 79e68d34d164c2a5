import numpy as np
import pytest

from ..acceptance import crossing_time
from ..exceptions import DomainError, UnderResolvedWarning
from ..rate import find_xi
from ..renewal import (MassCurve, RenewalKernel, age_density_closed_form,
                       b_coefficient, collisionless_mass, convolution_powers,
                       kernel_eval, mu_solver, solve_volterra)


@pytest.fixture(scope='module')
def unit_kernel(distribution):
    return RenewalKernel(1.0, distribution)


@pytest.fixture(scope='module')
def unit_curve(unit_kernel):
    return solve_volterra(unit_kernel, 0.01, 5.0)


def test_kernel_values(unit_kernel, distribution):
    assert kernel_eval(unit_kernel, -0.5) == 0
    assert kernel_eval(unit_kernel, 0.0) == pytest.approx(1, rel=1e-6)
    t = np.linspace(0, 10, 11)
    np.testing.assert_allclose(kernel_eval(unit_kernel, t),
                               np.exp(-t) * distribution.p(t))


@pytest.mark.parametrize("sigma", [0, -1])
def test_kernel_needs_positive_sigma(sigma, distribution):
    with pytest.raises(DomainError):
        RenewalKernel(sigma, distribution)


@pytest.mark.parametrize("sigma", [0.1, 1, 10])
def test_kernel_integral(sigma, distribution):
    kernel = RenewalKernel(sigma, distribution)
    total = kernel.integral()
    assert 0 < total < 1
    assert total == pytest.approx(kernel.integral_by_parts(), abs=1e-9)


def test_initial_value(distribution):
    for sigma in (0.5, 2.0):
        curve = solve_volterra(RenewalKernel(sigma, distribution), 0.01, 1.0)
        assert curve.psi[0] == pytest.approx(sigma, rel=1e-6)
        assert curve.survival()[0] == pytest.approx(1, rel=1e-6)
        assert np.all(curve.psi >= 0)


def test_grid(unit_curve):
    assert len(unit_curve.values) == 501
    assert unit_curve.horizon == pytest.approx(5.0)
    assert unit_curve.sigma == 1.0
    assert unit_curve(unit_curve.times[7]) == pytest.approx(
        unit_curve.values[7])
    with pytest.raises(DomainError):
        unit_curve(5.5)
    with pytest.raises(DomainError):
        unit_curve(-0.1)


def test_solvers_agree(unit_kernel, unit_curve):
    summed = convolution_powers(unit_kernel, 60, 0.01, 5.0)
    np.testing.assert_allclose(summed.values, unit_curve.values, atol=1e-10)
    assert np.all(np.diff(summed.term_norms[:20]) < 0)


def test_fft_matches_direct_convolution(unit_kernel):
    fast = convolution_powers(unit_kernel, 20, 0.02, 4.0, method='fft')
    slow = convolution_powers(unit_kernel, 20, 0.02, 4.0, method='direct')
    np.testing.assert_allclose(fast.values, slow.values, atol=1e-12)


def test_convolution_arguments(unit_kernel):
    with pytest.raises(DomainError):
        convolution_powers(unit_kernel, 0, 0.01, 1.0)
    with pytest.raises(DomainError):
        convolution_powers(unit_kernel, 3, 0.01, 1.0, method='spline')


def test_first_power_is_the_kernel(unit_kernel):
    curve = convolution_powers(unit_kernel, 1, 0.05, 2.0)
    np.testing.assert_allclose(curve.values, unit_kernel.sample(0.05, 40))


@pytest.mark.parametrize("h, T", [(0, 1), (-0.1, 1), (0.1, 0.01)])
def test_step_and_horizon(unit_kernel, h, T):
    with pytest.raises(DomainError):
        solve_volterra(unit_kernel, h, T)


def test_coarse_steps(distribution):
    kernel = RenewalKernel(10.0, distribution)
    with pytest.raises(DomainError):
        solve_volterra(kernel, 0.2, 1.0)
    with pytest.warns(UnderResolvedWarning):
        solve_volterra(kernel, 0.15, 1.0)


def test_psi_integral(distribution):
    kernel = RenewalKernel(1.0, distribution)
    curve = solve_volterra(kernel, 0.01, 20.0)
    assert curve.integral() == pytest.approx(kernel.psi_integral(), rel=1e-3)


def test_mass_scaling(unit_curve):
    curve = MassCurve(unit_curve.step, unit_curve.values, scale=3.0,
                      kernel=unit_curve.kernel)
    np.testing.assert_allclose(curve.mass(),
                               3 * unit_curve.values / (2 * np.pi))
    table = curve.to_table(mass=True)
    assert table.colnames == ['t', 'psi', 'survival', 'M']


def test_feller_limit(distribution):
    sigma = 2.0
    rate = find_xi(sigma)
    curve = solve_volterra(RenewalKernel(sigma, distribution), 2e-3,
                           40 / abs(rate.xi))
    scaled = curve.values[-1] * np.exp(-rate.xi * curve.horizon)
    assert scaled == pytest.approx(rate.feller_limit, rel=0.01)


@pytest.fixture(scope='module')
def age_grid(unit_kernel):
    return mu_solver(unit_kernel, 0.01, 5.0)


def test_marginal_matches_renewal_solution(age_grid, unit_curve):
    np.testing.assert_allclose(age_grid.marginal, unit_curve.survival(),
                               rtol=1e-6)
    assert age_grid.marginal[0] == 1


def test_age_density_closed_form(age_grid, unit_curve):
    t, s = np.meshgrid(age_grid.t_grid[::10], age_grid.s_grid[::10],
                       indexing='ij')
    closed = 2 * np.pi * age_density_closed_form(t, s, unit_curve)
    np.testing.assert_allclose(closed, age_grid.values[::10, ::10],
                               rtol=1e-6, atol=1e-12)


def test_closed_form_domain(unit_curve):
    with pytest.raises(DomainError):
        age_density_closed_form(1.0, -1.0, unit_curve)
    with pytest.raises(DomainError):
        age_density_closed_form(6.0, 1.0, unit_curve)


def test_age_density_bounds(age_grid):
    assert np.all(age_grid.values >= 0)
    assert np.all(age_grid.values <= age_grid.upper_bound() * (1 + 1e-9))


def test_quadrature_marginal(unit_kernel, age_grid, unit_curve):
    # an integral of the density over ages, independent of the marching
    fine = np.max(np.abs(age_grid.quadrature_marginal() -
                         unit_curve.survival()))
    assert fine <= 5 * age_grid.step**2
    coarse_grid = mu_solver(unit_kernel, 0.02, 5.0)
    coarse_curve = solve_volterra(unit_kernel, 0.02, 5.0)
    coarse = np.max(np.abs(coarse_grid.quadrature_marginal() -
                           coarse_curve.survival()))
    assert coarse > 2 * fine


def test_transport_residual(age_grid):
    assert age_grid.transport_residual() <= 50 * age_grid.step


def test_age_table(unit_kernel):
    grid = mu_solver(unit_kernel, 0.1, 1.0, s_max=2.0)
    assert grid.values.shape == (11, 21)
    table = grid.to_table()
    assert len(table) == 11 * 21
    assert table.colnames == ['t', 's', 'mu']


def test_custom_initial_ages(unit_kernel, distribution):
    grid = mu_solver(unit_kernel, 0.01, 2.0,
                     initial_density=lambda s: 2 * np.exp(-2 * s))
    assert grid.marginal[0] == pytest.approx(1)
    t = grid.t_grid[50]
    assert grid.values[50, 100] == pytest.approx(
        2 * np.exp(-2 * (grid.s_grid[100] - t)) * np.exp(-t) *
        distribution.p(t))
    with pytest.raises(DomainError):
        mu_solver(unit_kernel, 0.01, 1.0, initial_density=lambda s: -s)


def test_loss_rate(distribution):
    t = np.linspace(0, 10, 21)
    rate = b_coefficient(t[:, np.newaxis], t[np.newaxis, :], distribution,
                         1.5)
    assert np.all(rate >= 1.5)
    assert b_coefficient(0, 0, distribution, 1.0) == pytest.approx(3,
                                                                   rel=1e-4)
    with pytest.raises(DomainError):
        b_coefficient(-1, 2, distribution, 1.0)


def test_collisionless_mass(distribution):
    t = np.linspace(0, 20, 41)
    np.testing.assert_array_equal(collisionless_mass(t, distribution),
                                  distribution.p(t))


def test_second_order_convergence(unit_kernel):
    coarse, mid, fine = (solve_volterra(unit_kernel, h, 5.0).values
                         for h in (0.04, 0.02, 0.01))
    mid, fine = mid[::2], fine[::4]
    smooth = np.arange(len(coarse)) * 0.04 >= 2
    ratio = (np.max(np.abs(coarse - mid)[smooth]) /
             np.max(np.abs(mid - fine)[smooth]))
    assert 3.5 <= ratio <= 4.5


@pytest.mark.parametrize("sigma", [0.5, 1.0, 2.0])
def test_psi_bounded_by_sigma(sigma, distribution):
    curve = solve_volterra(RenewalKernel(sigma, distribution), 0.01, 10.0)
    assert np.all(curve.values <= sigma * (1 + 1e-6))
    assert curve.values[0] == pytest.approx(sigma, rel=1e-6)


def test_power_norms_decay_geometrically(unit_kernel):
    summed = convolution_powers(unit_kernel, 20, 0.01, 20.0)
    total = unit_kernel.integral()
    n = np.arange(1, 21)
    assert np.all(summed.term_norms <= (total * (1 + 2e-4))**n)


def test_partial_sum_tail(unit_kernel):
    short = convolution_powers(unit_kernel, 100, 0.01, 10.0)
    long = convolution_powers(unit_kernel, 200, 0.01, 10.0)
    # each convolution with the sampled kernel scales the sup norm by at
    # most the trapezoid mass of the kernel
    rho = short.term_norms[0]
    peak = np.max(unit_kernel.sample(0.01, 1000))
    assert rho < 1
    assert np.max(np.abs(long.values - short.values)) <= (
        rho**100 / (1 - rho) * peak)


def test_collisions_end_below_the_collisionless_curve(unit_kernel,
                                                      distribution):
    curve = solve_volterra(unit_kernel, 0.01, 20.0)
    reference = collisionless_mass(curve.times, distribution)
    crossing = crossing_time(curve.times, curve.survival(), reference)
    assert 0 <= crossing < 20
    assert curve.survival()[-1] < reference[-1]
