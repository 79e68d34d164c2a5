# Licensed under a 3-clause BSD style license - see LICENSE.rst
"""
End-to-end checks of the whole chain: free path law, lattice geometry,
renewal solvers, characteristic exponent and Monte Carlo transport.

Every check returns a `CheckResult`; `run_acceptance` runs them in order,
either at full size or with the reduced sizes of `QUICK_SIZES`.
"""
import time
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad, trapezoid
from scipy.stats import linregress
from astropy import log
from astropy.table import Table

from .exceptions import DomainError, HolegasError, NumericalError, UsageError
from .free_path import UPSILON_ZERO, p_dot, p_of_t, tabulate, upsilon
from .lattice import (LatticeConfig, direction_vectors, free_paths,
                      ks_distance, sample_empirical)
from .rate import asymptotic_diagnostics, find_xi
from .renewal import (RenewalKernel, age_density_closed_form,
                      collisionless_mass, convolution_powers, mu_solver,
                      solve_volterra)
from .transport import SimulationConfig, fit_rate, simulate, survivor_window

__all__ = ['CheckResult', 'AcceptanceSizes', 'FULL_SIZES', 'QUICK_SIZES',
           'run_acceptance', 'march_free_paths', 'relative_l1',
           'decay_shape', 'crossing_time', 'age_histogram_zscores',
           'results_table', 'check_pdist_table', 'check_rate_table']


@dataclass(frozen=True)
class CheckResult:
    """
    Outcome of one acceptance check.

    Attributes
    ----------
    number : int
        Position of the check in the suite
    name : str
    passed : bool
    value : float
        Measured quantity compared against ``threshold``
    threshold : float
    detail : str
        Human readable account of the comparison
    elapsed : float
        Wall time in seconds
    """
    number: int
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ''
    elapsed: float = 0.0

    def to_row(self):
        return dict(number=self.number, name=self.name,
                    passed=self.passed, value=self.value,
                    threshold=self.threshold, detail=self.detail,
                    elapsed=self.elapsed)


@dataclass(frozen=True)
class AcceptanceSizes:
    """
    Problem sizes of the suite.

    Attributes
    ----------
    volterra_step, volterra_horizon : float
        Grid of the solver equivalence check
    feller_step : float
        Step of the renewal solutions extrapolated to the Feller limit
    age_step : float
        Step of the age-structured density check (horizon 10)
    oracle_cases : int
        Random rays compared with the marching oracle
    path_samples : int
        Rays per epsilon in the free path homogenization check
    path_epsilons : tuple
        Coarse and fine lattice periods of that check
    particles : int
        Particles per Monte Carlo run of the decay check
    decay_epsilons : tuple
        Coarse and fine lattice periods of the decay check
    """
    volterra_step: float
    volterra_horizon: float
    feller_step: float
    age_step: float
    oracle_cases: int
    path_samples: int
    path_epsilons: tuple
    particles: int
    decay_epsilons: tuple


FULL_SIZES = AcceptanceSizes(volterra_step=1e-3, volterra_horizon=20.0,
                             feller_step=2e-3, age_step=0.01,
                             oracle_cases=1000, path_samples=10**6,
                             path_epsilons=(1e-2, 1e-3), particles=10**5,
                             decay_epsilons=(1e-2, 5e-3))

QUICK_SIZES = AcceptanceSizes(volterra_step=2e-3, volterra_horizon=10.0,
                              feller_step=4e-3, age_step=0.02,
                              oracle_cases=200, path_samples=10**5,
                              path_epsilons=(2e-2, 5e-3), particles=2 * 10**4,
                              decay_epsilons=(2e-2, 1e-2))


def _result(number, name, value, threshold, passed, detail):
    return CheckResult(number=number, name=name, passed=bool(passed),
                       value=float(value), threshold=float(threshold),
                       detail=detail)


def check_free_path_identities(context):
    """
    Normalizations at ``t=0`` and continuity of the density.
    """
    p0 = p_of_t(0.0)
    pd0 = p_dot(0.0)
    total = sum(quad(upsilon, a, b, epsabs=1e-12, epsrel=1e-12, limit=200)[0]
                for a, b in ((0, 0.5), (0.5, 1), (1, np.inf)))
    jumps = [abs(upsilon(c - 1e-8) - upsilon(c + 1e-8)) for c in (0.5, 1.0)]
    errors = dict(p0=(abs(p0 - 1), 1e-6), pdot0=(abs(pd0 + 2), 1e-4),
                  integral=(abs(total - 2), 1e-4),
                  continuity=(max(jumps), 1e-6))
    worst = max(errors, key=lambda k: errors[k][0] / errors[k][1])
    passed = all(err <= tol for err, tol in errors.values())
    detail = ('p(0)={0!r} pdot(0)={1!r} int(Upsilon)={2!r} max jump={3:.2e}'
              .format(p0, pd0, total, max(jumps)))
    return _result(1, 'free path identities', errors[worst][0],
                   errors[worst][1], passed, detail)


def check_tail_law(context):
    """
    :math:`t p(t) \\pi^2 \\to 1`, checked at ``t=100``.
    """
    gap = abs(100 * p_of_t(100.0) * np.pi**2 - 1)
    return _result(2, 'tail law', gap, 0.05, gap <= 0.05,
                   '|100 p(100) pi^2 - 1| = {0:.4f}'.format(gap))


def check_subcriticality(context):
    """
    Total kernel integral below one, and equal to its integrated-by-parts
    form.
    """
    dist = context['distribution']
    totals, gaps = [], []
    for sigma in (0.01, 0.1, 1, 10, 100):
        kernel = RenewalKernel(sigma, dist)
        totals.append(kernel.integral())
        gaps.append(abs(kernel.integral() - kernel.integral_by_parts()))
    passed = max(totals) < 1 and max(gaps) <= 1e-8
    return _result(3, 'kernel subcriticality', max(gaps), 1e-8, passed,
                   'max int(kappa)={0!r}, max identity gap={1:.2e}'
                   .format(max(totals), max(gaps)))


def check_root_contract(context):
    """
    :math:`-\\sigma < \\xi_\\sigma < 0` with a converged residual, and the
    quotient formula for :math:`\\xi_\\sigma`.
    """
    diag = asymptotic_diagnostics([0.1, 1, 10], threads=context['threads'])
    inside = all(r.log_lambda < np.log(r.sigma) and r.xi < 0
                 for r in diag.results)
    residual = max(r.residual for r in diag.results)
    quotient = float(np.max(diag.quotient_error))
    passed = inside and residual <= 1e-10 and quotient <= 1e-6
    detail = ', '.join('xi({0:g})={1:.10f}'.format(r.sigma, r.xi)
                       for r in diag.results)
    detail += '; max residual={0:.1e}, quotient gap={1:.1e}'.format(
        residual, quotient)
    return _result(4, 'root contract', residual, 1e-10, passed, detail)


def check_asymptotic_trends(context):
    """
    :math:`\\lambda_\\sigma/\\sigma \\to 0` as :math:`\\sigma \\to 0` and
    :math:`\\xi_\\sigma \\to -2` as :math:`\\sigma \\to \\infty`.
    """
    diag = asymptotic_diagnostics([0.01, 0.1, 1, 10, 100, 1000],
                                  threads=context['threads'])
    context['rates'] = {r.sigma: r for r in diag.results}
    gap = float(diag.xi_gap[-1])
    passed = diag.small_sigma_trend and diag.large_sigma_trend and gap <= 0.1
    detail = ('log(lambda/sigma)={0}, |xi+2|={1}'.format(
        np.round([r.log_lambda - np.log(r.sigma) for r in diag.results], 4),
        np.round(diag.xi_gap, 5)))
    return _result(5, 'asymptotic trends', gap, 0.1, passed, detail)


def _series_length(kernel, bound=1e-9):
    # sup of the n-th power is at most sigma * int(kappa)**(n - 1)
    total = kernel.integral()
    return int(np.ceil(np.log(bound * (1 - total) / kernel.sigma) /
                       np.log(total))) + 1


def check_solver_equivalence(context):
    """
    Marching solver against the partial sums of the convolution powers.
    """
    sizes = context['sizes']
    h, horizon = sizes.volterra_step, sizes.volterra_horizon
    gaps = []
    for sigma in (0.5, 1, 2):
        kernel = RenewalKernel(sigma, context['distribution'])
        marched = solve_volterra(kernel, h, horizon)
        summed = convolution_powers(kernel, _series_length(kernel), h,
                                    horizon)
        gaps.append(float(np.max(np.abs(marched.values - summed.values))))
    return _result(6, 'solver equivalence', max(gaps), 1e-6,
                   max(gaps) <= 1e-6,
                   'sup gaps for sigma=0.5, 1, 2: {0}'.format(
                       ['{0:.1e}'.format(g) for g in gaps]))


def check_feller_limit(context):
    """
    :math:`\\psi(t) e^{-\\xi_\\sigma t}` at ``t = 40/|xi|`` against its limit.
    """
    h = context['sizes'].feller_step
    errors, parts = [], []
    for sigma in (2, 10):
        rate = context.get('rates', {}).get(sigma) or find_xi(sigma)
        kernel = RenewalKernel(sigma, context['distribution'])
        curve = solve_volterra(kernel, h, 40 / abs(rate.xi))
        scaled = curve.values[-1] * np.exp(-rate.xi * curve.horizon)
        errors.append(abs(scaled / rate.feller_limit - 1))
        parts.append('sigma={0}: {1:.6f} vs {2:.6f}'.format(
            sigma, scaled, rate.feller_limit))
    return _result(7, 'Feller limit', max(errors), 0.01, max(errors) <= 0.01,
                   '; '.join(parts))


def check_age_structure(context):
    """
    Marginal of the age-structured density and its closed form.

    The solver's own marginal must match the renewal survival, and an
    independent Simpson quadrature of the density must match it up to the
    second order error of the trapezoid scheme.
    """
    h = context['sizes'].age_step
    kernel = RenewalKernel(1.0, context['distribution'])
    curve = solve_volterra(kernel, h, 10.0)
    grid = mu_solver(kernel, h, 10.0)
    survival = curve.survival()
    marginal_gap = float(np.max(np.abs(grid.marginal - survival)))
    quadrature_gap = float(np.max(np.abs(grid.quadrature_marginal() -
                                         survival)))
    t, s = np.meshgrid(grid.t_grid, grid.s_grid, indexing='ij')
    closed = 2 * np.pi * age_density_closed_form(t, s, curve)
    closed_gap = float(np.max(np.abs(closed - grid.values)))
    gap = max(marginal_gap, closed_gap)
    passed = gap <= 1e-5 and quadrature_gap <= 5 * h**2
    return _result(8, 'age structure', gap, 1e-5, passed,
                   'marginal gap={0:.1e}, closed form gap={1:.1e}, '
                   'quadrature gap={2:.1e} (bound {3:.1e})'.format(
                       marginal_gap, closed_gap, quadrature_gap, 5 * h**2))


def march_free_paths(positions, directions, config, tol=1e-13,
                     max_steps=100000):
    """
    Free path lengths by marching along the rays with steps equal to the
    distance to the nearest hole.

    Parameters
    ----------
    positions, directions : `~numpy.ndarray`
        Rays, shape ``(n, 2)``
    config : `~holegas.LatticeConfig`
    tol : float
        Stopping distance to a hole boundary, in lattice units
    max_steps : int

    Returns
    -------
    lengths : `~numpy.ndarray`
    """
    y = np.array(positions, dtype=float) / config.epsilon
    d = np.asarray(directions, dtype=float)
    radius = config.scaled_radius
    cap = config.t_cap / config.epsilon
    travelled = np.zeros(len(y))
    active = np.arange(len(y))
    for _ in range(max_steps):
        if not active.size:
            break
        offset = y[active] - np.round(y[active])
        gap = np.hypot(offset[:, 0], offset[:, 1]) - radius
        done = (gap < tol) | (travelled[active] >= cap)
        active = active[~done]
        step = gap[~done]
        y[active] += step[:, np.newaxis] * d[active]
        travelled[active] += step
    else:
        raise NumericalError('ray marching did not terminate',
                             dict(active=len(active), max_steps=max_steps))
    return config.epsilon * np.minimum(travelled, cap)


def check_geometry_oracle(context):
    """
    Exact traversal against the marching oracle, and channel directions.
    """
    n = context['sizes'].oracle_cases
    rng = np.random.default_rng(context['seed'])
    gaps, capped_ok = [], True
    for epsilon in (0.1, 0.05, 0.01):
        config = LatticeConfig(epsilon, t_cap=10.0)
        positions = epsilon * rng.random((n, 2))
        positions = positions[~config.in_hole(positions)]
        directions = direction_vectors(rng.uniform(0, 2 * np.pi,
                                                   len(positions)))
        exact = free_paths(positions, directions, config)
        marched = march_free_paths(positions, directions, config)
        gaps.append(float(np.max(np.abs(exact - marched))) / epsilon)

        channel = free_paths(np.array([[0.5, 0.0], [0.5, 0.5], [0.5, 0.0]]) *
                             epsilon,
                             np.array([[0, 1], [1, 0],
                                       [np.sqrt(0.5), np.sqrt(0.5)]]), config)
        capped_ok &= bool(np.all(channel == config.t_cap))
    return _result(9, 'geometry oracle', max(gaps), 1e-6,
                   max(gaps) <= 1e-6 and capped_ok,
                   'max gap / epsilon={0:.1e}, channels capped: {1}'.format(
                       max(gaps), capped_ok))


def check_free_path_homogenization(context):
    """
    Empirical free path law against its limit, for two lattice periods.
    """
    sizes = context['sizes']
    dist = context['distribution']
    gaps = []
    for epsilon in sizes.path_epsilons:
        tail = sample_empirical(LatticeConfig(epsilon), sizes.path_samples,
                                context['seed'], threads=context['threads'])
        gaps.append(ks_distance(tail, dist, t_range=(0.1, 10)))
    passed = gaps[-1] <= 0.02 and gaps[-1] < gaps[0]
    return _result(10, 'free path homogenization', gaps[-1], 0.02, passed,
                   'sup gaps for epsilon={0}: {1}'.format(
                       sizes.path_epsilons,
                       ['{0:.4f}'.format(g) for g in gaps]))


def relative_l1(t, values, reference):
    """
    :math:`\\int |f - g| / \\int |g|` by the trapezoid rule.
    """
    return float(trapezoid(np.abs(values - reference), t) /
                 trapezoid(np.abs(reference), t))


def decay_shape(curve, window):
    """
    Root-mean-square residuals of exponential and algebraic fits of a
    survival curve.

    Returns
    -------
    exponential, algebraic : float
        Residuals of the fits of ``log S`` against ``t`` and ``log t``
    """
    t0, t1 = window
    mask = (curve.t_grid >= t0) & (curve.t_grid <= t1)
    t = curve.t_grid[mask]
    log_s = np.log(curve.survival[mask])
    rms = []
    for x in (t, np.log(t)):
        fit = linregress(x, log_s)
        rms.append(float(np.sqrt(np.mean(
            (log_s - fit.intercept - fit.slope * x)**2))))
    return tuple(rms)


def crossing_time(t, values, reference):
    """
    First grid time from which ``values`` stays strictly below
    ``reference``.

    Returns
    -------
    time : float
        ``nan`` when the last value is not below the reference
    """
    t = np.asarray(t, dtype=float)
    above = np.flatnonzero(np.asarray(values) >= np.asarray(reference))
    if len(above) == 0:
        return float(t[0])
    if above[-1] == len(t) - 1:
        return np.nan
    return float(t[above[-1] + 1])


def age_histogram_zscores(curve, checkpoint, renewal, model_tolerance=0.0,
                          n_sub=21):
    """
    Standardized gaps between a Monte Carlo age histogram and the closed
    form age density of the renewal solution.

    Parameters
    ----------
    curve : `~holegas.SurvivalCurve`
        Run with an age histogram at ``checkpoint`` and exponential initial
        ages
    checkpoint : float
    renewal : `~holegas.MassCurve`
        Renewal solution with the same collision frequency, reaching at
        least ``checkpoint``
    model_tolerance : float
        Relative error allowed to the closed form on top of the binomial
        error of the counts
    n_sub : int
        Points per bin of the trapezoid average of the density

    Returns
    -------
    centers, z : `~numpy.ndarray`
        Bin centers and z-scores of the bins with a positive expected count
    """
    edges, counts = curve.age_histograms[checkpoint]
    probability = np.empty(len(counts))
    for i, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        s = np.linspace(a, b, n_sub)
        density = 2 * np.pi * age_density_closed_form(checkpoint, s, renewal)
        probability[i] = trapezoid(density, s)
    n = curve.n_particles
    expected = n * probability
    variance = (n * probability * (1 - probability) +
                (model_tolerance * expected)**2)
    keep = expected > 0
    centers = 0.5 * (edges[1:] + edges[:-1])
    return centers[keep], (counts[keep] - expected[keep]) / np.sqrt(
        variance[keep])


def check_end_to_end_decay(context):
    """
    Monte Carlo survival against the renewal prediction, its decay rate,
    its age histogram, its independence of the initial ages and the
    collisionless contrast.
    """
    sizes = context['sizes']
    seed, threads = context['seed'], context['threads']
    distribution = context['distribution']
    kernel = RenewalKernel(1.0, distribution)
    renewal = solve_volterra(kernel, 0.01, 20.0)
    rate = context.get('rates', {}).get(1.0) or find_xi(1.0)

    def run(epsilon, **kwargs):
        params = dict(sigma=1.0, lattice=LatticeConfig(epsilon),
                      n_particles=sizes.particles, horizon=10.0)
        params.update(kwargs)
        return simulate(SimulationConfig(**params), seed, threads=threads)

    l1 = []
    for epsilon in sizes.decay_epsilons:
        curve = run(epsilon, checkpoints=(2.0,), age_bins=20)
        l1.append(relative_l1(curve.t_grid, curve.survival,
                              renewal(curve.t_grid) / kernel.sigma))
    l1_ok = l1[-1] <= 0.15 and l1[-1] < l1[0]

    fine = sizes.decay_epsilons[-1]
    fit = fit_rate(curve, survivor_window(curve, 4.0))
    slope_gap = abs(fit.slope - rate.xi)
    slope_ok = slope_gap <= max(3 * fit.stderr, 0.15 * abs(rate.xi))

    _, z = age_histogram_zscores(curve, 2.0, renewal, model_tolerance=0.05)
    histogram_ok = bool(np.max(np.abs(z)) <= 4)

    fresh = run(fine, initial_age='zero')
    spread = np.abs(fresh.survival - curve.survival)
    noise = np.hypot(fresh.stderr, curve.stderr)
    ages_ok = bool(np.all(spread <= 3 * noise + 1e-12))

    # each curve must be better described by its own decay law
    free = run(fine, sigma=0.0)
    free_exp, free_alg = decay_shape(free, survivor_window(free, 2.0))
    coll_exp, coll_alg = decay_shape(curve, survivor_window(curve, 2.0))
    shape_ok = free_alg < free_exp and coll_exp < coll_alg

    # and the collisional curve ends up below the collisionless one
    homogenized = crossing_time(renewal.times, renewal.survival(),
                                collisionless_mass(renewal.times,
                                                   distribution))
    simulated = crossing_time(curve.t_grid, curve.survival, free.survival)
    crossing_ok = homogenized < 20 and simulated < curve.t_grid[-1]

    passed = (l1_ok and slope_ok and histogram_ok and ages_ok and shape_ok and
              crossing_ok)
    detail = ('relative L1={0}; slope={1:.4f}+-{2:.4f} vs xi={3:.4f}; '
              'age histogram max |z|={4:.2f}; initial ages max '
              'spread/noise={5:.2f}; sigma=0 rms exp={6:.3f} alg={7:.3f}, '
              'sigma=1 rms exp={8:.3f} alg={9:.3f}; crossing below sigma=0 '
              'at t={10:.2f} (renewal), t={11:.2f} (Monte Carlo)'.format(
                  ['{0:.4f}'.format(v) for v in l1], fit.slope, fit.stderr,
                  rate.xi, float(np.max(np.abs(z))),
                  float(np.max(spread / np.maximum(noise, 1e-300))),
                  free_exp, free_alg, coll_exp, coll_alg, homogenized,
                  simulated))
    return _result(11, 'end-to-end decay', l1[-1], 0.15, passed, detail)


_CHECKS = (check_free_path_identities, check_tail_law, check_subcriticality,
           check_root_contract, check_asymptotic_trends,
           check_solver_equivalence, check_feller_limit, check_age_structure,
           check_geometry_oracle, check_free_path_homogenization,
           check_end_to_end_decay)


def run_acceptance(quick=False, seed=0, threads=None, only=None):
    """
    Run the acceptance checks.

    Parameters
    ----------
    quick : bool
        Use `QUICK_SIZES` instead of `FULL_SIZES`
    seed : int
        Seed of the random checks
    threads : int, optional
        Worker threads of the Monte Carlo and sweep checks
    only : iterable of int, optional
        Numbers of the checks to run, by default all of them

    Returns
    -------
    results : list of `CheckResult`
        A check that raises reports ``passed=False`` with the error message
    """
    context = dict(sizes=QUICK_SIZES if quick else FULL_SIZES, seed=seed,
                   threads=threads, distribution=tabulate())
    wanted = set(only) if only is not None else None
    results = []
    for number, check in enumerate(_CHECKS, start=1):
        if wanted is not None and number not in wanted:
            continue
        start = time.perf_counter()
        try:
            result = check(context)
        except HolegasError as exc:
            result = CheckResult(number=number,
                                 name=check.__name__[len('check_'):]
                                 .replace('_', ' '),
                                 passed=False, value=np.nan,
                                 threshold=np.nan,
                                 detail='{0}: {1}'.format(
                                     type(exc).__name__, exc))
        result = CheckResult(**dict(result.to_row(),
                                    elapsed=time.perf_counter() - start))
        log.info('[{0}] {1} {2}: {3}'.format(
            'PASS' if result.passed else 'FAIL', result.number, result.name,
            result.detail))
        results.append(result)
    return results


def results_table(results):
    """
    Table of `CheckResult` rows.
    """
    return Table(rows=[r.to_row() for r in results],
                 names=('number', 'name', 'passed', 'value', 'threshold',
                        'detail', 'elapsed'))


def check_pdist_table(table):
    """
    Re-verify a table written by ``holegas pdist``.

    The table is recomputed on the same grid and compared at ``1e-10``; the
    density column must be constant on ``(0, 1/2]``.

    Returns
    -------
    result : `CheckResult`
    """
    for name in ('t', 'p', 'pdot', 'upsilon'):
        if name not in table.colnames:
            raise UsageError('pdist table lacks the {0!r} column'.format(name))
    t = np.asarray(table['t'], dtype=float)
    steps = np.diff(t)
    if t[0] != 0 or len(t) < 2 or not np.allclose(steps, steps[0],
                                                  rtol=1e-9, atol=0):
        raise DomainError('pdist table grid must be uniform from t=0')
    fresh = tabulate(t_max=t[-1], n_points=len(t), validate=False)
    gap = max(float(np.max(np.abs(fresh.p_values - table['p']))),
              float(np.max(np.abs(fresh.pdot_values - table['pdot']))))
    head = (t > 0) & (t <= 0.5)
    flat = float(np.max(np.abs(np.asarray(table['upsilon'])[head] -
                               UPSILON_ZERO), initial=0))
    passed = (gap <= 1e-10 and flat <= 1e-15 and
              abs(table['p'][0] - 1) <= 1e-6)
    return _result(0, 'pdist table', gap, 1e-10, passed,
                   'max gap={0:.1e}, Upsilon on (0, 1/2] off by {1:.1e}'
                   .format(gap, flat))


def check_rate_table(table):
    """
    Re-verify a table written by ``holegas rate``.

    Returns
    -------
    result : `CheckResult`
    """
    for name in ('sigma', 'xi', 'log_lambda', 'residual'):
        if name not in table.colnames:
            raise UsageError('rate table lacks the {0!r} column'.format(name))
    sigma = np.asarray(table['sigma'], dtype=float)
    xi = np.asarray(table['xi'], dtype=float)
    inside = bool(np.all((xi < 0) &
                         (np.asarray(table['log_lambda']) < np.log(sigma))))
    fresh = [find_xi(s) for s in sigma]
    gap = max(abs(r.xi - x) for r, x in zip(fresh, xi))
    residual = float(np.max(table['residual']))
    passed = inside and residual <= 1e-10 and gap <= 1e-9
    return _result(0, 'rate table', residual, 1e-10, passed,
                   'xi reproduced within {0:.1e}, inside (-sigma, 0): {1}'
                   .format(gap, inside))
