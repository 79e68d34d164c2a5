# Licensed under a 3-clause BSD style license - see LICENSE.rst
"""
Characteristic decay exponent of the renewal equation.

The exponent :math:`\\xi_\\sigma` is the root of

.. math::

    L[\\kappa](\\xi) = \\int_0^\\infty \\sigma e^{-(\\sigma + \\xi) t} p(t) dt = 1,

and the renewal solution behaves like
:math:`\\psi(t) \\sim e^{\\xi_\\sigma t} / \\int_0^\\infty t \\kappa(t)
e^{-\\xi_\\sigma t} dt`. Every computation is carried out in terms of
:math:`u = \\log\\lambda`, :math:`\\lambda = \\sigma + \\xi`, because
:math:`\\lambda_\\sigma` is exponentially small for small :math:`\\sigma`.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from astropy import log
from astropy.table import Table

from . import conf
from .exceptions import DomainError, NumericalError
from .free_path import laplace_p, laplace_pdot, laplace_tp
from .utils.streams import resolve_threads

__all__ = ['RateResult', 'RateDiagnostics', 'laplace_kappa',
           'laplace_kappa_log', 'find_xi', 'c_sigma',
           'asymptotic_diagnostics']

# Lowest log(lambda) explored when bracketing the root
_LOG_LAMBDA_FLOOR = -1e5


@dataclass(frozen=True)
class RateResult:
    """
    Characteristic exponent of the renewal equation at one collision
    frequency.

    Attributes
    ----------
    sigma : float
        Collision frequency
    xi : float
        Characteristic exponent :math:`\\xi_\\sigma`
    log_lambda : float
        :math:`\\log(\\sigma + \\xi_\\sigma)`
    residual : float
        :math:`|L[\\kappa](\\xi_\\sigma) - 1|`
    log_tp_integral : float
        :math:`\\log \\int_0^\\infty t p(t) e^{-\\lambda_\\sigma t} dt`
    bracket : tuple
        Final bracket in :math:`\\log\\lambda`
    n_iterations : int
        Number of bisection steps
    """
    sigma: float
    xi: float
    log_lambda: float
    residual: float
    log_tp_integral: float
    bracket: tuple = field(default=(np.nan, np.nan))
    n_iterations: int = 0

    @property
    def lam(self):
        """
        :math:`\\lambda_\\sigma = \\sigma + \\xi_\\sigma` (may underflow to 0).
        """
        return float(np.exp(self.log_lambda))

    @property
    def log_c_multiplier(self):
        """
        Logarithm of `c_multiplier`.
        """
        return -np.log(2 * np.pi * self.sigma**2) - self.log_tp_integral

    @property
    def c_multiplier(self):
        """
        Amplitude :math:`C_\\sigma` of :math:`M(t) \\sim C_\\sigma
        e^{\\xi_\\sigma t}` per unit initial mass.
        """
        return float(np.exp(self.log_c_multiplier))

    @property
    def feller_limit(self):
        """
        :math:`\\lim \\psi(t) e^{-\\xi_\\sigma t} =
        1 / \\int_0^\\infty t \\kappa(t) e^{-\\xi_\\sigma t} dt`.
        """
        return float(np.exp(-np.log(self.sigma) - self.log_tp_integral))

    def to_row(self):
        return dict(sigma=self.sigma, xi=self.xi, log_lambda=self.log_lambda,
                    residual=self.residual, c_multiplier=self.c_multiplier)


def _laplace_options(sigma, evaluator, t_cut, tol):
    if tol is None:
        tol = conf.laplace_tolerance / max(sigma, 1.0)
    return dict(evaluator=evaluator, t_cut=t_cut, tol=tol)


def laplace_kappa_log(sigma, log_lam, evaluator=None, t_cut=None, tol=None):
    """
    :math:`\\sigma \\int_0^\\infty e^{-\\lambda t} p(t) dt` as a function of
    :math:`\\log\\lambda`.
    """
    return sigma * laplace_p(log_lam, **_laplace_options(sigma, evaluator,
                                                         t_cut, tol))


def laplace_kappa(sigma, xi, evaluator=None, t_cut=None, tol=None):
    """
    Laplace transform :math:`L[\\kappa](\\xi)` of the renewal kernel.

    Parameters
    ----------
    sigma : float
        Collision frequency, positive
    xi : float
        Exponent, larger than ``-sigma``
    evaluator : `~holegas.UpsilonEvaluator`, optional
    t_cut : float, optional
        Cutoff time of the quadrature, by default ``conf.tail_cutoff``
    tol : float, optional
        Absolute quadrature tolerance, by default
        ``conf.laplace_tolerance / max(sigma, 1)``

    Returns
    -------
    value : float
        Strictly decreasing in ``xi``
    """
    sigma = _check_sigma(sigma)
    if not xi > -sigma:
        raise DomainError('the transform diverges for xi <= -sigma '
                          '(xi={0}, sigma={1})'.format(xi, sigma))
    return laplace_kappa_log(sigma, np.log(sigma + xi), evaluator, t_cut, tol)


def _check_sigma(sigma):
    sigma = float(sigma)
    if not sigma > 0 or not np.isfinite(sigma):
        raise DomainError('sigma must be positive, got {0}'.format(sigma))
    return sigma


def find_xi(sigma, evaluator=None, t_cut=None, tol=None, width=1e-12):
    """
    Characteristic exponent :math:`\\xi_\\sigma`.

    The root is bracketed in :math:`u = \\log\\lambda` between
    :math:`\\log\\sigma` (where the transform is the total kernel integral,
    below one) and :math:`\\log(10^{-6}\\sigma)`, extended downwards until
    the transform exceeds one. It is then bisected to ``width`` and polished
    with one secant step.

    Parameters
    ----------
    sigma : float
        Collision frequency, positive
    evaluator : `~holegas.UpsilonEvaluator`, optional
    t_cut : float, optional
    tol : float, optional
        Quadrature tolerance, see `~holegas.laplace_kappa`
    width : float
        Final bracket width in :math:`\\log\\lambda`

    Returns
    -------
    result : `~holegas.RateResult`

    Raises
    ------
    NumericalError
        If the root cannot be bracketed
    """
    sigma = _check_sigma(sigma)

    def excess(u):
        return laplace_kappa_log(sigma, u, evaluator, t_cut, tol) - 1

    u_hi = np.log(sigma)
    f_hi = excess(u_hi)
    if not f_hi < 0:
        raise NumericalError('kernel integral is not below one',
                             dict(sigma=sigma, integral=f_hi + 1))
    u_lo = np.log(1e-6 * sigma)
    f_lo = excess(u_lo)
    step = 10.0
    while not f_lo > 0:
        u_hi, f_hi = u_lo, f_lo
        u_lo -= step
        step *= 2
        if u_lo < _LOG_LAMBDA_FLOOR:
            raise NumericalError('failed to bracket the characteristic '
                                 'exponent', dict(sigma=sigma, log_lambda=u_hi,
                                                  excess=f_hi))
        f_lo = excess(u_lo)
        log.debug('extended bracket for sigma={0} to log(lambda)={1}'
                  .format(sigma, u_lo))

    n_iter = 0
    while u_hi - u_lo > width:
        u_mid = 0.5 * (u_lo + u_hi)
        if u_mid in (u_lo, u_hi):
            break
        f_mid = excess(u_mid)
        if f_mid > 0:
            u_lo, f_lo = u_mid, f_mid
        else:
            u_hi, f_hi = u_mid, f_mid
        n_iter += 1

    u_root, f_root = (u_lo, f_lo) if abs(f_lo) < abs(f_hi) else (u_hi, f_hi)
    if f_lo != f_hi:
        u_sec = u_hi - f_hi * (u_hi - u_lo) / (f_hi - f_lo)
        if u_lo <= u_sec <= u_hi:
            f_sec = excess(u_sec)
            if abs(f_sec) < abs(f_root):
                u_root, f_root = u_sec, f_sec

    options = _laplace_options(sigma, evaluator, t_cut, tol)
    result = RateResult(sigma=sigma, xi=float(np.exp(u_root) - sigma),
                        log_lambda=float(u_root), residual=float(abs(f_root)),
                        log_tp_integral=float(laplace_tp(u_root, **options)),
                        bracket=(float(u_lo), float(u_hi)),
                        n_iterations=n_iter)
    log.info('sigma={0}: xi={1!r}, log(lambda)={2!r}, residual={3:.2e}'
             .format(sigma, result.xi, result.log_lambda, result.residual))
    return result


def c_sigma(rate, initial_mass=1.0):
    """
    Amplitude :math:`C_\\sigma` of the exponential mass decay
    :math:`M(t) \\sim C_\\sigma e^{\\xi_\\sigma t}`.

    Parameters
    ----------
    rate : `~holegas.RateResult`
    initial_mass : float
        Total initial mass

    Returns
    -------
    amplitude : float
        ``initial_mass / (2 pi sigma**2 int t p(t) exp(-lambda t) dt)``
    """
    if not rate.residual <= 1e-10:
        raise NumericalError('characteristic exponent is not converged',
                             dict(sigma=rate.sigma, residual=rate.residual))
    return initial_mass * rate.c_multiplier


@dataclass(frozen=True, eq=False)
class RateDiagnostics:
    """
    Trends of the characteristic exponent over a sweep of collision
    frequencies.

    Attributes
    ----------
    results : tuple of `~holegas.RateResult`
    lambda_ratio : `~numpy.ndarray`
        :math:`\\lambda_\\sigma / \\sigma`
    xi_gap : `~numpy.ndarray`
        :math:`|\\xi_\\sigma + 2|`
    identity_error : `~numpy.ndarray`
        :math:`|\\sigma \\int e^{-\\lambda_\\sigma t} p - 1|`
    quotient_error : `~numpy.ndarray`
        Gap between :math:`\\xi_\\sigma` and
        :math:`\\int e^{-\\lambda t}\\dot p / \\int e^{-\\lambda t} p`
    """
    results: tuple
    lambda_ratio: np.ndarray
    xi_gap: np.ndarray
    identity_error: np.ndarray
    quotient_error: np.ndarray

    @property
    def sigmas(self):
        return np.array([r.sigma for r in self.results])

    @property
    def small_sigma_trend(self):
        """
        Whether :math:`\\lambda_\\sigma/\\sigma` decreases as
        :math:`\\sigma \\le 1` decreases.
        """
        ratios = np.array([r.log_lambda - np.log(r.sigma)
                           for r in self.results if r.sigma <= 1])
        return bool(np.all(np.diff(ratios) > 0))

    @property
    def large_sigma_trend(self):
        """
        Whether :math:`|\\xi_\\sigma + 2|` decreases as
        :math:`\\sigma \\ge 10` increases.
        """
        gaps = self.xi_gap[self.sigmas >= 10]
        return bool(np.all(np.diff(gaps) < 0))

    def identities_hold(self, identity_tol=1e-8, quotient_tol=1e-6):
        return bool(np.all(self.identity_error <= identity_tol) and
                    np.all(self.quotient_error <= quotient_tol))

    def to_table(self):
        table = Table(rows=[r.to_row() for r in self.results])
        table['lambda_ratio'] = self.lambda_ratio
        table['xi_gap'] = self.xi_gap
        table['identity_error'] = self.identity_error
        table['quotient_error'] = self.quotient_error
        return table


def asymptotic_diagnostics(sigma_list, evaluator=None, t_cut=None,
                           threads=1):
    """
    Characteristic exponents over a sweep of collision frequencies, with the
    small and large :math:`\\sigma` trends and two identities satisfied at
    the root: :math:`\\int e^{-\\lambda_\\sigma t} p = 1/\\sigma` and
    :math:`\\xi_\\sigma = \\int e^{-\\lambda t}\\dot p /
    \\int e^{-\\lambda t} p`.

    Parameters
    ----------
    sigma_list : list of float
        Collision frequencies, in ascending order
    evaluator : `~holegas.UpsilonEvaluator`, optional
    t_cut : float, optional
    threads : int
        Worker threads, ``0`` for one per CPU; results keep the input order

    Returns
    -------
    diagnostics : `~holegas.RateDiagnostics`
    """
    sigmas = np.asarray(sigma_list, dtype=float)
    if np.any(np.diff(sigmas) <= 0):
        raise DomainError('sigma_list must be sorted ascending without '
                          'repetitions')

    def analyse(sigma):
        rate = find_xi(sigma, evaluator=evaluator, t_cut=t_cut)
        options = _laplace_options(sigma, evaluator, t_cut, None)
        transform = laplace_p(rate.log_lambda, **options)
        quotient = laplace_pdot(rate.log_lambda, **options) / transform
        return rate, abs(sigma * transform - 1), abs(quotient - rate.xi)

    workers = min(resolve_threads(threads), len(sigmas))
    if workers <= 1:
        rows = [analyse(s) for s in sigmas]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(analyse, sigmas))
    results = tuple(row[0] for row in rows)
    return RateDiagnostics(
        results=results,
        lambda_ratio=np.array([r.lam / r.sigma for r in results]),
        xi_gap=np.array([abs(r.xi + 2) for r in results]),
        identity_error=np.array([row[1] for row in rows]),
        quotient_error=np.array([row[2] for row in rows]))
