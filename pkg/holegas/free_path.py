# Licensed under a 3-clause BSD style license - see LICENSE.rst
"""
Limiting distribution of free path lengths in the square lattice of holes.

The density of the limiting law is the piecewise logarithmic function
:math:`\\Upsilon`, the survival function is

.. math::

    p(t) = \\int_t^\\infty (\\tau - t) \\Upsilon(\\tau) d\\tau ,

and :math:`\\dot p(t) = -\\int_t^\\infty \\Upsilon(\\tau) d\\tau`.
"""
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator
from scipy.special import digamma, expn, exprel, factorial
from astropy import log
from astropy.table import Table

from . import conf
from .exceptions import DomainError, NumericalError

__all__ = ['UPSILON_ZERO', 'UpsilonEvaluator', 'PathDistribution',
           'upsilon', 'p_of_t', 'p_dot', 'p_series', 'pdot_series',
           'tabulate', 'upsilon_tail_coefficient', 'laplace_p',
           'laplace_pdot', 'laplace_tp']

#: Value of the density on :math:`(0, 1/2]`, :math:`24/\pi^2`.
UPSILON_ZERO = 24 / np.pi**2

_N_SERIES = 60
_SERIES_N = np.arange(3, 3 + _N_SERIES, dtype=float)
# Upsilon(t) = UPSILON_ZERO * sum_n _SERIES_A[n] * t**-n for t > 1
_SERIES_A = (1 - 2.0**(2 - _SERIES_N)) / (
    _SERIES_N * (_SERIES_N - 1) * (_SERIES_N - 2))

_GAUSS_NODES, _GAUSS_WEIGHTS = leggauss(20)


def _log1p_series(z, n_terms=4):
    """
    Truncated Taylor series of ``log(1 + z)``.
    """
    out = np.zeros_like(z)
    for k in range(1, n_terms + 1):
        out += (-1)**(k + 1) * z**k / k
    return out


def _x2_log_abs(x):
    """
    ``x**2 * log|x|`` extended by continuity to ``x = 0``.
    """
    out = np.zeros_like(x)
    nonzero = x != 0
    out[nonzero] = x[nonzero]**2 * np.log(np.abs(x[nonzero]))
    return out


class UpsilonEvaluator(object):
    """
    Evaluator of the free path density :math:`\\Upsilon`.

    The closed form is used directly away from the points where its
    logarithms degenerate. Within ``singular_switch_width`` of ``t=1/2`` and
    ``t=1`` the smooth logarithmic factors are replaced by truncated series,
    and above ``series_threshold`` the convergent expansion in ``1/t`` is
    summed instead, which avoids the cancellation of the closed form at large
    ``t``.
    """
    def __init__(self, singular_switch_width=None, series_threshold=None):
        """
        Parameters
        ----------
        singular_switch_width : float, optional
            Half-width of the series windows around ``t=1/2`` and ``t=1``.
            Defaults to ``conf.singular_switch_width``.
        series_threshold : float, optional
            Time above which the large-time expansion is used, must be
            larger than 1. Defaults to ``conf.series_threshold``.
        """
        if singular_switch_width is None:
            singular_switch_width = conf.singular_switch_width
        if series_threshold is None:
            series_threshold = conf.series_threshold
        if not 0 < singular_switch_width < 0.25:
            raise DomainError('singular_switch_width must lie in (0, 1/4), '
                              'got {0}'.format(singular_switch_width))
        if series_threshold <= 1 + singular_switch_width:
            raise DomainError('series_threshold must exceed 1, got '
                              '{0}'.format(series_threshold))
        self.singular_switch_width = float(singular_switch_width)
        self.series_threshold = float(series_threshold)

    def __repr__(self):
        return ('UpsilonEvaluator(singular_switch_width={0}, '
                'series_threshold={1})').format(self.singular_switch_width,
                                                self.series_threshold)

    def __call__(self, t):
        """
        Evaluate the density.

        Parameters
        ----------
        t : float or `~numpy.ndarray`
            Positive times

        Returns
        -------
        upsilon : float or `~numpy.ndarray`
            Density at ``t``
        """
        t_arr = np.asarray(t, dtype=float)
        if np.any(~(t_arr > 0)):
            raise DomainError('upsilon is defined for t > 0 only')
        flat = t_arr.ravel()
        out = np.empty_like(flat)
        delta = self.singular_switch_width

        constant = flat <= 0.5
        far = flat >= self.series_threshold
        near_half = ~constant & (flat < 0.5 + delta)
        near_one = np.abs(flat - 1) < delta
        direct = ~(constant | far | near_half | near_one)

        out[constant] = 1.0
        out[far] = self._large_time(flat[far])

        if np.any(direct):
            td = flat[direct]
            x = 1 - 1 / (2 * td)
            y = 1 - 1 / td
            out[direct] = (1 / (2 * td) + 2 * x**2 * np.log(x) -
                           0.5 * _x2_log_abs(y))

        if np.any(near_half):
            # 1 - 1/t = -(1 - 2x), so log|1 - 1/t| = log(1 - 2x)
            th = flat[near_half]
            x = 1 - 1 / (2 * th)
            out[near_half] = (1 - x + 2 * x**2 * np.log(x) -
                              0.5 * (1 - 2 * x)**2 * _log1p_series(-2 * x))

        if np.any(near_one):
            # 1 - 1/(2t) = (1 + y)/2
            t1 = flat[near_one]
            y = 1 - 1 / t1
            x = (1 + y) / 2
            log_x = -np.log(2) + _log1p_series(y)
            out[near_one] = (1 / (2 * t1) + 2 * x**2 * log_x -
                             0.5 * _x2_log_abs(y))

        out = UPSILON_ZERO * np.maximum(out, 0)
        if t_arr.ndim == 0:
            return float(out[0])
        return out.reshape(t_arr.shape)

    @staticmethod
    def _large_time(t):
        """
        Sum of the expansion of ``Upsilon / UPSILON_ZERO`` in powers of 1/t.
        """
        inv = 1 / t[:, np.newaxis]
        return np.sum(_SERIES_A * inv**_SERIES_N, axis=1)


_DEFAULT_EVALUATOR = None


def _evaluator(evaluator):
    global _DEFAULT_EVALUATOR
    if evaluator is not None:
        return evaluator
    if (_DEFAULT_EVALUATOR is None or
            _DEFAULT_EVALUATOR.singular_switch_width != conf.singular_switch_width or
            _DEFAULT_EVALUATOR.series_threshold != conf.series_threshold):
        _DEFAULT_EVALUATOR = UpsilonEvaluator()
    return _DEFAULT_EVALUATOR


def upsilon(t, evaluator=None):
    """
    Free path density :math:`\\Upsilon(t)`.

    Parameters
    ----------
    t : float or `~numpy.ndarray`
        Positive times
    evaluator : `~holegas.UpsilonEvaluator`, optional
        Evaluator to use, by default one built from ``conf``

    Returns
    -------
    upsilon : float or `~numpy.ndarray`
    """
    return _evaluator(evaluator)(t)


@lru_cache(maxsize=16)
def _fit_upsilon_tail(t_cut, singular_switch_width, series_threshold):
    evaluator = UpsilonEvaluator(singular_switch_width, series_threshold)
    tau = np.linspace(t_cut / 2, t_cut, 64)
    basis = tau**-3.0
    return float(np.sum(evaluator(tau) * basis) / np.sum(basis**2))


def upsilon_tail_coefficient(t_cut=None, evaluator=None):
    """
    Least-squares coefficient :math:`A_\\Upsilon` of the tail model
    :math:`\\Upsilon(\\tau) \\approx A_\\Upsilon / \\tau^3` on
    ``[t_cut / 2, t_cut]``.

    Parameters
    ----------
    t_cut : float, optional
        Cutoff time, by default ``conf.tail_cutoff``
    evaluator : `~holegas.UpsilonEvaluator`, optional

    Returns
    -------
    a_upsilon : float
        Close to :math:`2/\\pi^2`
    """
    if t_cut is None:
        t_cut = conf.tail_cutoff
    ev = _evaluator(evaluator)
    return _fit_upsilon_tail(float(t_cut), ev.singular_switch_width,
                             ev.series_threshold)


def _segment_edges(a, b, extra=()):
    """
    Integration breakpoints between ``a`` and ``b``: the kinks of Upsilon at
    1/2 and 1, powers of two beyond, and any ``extra`` points.
    """
    points = [0.5, 1.0]
    edge = 2.0
    while edge < b:
        points.append(edge)
        edge *= 2
    points.extend(extra)
    inner = sorted(set(pt for pt in points if a < pt < b))
    return [a] + inner + [b]


def _integrate(func, edges, tol, t=None):
    """
    Adaptive quadrature of ``func`` over consecutive ``edges``.
    """
    total = 0.0
    n_seg = len(edges) - 1
    for lo, hi in zip(edges[:-1], edges[1:]):
        result = quad(func, lo, hi, epsabs=tol / n_seg, epsrel=0, limit=200,
                      full_output=1)
        value, abserr = result[0], result[1]
        if len(result) > 3 and abserr > max(10 * tol, 1e-11 * abs(value)):
            raise NumericalError('quadrature failed to converge: ' +
                                 str(result[3]).splitlines()[0],
                                 dict(t=t, segment=(lo, hi), abserr=abserr))
        total += value
    return total


def _check_time(t, name):
    if not np.isfinite(t) or t < 0:
        raise DomainError('{0} requires t >= 0, got {1}'.format(name, t))


def _p_scalar(t, ev, t_cut, tol, a_ups):
    _check_time(t, 'p_of_t')
    if t >= t_cut:
        return a_ups / (2 * t)
    body = _integrate(lambda tau: (tau - t) * ev(tau),
                      _segment_edges(t, t_cut), tol, t=t)
    return body + a_ups * (1 / t_cut - t / (2 * t_cut**2))


def _pdot_scalar(t, ev, t_cut, tol, a_ups):
    _check_time(t, 'p_dot')
    if t >= t_cut:
        return -a_ups / (2 * t**2)
    body = _integrate(ev, _segment_edges(t, t_cut), tol, t=t)
    return -(body + a_ups / (2 * t_cut**2))


def _map_scalar(func, t, *args):
    t_arr = np.asarray(t, dtype=float)
    out = np.array([func(float(ti), *args) for ti in t_arr.ravel()])
    if t_arr.ndim == 0:
        return float(out[0])
    return out.reshape(t_arr.shape)


def _resolve(evaluator, t_cut, tol):
    ev = _evaluator(evaluator)
    if t_cut is None:
        t_cut = conf.tail_cutoff
    if tol is None:
        tol = conf.quad_tolerance
    return ev, float(t_cut), float(tol), upsilon_tail_coefficient(t_cut, ev)


def p_of_t(t, evaluator=None, t_cut=None, tol=None):
    """
    Survival function :math:`p(t)` of the limiting free path law.

    Computed by adaptive quadrature of :math:`(\\tau - t)\\Upsilon(\\tau)`
    on ``[t, t_cut]`` plus the analytic contribution of the tail
    :math:`A_\\Upsilon/\\tau^3` beyond ``t_cut``.

    Parameters
    ----------
    t : float or `~numpy.ndarray`
        Non-negative times
    evaluator : `~holegas.UpsilonEvaluator`, optional
    t_cut : float, optional
        Cutoff time, by default ``conf.tail_cutoff``
    tol : float, optional
        Absolute quadrature tolerance, by default ``conf.quad_tolerance``

    Returns
    -------
    p : float or `~numpy.ndarray`
    """
    return _map_scalar(_p_scalar, t, *_resolve(evaluator, t_cut, tol))


def p_dot(t, evaluator=None, t_cut=None, tol=None):
    """
    Derivative :math:`\\dot p(t) = -\\int_t^\\infty \\Upsilon`.

    Takes the same arguments as `~holegas.p_of_t`.

    Returns
    -------
    pdot : float or `~numpy.ndarray`
        Non-positive values
    """
    return _map_scalar(_pdot_scalar, t, *_resolve(evaluator, t_cut, tol))


def _series_terms(t, power_shift, divisor):
    t_arr = np.asarray(t, dtype=float)
    if np.any(~(t_arr >= 2)):
        raise DomainError('the large-time expansion is used for t >= 2 only')
    inv = 1 / t_arr.ravel()[:, np.newaxis]
    terms = _SERIES_A / divisor * inv**(_SERIES_N - power_shift)
    out = UPSILON_ZERO * np.sum(terms, axis=1)
    if t_arr.ndim == 0:
        return float(out[0])
    return out.reshape(t_arr.shape)


def p_series(t):
    """
    :math:`p(t)` from the termwise integrated large-time expansion.

    Parameters
    ----------
    t : float or `~numpy.ndarray`
        Times, ``t >= 2``

    Returns
    -------
    p : float or `~numpy.ndarray`
    """
    return _series_terms(t, 2, (_SERIES_N - 1) * (_SERIES_N - 2))


def pdot_series(t):
    """
    :math:`\\dot p(t)` from the termwise integrated large-time expansion.

    Parameters
    ----------
    t : float or `~numpy.ndarray`
        Times, ``t >= 2``

    Returns
    -------
    pdot : float or `~numpy.ndarray`
    """
    return -_series_terms(t, 1, _SERIES_N - 1)


class PathDistribution(object):
    """
    Tabulated free path survival function :math:`p`, its derivative and the
    density :math:`\\Upsilon`.

    Values on ``[0, t_max]`` come from a uniform grid and are interpolated
    with monotone cubics; beyond ``t_max`` the large-time expansion is used
    (or the direct quadrature when ``t_max < 2``).
    """
    def __init__(self, grid, p_values, pdot_values, tail_coefficient,
                 evaluator=None, t_cut=None):
        """
        Parameters
        ----------
        grid : `~numpy.ndarray`
            Strictly increasing, uniformly spaced times starting at zero
        p_values : `~numpy.ndarray`
            :math:`p` at ``grid``
        pdot_values : `~numpy.ndarray`
            :math:`\\dot p` at ``grid``
        tail_coefficient : float
            Constant ``A`` with :math:`p(t) \\approx A/t` at large ``t``
        evaluator : `~holegas.UpsilonEvaluator`, optional
        t_cut : float, optional
            Quadrature cutoff used to build the table
        """
        self.grid = np.asarray(grid, dtype=float)
        self.p_values = np.asarray(p_values, dtype=float)
        self.pdot_values = np.asarray(pdot_values, dtype=float)
        self.t_max = float(self.grid[-1])
        self.tail_coefficient = float(tail_coefficient)
        self.evaluator = _evaluator(evaluator)
        self.t_cut = float(conf.tail_cutoff if t_cut is None else t_cut)
        self._p_interp = PchipInterpolator(self.grid, self.p_values,
                                           extrapolate=False)
        self._pdot_interp = PchipInterpolator(self.grid, self.pdot_values,
                                              extrapolate=False)

    def __repr__(self):
        return ('<PathDistribution t_max={0} n_points={1} '
                'tail_coefficient={2:.6g}>').format(
                    self.t_max, len(self.grid), self.tail_coefficient)

    @property
    def step(self):
        return self.grid[1] - self.grid[0]

    def _evaluate(self, t, interp, series, direct):
        t_arr = np.asarray(t, dtype=float)
        if np.any(~(t_arr >= 0)):
            raise DomainError('PathDistribution is defined for t >= 0 only')
        flat = t_arr.ravel()
        out = np.empty_like(flat)
        inside = flat <= self.t_max
        out[inside] = interp(flat[inside])
        beyond = ~inside
        if np.any(beyond):
            tb = flat[beyond]
            use_series = tb >= 2
            vals = np.empty_like(tb)
            vals[use_series] = series(tb[use_series])
            if np.any(~use_series):
                vals[~use_series] = direct(tb[~use_series],
                                           evaluator=self.evaluator,
                                           t_cut=self.t_cut)
            out[beyond] = vals
        if t_arr.ndim == 0:
            return float(out[0])
        return out.reshape(t_arr.shape)

    def __call__(self, t):
        """
        Survival function :math:`p(t)`.
        """
        return self.p(t)

    def p(self, t):
        """
        Survival function :math:`p(t)`.

        Parameters
        ----------
        t : float or `~numpy.ndarray`
            Non-negative times

        Returns
        -------
        p : float or `~numpy.ndarray`
        """
        return self._evaluate(t, self._p_interp, p_series, p_of_t)

    def pdot(self, t):
        """
        Derivative :math:`\\dot p(t)`.

        Parameters
        ----------
        t : float or `~numpy.ndarray`
            Non-negative times

        Returns
        -------
        pdot : float or `~numpy.ndarray`
        """
        return self._evaluate(t, self._pdot_interp, pdot_series, p_dot)

    def upsilon(self, t):
        """
        Density :math:`\\Upsilon(t)`, with the right limit at ``t=0``.
        """
        t_arr = np.asarray(t, dtype=float)
        safe = np.where(t_arr == 0, 0.25, t_arr)
        return self.evaluator(safe)

    def inverse_t_bounds(self, t_min=1.0):
        """
        Constants :math:`C \\le C'` with :math:`C/t \\le p(t) \\le C'/t` on the
        tabulated grid beyond ``t_min``.

        Returns
        -------
        c_lower, c_upper : float
        """
        mask = self.grid >= t_min
        if not np.any(mask):
            raise DomainError('no grid points beyond t_min={0}'.format(t_min))
        scaled = self.grid[mask] * self.p_values[mask]
        return float(scaled.min()), float(scaled.max())

    def validate(self, p0_tol=1e-6, pdot0_tol=1e-4, convexity_tol=1e-9):
        """
        Check the shape constraints of the table.

        Raises
        ------
        NumericalError
            If ``p`` is not decreasing and convex, leaves ``(0, 1]``, or the
            normalizations at ``t=0`` are off.
        """
        dp = np.diff(self.p_values)
        d2p = np.diff(self.p_values, 2)
        problems = {}
        if np.any(dp >= 0):
            problems['first_increase_at'] = float(self.grid[np.argmax(dp >= 0)])
        if np.any(d2p < -convexity_tol):
            problems['min_second_difference'] = float(d2p.min())
        if np.any(self.p_values <= 0) or np.any(self.p_values > 1 + p0_tol):
            problems['p_range'] = (float(self.p_values.min()),
                                   float(self.p_values.max()))
        if np.any(self.pdot_values > 0):
            problems['max_pdot'] = float(self.pdot_values.max())
        if abs(self.p_values[0] - 1) > p0_tol:
            problems['p0'] = float(self.p_values[0])
        if abs(self.pdot_values[0] + 2) > pdot0_tol:
            problems['pdot0'] = float(self.pdot_values[0])
        if problems:
            raise NumericalError('tabulated free path law violates its shape '
                                 'constraints', problems)

    def to_table(self):
        """
        Table with columns ``t, p, pdot, upsilon``.

        Returns
        -------
        table : `~astropy.table.Table`
        """
        return Table([self.grid, self.p_values, self.pdot_values,
                      self.upsilon(self.grid)],
                     names=('t', 'p', 'pdot', 'upsilon'))


def _interval_moments(edges, ev):
    """
    Integrals of ``Upsilon`` and ``tau * Upsilon`` over each interval of
    ``edges``, by Gauss-Legendre quadrature on sub-intervals split at the
    kinks of ``Upsilon``.
    """
    lo = np.asarray(edges[:-1])
    hi = np.asarray(edges[1:])
    pieces_lo, pieces_hi, owner = [], [], []
    for i, (a, b) in enumerate(zip(lo, hi)):
        cuts = [a] + [c for c in (0.5, 1.0) if a < c < b] + [b]
        for c0, c1 in zip(cuts[:-1], cuts[1:]):
            pieces_lo.append(c0)
            pieces_hi.append(c1)
            owner.append(i)
    pieces_lo = np.array(pieces_lo)
    pieces_hi = np.array(pieces_hi)
    half = (pieces_hi - pieces_lo)[:, np.newaxis] / 2
    mid = (pieces_hi + pieces_lo)[:, np.newaxis] / 2
    nodes = mid + half * _GAUSS_NODES
    values = ev(nodes) * half * _GAUSS_WEIGHTS
    q0 = np.bincount(owner, weights=values.sum(axis=1), minlength=len(lo))
    q1 = np.bincount(owner, weights=(values * nodes).sum(axis=1),
                     minlength=len(lo))
    return q0, q1


def tabulate(t_max=20.0, n_points=2001, evaluator=None, t_cut=None, tol=None,
             validate=True):
    """
    Tabulate :math:`p` and :math:`\\dot p` on a uniform grid.

    The moments :math:`\\int_t^\\infty \\Upsilon` and
    :math:`\\int_t^\\infty \\tau\\Upsilon` are accumulated backwards from
    ``t_max``, where they are obtained with the same adaptive quadrature and
    tail correction as `~holegas.p_of_t`.

    Parameters
    ----------
    t_max : float
        Last grid time
    n_points : int
        Number of grid points, at least two
    evaluator : `~holegas.UpsilonEvaluator`, optional
    t_cut : float, optional
        Cutoff time, by default ``conf.tail_cutoff``
    tol : float, optional
        Absolute quadrature tolerance, by default ``conf.quad_tolerance``
    validate : bool
        Check the shape constraints before returning

    Returns
    -------
    distribution : `~holegas.PathDistribution`
    """
    if not t_max > 0:
        raise DomainError('t_max must be positive, got {0}'.format(t_max))
    if int(n_points) < 2:
        raise DomainError('n_points must be at least 2, got '
                          '{0}'.format(n_points))
    ev, t_cut, tol, a_ups = _resolve(evaluator, t_cut, tol)
    grid = np.linspace(0, t_max, int(n_points))

    if t_max >= t_cut:
        end_i0 = a_ups / (2 * t_max**2)
        end_i1 = a_ups / t_max
    else:
        edges = _segment_edges(t_max, t_cut)
        end_i0 = _integrate(ev, edges, tol, t=t_max) + a_ups / (2 * t_cut**2)
        end_i1 = (_integrate(lambda tau: tau * ev(tau), edges, tol, t=t_max) +
                  a_ups / t_cut)

    q0, q1 = _interval_moments(grid, ev)
    i0 = np.append(np.cumsum(q0[::-1])[::-1], 0) + end_i0
    i1 = np.append(np.cumsum(q1[::-1])[::-1], 0) + end_i1
    p_values = i1 - grid * i0
    pdot_values = -i0

    fit_t = np.linspace(50, 100, 51)
    fit_p = p_series(fit_t)
    tail_coefficient = np.sum(fit_p / fit_t) / np.sum(fit_t**-2.0)

    dist = PathDistribution(grid, p_values, pdot_values, tail_coefficient,
                            evaluator=ev, t_cut=t_cut)
    log.debug('tabulated free path law on [0, {0}] with {1} points, '
              'p(0)={2!r}, pdot(0)={3!r}'.format(t_max, len(grid),
                                                  p_values[0], pdot_values[0]))
    if validate:
        dist.validate()
    return dist


# Laplace-type transforms of p. Exchanging the order of integration turns
# each of them into a single integral of Upsilon against an explicit kernel;
# beyond t_cut the tail Upsilon ~ A/tau^3 integrates in closed form through
# the generalized exponential integrals. All of them take log(lambda) so that
# exponentially small rates stay representable.

_PSI3 = float(digamma(3))


def _phi2(x):
    """
    ``(x - 1 + exp(-x)) / x**2``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    small = x < 0.1
    out = np.empty_like(x)
    xs = x[small]
    k = np.arange(10)
    out[small] = np.sum((-xs[..., np.newaxis])**k / factorial(k + 2), axis=-1)
    xl = x[~small]
    out[~small] = (xl + np.expm1(-xl)) / xl**2
    return out


def _phi3(x):
    """
    ``int_0^1 u (1 - u) exp(-x u) du``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    small = x < 0.5
    out = np.empty_like(x)
    xs = x[small]
    k = np.arange(20)
    out[small] = np.sum((-xs[..., np.newaxis])**k /
                        (factorial(k) * (k + 2) * (k + 3)), axis=-1)
    xl = x[~small]
    out[~small] = (xl - 2 + (xl + 2) * np.exp(-xl)) / xl**3
    return out


def _tail_h(log_y):
    """
    ``int_y^inf (x - 1 + exp(-x)) / x**3 dx``.
    """
    y = np.exp(log_y)
    if y < 1:
        k = np.arange(3, 25)
        series = -np.sum((-1.0)**k * y**(k - 2) / ((k - 2) * factorial(k)))
        return 0.5 * (_PSI3 - log_y) + series
    return 1 / y - 1 / (2 * y**2) + expn(3, y) / y**2


def _tail_k(log_y):
    """
    ``int_y^inf (x - 2 + (x + 2) exp(-x)) / x**3 dx``.
    """
    y = np.exp(log_y)
    if y < 1:
        k = np.arange(20)
        return 0.5 - np.sum((-1.0)**k * y**(k + 1) /
                            (factorial(k + 1) * (k + 2) * (k + 3)))
    return 1 / y - 1 / y**2 + expn(2, y) / y + 2 * expn(3, y) / y**2


def _laplace_edges(lam, t_cut):
    extra = []
    if lam > 1:
        extra = [m / lam for m in (1, 4, 16, 64)]
    return _segment_edges(0.0, t_cut, extra=extra)


def _laplace_setup(log_lam, evaluator, t_cut, tol):
    ev = _evaluator(evaluator)
    t_cut = float(conf.tail_cutoff if t_cut is None else t_cut)
    tol = float(conf.laplace_tolerance if tol is None else tol)
    a_ups = upsilon_tail_coefficient(t_cut, ev)
    log_lam = float(log_lam)
    if not np.isfinite(log_lam):
        raise DomainError('log_lambda must be finite, got {0}'.format(log_lam))
    return ev, t_cut, tol, a_ups, log_lam, np.exp(log_lam)


def laplace_p(log_lam, evaluator=None, t_cut=None, tol=None):
    """
    :math:`\\int_0^\\infty e^{-\\lambda t} p(t) dt` as a function of
    :math:`\\log\\lambda`.

    Parameters
    ----------
    log_lam : float
        Natural logarithm of the (positive) rate :math:`\\lambda`
    evaluator : `~holegas.UpsilonEvaluator`, optional
    t_cut : float, optional
        Cutoff time, by default ``conf.tail_cutoff``
    tol : float, optional
        Absolute quadrature tolerance, by default ``conf.laplace_tolerance``

    Returns
    -------
    value : float
    """
    ev, t_cut, tol, a_ups, log_lam, lam = _laplace_setup(log_lam, evaluator,
                                                         t_cut, tol)
    body = _integrate(lambda tau: ev(tau) * tau**2 * _phi2(lam * tau)[0],
                      _laplace_edges(lam, t_cut), tol)
    return body + a_ups * _tail_h(log_lam + np.log(t_cut))


def laplace_pdot(log_lam, evaluator=None, t_cut=None, tol=None):
    """
    :math:`\\int_0^\\infty e^{-\\lambda t} \\dot p(t) dt` as a function of
    :math:`\\log\\lambda`.

    Takes the same arguments as `~holegas.laplace_p`.
    """
    ev, t_cut, tol, a_ups, log_lam, lam = _laplace_setup(log_lam, evaluator,
                                                         t_cut, tol)
    body = _integrate(lambda tau: ev(tau) * tau * exprel(-lam * tau),
                      _laplace_edges(lam, t_cut), tol)
    log_y = log_lam + np.log(t_cut)
    if log_y < 0:
        tail = a_ups * (1 / t_cut - lam * _tail_h(log_y))
    else:
        y = np.exp(log_y)
        tail = a_ups * lam * (0.5 - expn(3, y)) / y**2
    return -(body + tail)


def laplace_tp(log_lam, evaluator=None, t_cut=None, tol=None):
    """
    Logarithm of :math:`\\int_0^\\infty t p(t) e^{-\\lambda t} dt` as a
    function of :math:`\\log\\lambda`.

    The logarithm is returned because the integral grows like
    :math:`1/(\\pi^2\\lambda)` when :math:`\\lambda \\to 0`.

    Takes the same arguments as `~holegas.laplace_p`.
    """
    ev, t_cut, tol, a_ups, log_lam, lam = _laplace_setup(log_lam, evaluator,
                                                         t_cut, tol)
    body = _integrate(lambda tau: ev(tau) * tau**3 * _phi3(lam * tau)[0],
                      _laplace_edges(lam, t_cut), tol)
    # log(body + a_ups * K / lam) = -log_lam + log(body * lam + a_ups * K)
    tail = a_ups * _tail_k(log_lam + np.log(t_cut))
    return -log_lam + np.log(body * lam + tail)
