# Licensed under a 3-clause BSD style license - see LICENSE.rst
"""
Homogenized mass laws: the renewal kernel
:math:`\\kappa(t) = \\sigma e^{-\\sigma t} p(t)`, the renewal equation
:math:`\\psi = \\kappa + \\kappa * \\psi`, its convolution-power series and
the age-structured densities.

All solvers work with the unit-mass solution :math:`\\psi`; the surviving
fraction is :math:`\\psi/\\sigma` and the mass is
:math:`M = \\mathrm{scale}\\,\\psi / (2\\pi\\sigma)`.
"""
import warnings

import numpy as np
from scipy.integrate import quad, simpson, trapezoid
from scipy.signal import fftconvolve
from astropy import log
from astropy.table import Table

from .exceptions import DomainError, UnderResolvedWarning
from .free_path import laplace_p, laplace_pdot

__all__ = ['RenewalKernel', 'MassCurve', 'AgeDensityGrid', 'kernel_eval',
           'solve_volterra', 'convolution_powers', 'age_density_closed_form',
           'mu_solver', 'b_coefficient', 'collisionless_mass']


class RenewalKernel(object):
    """
    Renewal kernel :math:`\\kappa(t) = \\sigma e^{-\\sigma t} p(t)
    \\mathbf{1}_{t \\ge 0}`.
    """
    def __init__(self, sigma, distribution):
        """
        Parameters
        ----------
        sigma : float
            Collision frequency, positive
        distribution : `~holegas.PathDistribution`
            Free path law
        """
        sigma = float(sigma)
        if not sigma > 0:
            raise DomainError('sigma must be positive, got {0}'.format(sigma))
        self.sigma = sigma
        self.distribution = distribution

    def __repr__(self):
        return '<RenewalKernel sigma={0}>'.format(self.sigma)

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        out = np.zeros_like(t_arr)
        positive = t_arr >= 0
        tp = t_arr[positive]
        out[positive] = (self.sigma * np.exp(-self.sigma * tp) *
                         self.distribution.p(tp))
        if t_arr.ndim == 0:
            return float(out)
        return out

    def _laplace_kwargs(self):
        return dict(evaluator=self.distribution.evaluator,
                    t_cut=self.distribution.t_cut)

    def integral(self):
        """
        Total integral :math:`\\int_0^\\infty \\kappa`, which is below one.
        """
        return self.sigma * laplace_p(np.log(self.sigma),
                                      **self._laplace_kwargs())

    def integral_by_parts(self):
        """
        :math:`1 + \\int_0^\\infty \\dot p(t) e^{-\\sigma t} dt`, equal to
        `integral` after integration by parts.
        """
        return 1 + laplace_pdot(np.log(self.sigma), **self._laplace_kwargs())

    def psi_integral(self):
        """
        :math:`\\int_0^\\infty \\psi = \\int\\kappa / (1 - \\int\\kappa)`.
        """
        total = self.integral()
        return total / (1 - total)

    def sample(self, h, n_steps):
        """
        Kernel values on the grid ``k * h``, ``k = 0 .. n_steps``.
        """
        return self(h * np.arange(n_steps + 1))


def kernel_eval(kernel, t):
    """
    Evaluate the renewal kernel.

    Parameters
    ----------
    kernel : `~holegas.RenewalKernel`
    t : float or `~numpy.ndarray`
        Times; the kernel vanishes for negative times

    Returns
    -------
    kappa : float or `~numpy.ndarray`
    """
    return kernel(t)


class MassCurve(object):
    """
    Values of the unit-mass renewal solution :math:`\\psi` on a uniform grid.
    """
    def __init__(self, step, values, scale=1.0, kernel=None,
                 term_norms=None):
        """
        Parameters
        ----------
        step : float
            Grid step ``h``
        values : `~numpy.ndarray`
            :math:`\\psi(k h)`
        scale : float
            Initial mass multiplier
        kernel : `~holegas.RenewalKernel`, optional
            Kernel the curve solves the renewal equation for
        term_norms : `~numpy.ndarray`, optional
            Trapezoid :math:`L^1` norms of the convolution powers, when the
            curve is a partial sum of them
        """
        self.step = float(step)
        self.values = np.asarray(values, dtype=float)
        self.scale = float(scale)
        self.kernel = kernel
        self.term_norms = term_norms

    def __repr__(self):
        return '<MassCurve step={0} horizon={1} sigma={2}>'.format(
            self.step, self.horizon,
            None if self.kernel is None else self.kernel.sigma)

    @property
    def times(self):
        return self.step * np.arange(len(self.values))

    @property
    def horizon(self):
        return self.step * (len(self.values) - 1)

    @property
    def sigma(self):
        return self.kernel.sigma

    @property
    def psi(self):
        return self.values

    def survival(self):
        """
        Surviving fraction :math:`\\psi/\\sigma`, equal to one at ``t=0``.
        """
        return self.values / self.sigma

    def mass(self):
        """
        Mass :math:`M = \\mathrm{scale}\\,\\psi/(2\\pi\\sigma)`.
        """
        return self.scale * self.values / (2 * np.pi * self.sigma)

    def __call__(self, t):
        """
        :math:`\\psi` at arbitrary times within the horizon, by linear
        interpolation.
        """
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr > self.horizon * (1 + 1e-12)) or np.any(t_arr < 0):
            raise DomainError('time outside the mass curve horizon [0, {0}]'
                              .format(self.horizon))
        return np.interp(t_arr, self.times, self.values)

    def integral(self):
        """
        Trapezoid integral of :math:`\\psi` over the grid.
        """
        return float(trapezoid(self.values, dx=self.step))

    def to_table(self, mass=False):
        """
        Table with columns ``t, psi`` (and ``survival, M`` when ``mass``).
        """
        table = Table([self.times, self.values], names=('t', 'psi'))
        if mass:
            table['survival'] = self.survival()
            table['M'] = self.mass()
        return table


def _grid_size(h, T):
    h, T = float(h), float(T)
    if not h > 0:
        raise DomainError('step h must be positive, got {0}'.format(h))
    if T < h:
        raise DomainError('horizon T={0} is shorter than the step h={1}'
                          .format(T, h))
    return int(round(T / h))


def _check_resolution(kernel, h):
    if kernel.sigma * h >= 2:
        raise DomainError('step h={0} is too coarse for sigma={1}: the '
                          'trapezoid scheme needs h < 2/sigma'
                          .format(h, kernel.sigma))
    if kernel.sigma * h >= 1:
        warnings.warn('step h={0} does not resolve the kernel decay time '
                      '1/sigma={1}'.format(h, 1 / kernel.sigma),
                      UnderResolvedWarning)


def solve_volterra(kernel, h, T, scale=1.0):
    """
    Solve :math:`\\psi = \\kappa + \\kappa * \\psi` by the product trapezoid
    rule, marching forward in time.

    Parameters
    ----------
    kernel : `~holegas.RenewalKernel`
    h : float
        Time step
    T : float
        Horizon, at least ``h``
    scale : float
        Initial mass multiplier carried by the result

    Returns
    -------
    curve : `~holegas.MassCurve`
        Non-negative values with ``psi[0] = sigma``
    """
    n_steps = _grid_size(h, T)
    _check_resolution(kernel, h)
    kappa = kernel.sample(h, n_steps)
    psi = np.empty_like(kappa)
    psi[0] = kappa[0]
    denominator = 1 - h * kappa[0] / 2
    for k in range(1, n_steps + 1):
        history = np.dot(kappa[1:k], psi[k - 1:0:-1])
        psi[k] = (kappa[k] + h * (history + kappa[k] * psi[0] / 2)) / denominator
    log.debug('solved renewal equation for sigma={0} on {1} steps'.format(
        kernel.sigma, n_steps))
    return MassCurve(h, psi, scale=scale, kernel=kernel)


def _trapezoid_convolution(f, g, h, method):
    """
    Trapezoid-rule convolution ``(f * g)(k h)`` of two sampled functions.
    """
    n = len(f)
    if method == 'fft':
        full = fftconvolve(f, g)[:n]
    elif method == 'direct':
        full = np.convolve(f, g)[:n]
    else:
        raise DomainError("method must be 'fft' or 'direct', got "
                          "{0!r}".format(method))
    out = h * (full - f[0] * g / 2 - f * g[0] / 2)
    out[0] = 0
    return np.maximum(out, 0)


def convolution_powers(kernel, n_max, h, T, method='fft', scale=1.0):
    """
    Partial sum :math:`\\sum_{n=1}^{N} \\kappa^{*n}` of the convolution
    powers of the kernel.

    The powers are built by repeated trapezoid-rule convolution with the
    sampled kernel, so the partial sums converge to the values of
    `~holegas.solve_volterra` on the same grid.

    Parameters
    ----------
    kernel : `~holegas.RenewalKernel`
    n_max : int
        Number of terms ``N``, at least one
    h : float
        Time step
    T : float
        Horizon
    method : {'fft', 'direct'}
        Convolution algorithm
    scale : float
        Initial mass multiplier carried by the result

    Returns
    -------
    curve : `~holegas.MassCurve`
        Partial sum, with the norms of the individual terms in
        ``term_norms``
    """
    if int(n_max) < 1:
        raise DomainError('n_max must be at least 1, got {0}'.format(n_max))
    n_steps = _grid_size(h, T)
    kappa = kernel.sample(h, n_steps)
    term = kappa.copy()
    total = kappa.copy()
    norms = [trapezoid(term, dx=h)]
    for n in range(2, int(n_max) + 1):
        term = _trapezoid_convolution(term, kappa, h, method)
        total += term
        norms.append(trapezoid(term, dx=h))
    return MassCurve(h, total, scale=scale, kernel=kernel,
                     term_norms=np.array(norms))


def age_density_closed_form(t, s, mass_curve):
    """
    Age density :math:`m(t, s)` expressed through :math:`\\psi`.

    .. math::

        m(t,s) = \\frac{\\mathrm{scale}}{2\\pi} \\left(
            \\mathbf{1}_{s<t} p(s) e^{-\\sigma s} \\psi(t-s)
            + \\mathbf{1}_{t \\le s} p(t) \\sigma e^{-\\sigma s} \\right)

    Parameters
    ----------
    t : float or `~numpy.ndarray`
        Times within the horizon of ``mass_curve``
    s : float or `~numpy.ndarray`
        Non-negative ages
    mass_curve : `~holegas.MassCurve`
        Renewal solution with its kernel

    Returns
    -------
    m : float or `~numpy.ndarray`
    """
    t, s = np.broadcast_arrays(np.asarray(t, dtype=float),
                               np.asarray(s, dtype=float))
    if np.any(t < 0) or np.any(s < 0):
        raise DomainError('t and s must be non-negative')
    if np.any(t > mass_curve.horizon * (1 + 1e-12)):
        raise DomainError('t beyond the mass curve horizon {0}'
                          .format(mass_curve.horizon))
    sigma = mass_curve.sigma
    p = mass_curve.kernel.distribution.p
    young = s < t
    out = np.empty(t.shape)
    out[young] = (p(s[young]) * np.exp(-sigma * s[young]) *
                  mass_curve(t[young] - s[young]))
    out[~young] = p(t[~young]) * sigma * np.exp(-sigma * s[~young])
    out *= mass_curve.scale / (2 * np.pi)
    if out.ndim == 0:
        return float(out)
    return out


class AgeDensityGrid(object):
    """
    Age-structured density :math:`\\mu(t, s)` on uniform grids.
    """
    def __init__(self, t_grid, s_grid, values, marginal, kernel):
        """
        Parameters
        ----------
        t_grid, s_grid : `~numpy.ndarray`
            Uniform grids with the same step
        values : `~numpy.ndarray`
            :math:`\\mu`, shape ``(len(t_grid), len(s_grid))``
        marginal : `~numpy.ndarray`
            :math:`\\int_0^\\infty \\mu(t, s) ds` as computed by the solver
        kernel : `~holegas.RenewalKernel`
        """
        self.t_grid = np.asarray(t_grid, dtype=float)
        self.s_grid = np.asarray(s_grid, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.marginal = np.asarray(marginal, dtype=float)
        self.kernel = kernel

    @property
    def step(self):
        return self.t_grid[1] - self.t_grid[0]

    def quadrature_marginal(self):
        """
        Simpson integral of every ``t`` row over the ``s`` grid, taken
        separately on each side of the line ``s = t`` where the density is
        smooth.
        """
        h = self.step
        out = np.empty(len(self.t_grid))
        for k, row in enumerate(self.values):
            young = simpson(row[:k + 1], dx=h) if k else 0.0
            out[k] = young + simpson(row[k:], dx=h)
        return out

    def upper_bound(self):
        """
        :math:`\\sigma e^{\\sigma T} e^{-\\sigma s}` on the grid.
        """
        sigma = self.kernel.sigma
        return (sigma * np.exp(sigma * self.t_grid[-1]) *
                np.exp(-sigma * self.s_grid))[np.newaxis, :]

    def transport_residual(self):
        """
        Largest first-order residual of
        :math:`\\partial_t\\mu + \\partial_s\\mu + B\\mu` along the grid
        diagonals, away from the line ``s = t``.
        """
        h = self.step
        current = self.values[:-1, :-1]
        following = self.values[1:, 1:]
        t, s = np.meshgrid(self.t_grid[:-1], self.s_grid[:-1], indexing='ij')
        rate = b_coefficient(t, s, self.kernel.distribution, self.kernel.sigma)
        residual = (following - current) / h + rate * current
        off_diagonal = np.abs(np.subtract.outer(np.arange(len(self.t_grid) - 1),
                                                np.arange(len(self.s_grid) - 1)))
        return float(np.max(np.abs(residual[off_diagonal > 0])))

    def to_table(self):
        """
        Long table with columns ``t, s, mu``.
        """
        t, s = np.meshgrid(self.t_grid, self.s_grid, indexing='ij')
        return Table([t.ravel(), s.ravel(), self.values.ravel()],
                     names=('t', 's', 'mu'))


def mu_solver(kernel, h, T, initial_density=None, s_max=None):
    """
    Age-structured density :math:`\\mu(t, s)` by forward marching of the
    mild form of the renewal transport equation.

    Below the diagonal the density is carried from the renewal boundary,
    :math:`\\mu(t,s) = \\sigma e^{-\\sigma s} p(s) N(t-s)`; above it from the
    initial column, :math:`\\mu(t,s) = \\Pi(s-t) e^{-\\sigma t} p(t)`. The
    marginal :math:`N(t) = \\int \\mu(t, s) ds` uses the trapezoid rule below
    the diagonal and the exact mass of :math:`\\Pi` above it.

    Parameters
    ----------
    kernel : `~holegas.RenewalKernel`
    h : float
        Step of both grids
    T : float
        Time horizon
    initial_density : callable, optional
        Initial age density :math:`\\Pi(s)`, by default
        :math:`\\sigma e^{-\\sigma s}`
    s_max : float, optional
        Largest age on the grid, by default ``T + 20 / sigma``

    Returns
    -------
    grid : `~holegas.AgeDensityGrid`
    """
    n_steps = _grid_size(h, T)
    _check_resolution(kernel, h)
    sigma = kernel.sigma
    if s_max is None:
        s_max = T + 20 / sigma
    n_ages = max(int(np.ceil(s_max / h)), n_steps)
    s_grid = h * np.arange(n_ages + 1)
    t_grid = h * np.arange(n_steps + 1)

    if initial_density is None:
        initial = sigma * np.exp(-sigma * s_grid)
        initial_mass = 1.0
    else:
        initial = np.asarray(initial_density(s_grid), dtype=float)
        if np.any(initial < 0):
            raise DomainError('initial age density must be non-negative')
        initial_mass = quad(initial_density, 0, np.inf)[0]

    kappa = kernel.sample(h, n_ages)
    decay = np.exp(-sigma * t_grid) * kernel.distribution.p(t_grid)
    values = np.empty((n_steps + 1, n_ages + 1))
    marginal = np.empty(n_steps + 1)
    marginal[0] = initial_mass
    values[0] = initial
    denominator = 1 - h * kappa[0] / 2
    for k in range(1, n_steps + 1):
        history = np.dot(kappa[1:k], marginal[k - 1:0:-1])
        marginal[k] = (h * (history + kappa[k] * marginal[0] / 2) +
                       decay[k] * initial_mass) / denominator
        values[k, :k] = kappa[:k] * marginal[k:0:-1]
        values[k, k:] = initial[:n_ages + 1 - k] * decay[k]
    return AgeDensityGrid(t_grid, s_grid, values, marginal, kernel)


def b_coefficient(t, s, distribution, sigma):
    """
    Loss rate :math:`B(t, s) = \\sigma - \\dot p / p (\\min(t, s))`.

    Parameters
    ----------
    t, s : float or `~numpy.ndarray`
        Non-negative times and ages
    distribution : `~holegas.PathDistribution`
    sigma : float
        Collision frequency

    Returns
    -------
    rate : float or `~numpy.ndarray`
        Values not below ``sigma``
    """
    first = np.minimum(np.asarray(t, dtype=float), np.asarray(s, dtype=float))
    if np.any(first < 0):
        raise DomainError('t and s must be non-negative')
    return sigma - distribution.pdot(first) / distribution.p(first)


def collisionless_mass(t, distribution):
    """
    Surviving fraction without scattering, :math:`p(t)`.
    """
    return distribution.p(t)
