# Licensed under a 3-clause BSD style license - see LICENSE.rst
"""
Monte Carlo simulation of particles flying at unit speed through the
perforated plane, changing direction at rate ``sigma`` and disappearing in
the holes.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.stats import linregress
from astropy import log
from astropy.table import Table

from .exceptions import (ConfigurationError, DomainError,
                         InsufficientStatisticsError)
from .lattice import (LatticeConfig, direction_vectors, free_paths,
                      sample_rays)
from .utils.streams import map_partitions

__all__ = ['ScatterKernel', 'Isotropic', 'PolynomialCosine',
           'scatter_kernel', 'sample_scatter', 'ParticleState',
           'SimulationConfig', 'SurvivalCurve', 'RateFit', 'simulate',
           'fit_rate', 'survivor_window']


class ScatterKernel(object):
    """
    Symmetric scattering kernel :math:`k(v, w)` on the unit circle, a
    function of the cosine of the angle between ``v`` and ``w`` normalized
    by :math:`\\frac{1}{2\\pi}\\int k(v, w) dw = 1`.
    """
    name = None

    def __init__(self):
        error = abs(self.normalization() - 1)
        if error > 1e-12:
            raise ConfigurationError('scattering kernel {0!r} is not '
                                     'normalized (error {1:.3g})'
                                     .format(self.name, error))

    def __repr__(self):
        return '<{0}>'.format(self.__class__.__name__)

    def density(self, cos_angle):
        """
        Kernel value as a function of :math:`v \\cdot w`.
        """
        raise NotImplementedError()

    def normalization(self):
        """
        :math:`\\frac{1}{2\\pi}\\int_0^{2\\pi} k(\\cos\\theta) d\\theta`.
        """
        return quad(lambda theta: self.density(np.cos(theta)), 0, 2 * np.pi,
                    epsabs=1e-14, epsrel=1e-14)[0] / (2 * np.pi)

    def relative_angles(self, rng, size):
        """
        Draw outgoing-minus-incoming angles with density
        :math:`k(\\cos\\theta)/2\\pi`.
        """
        raise NotImplementedError()


class Isotropic(ScatterKernel):
    """
    Isotropic kernel :math:`k \\equiv 1`.
    """
    name = 'isotropic'

    def density(self, cos_angle):
        return np.ones_like(np.asarray(cos_angle, dtype=float))

    def relative_angles(self, rng, size):
        return rng.uniform(-np.pi, np.pi, size)


class PolynomialCosine(ScatterKernel):
    """
    Kernel :math:`k(v, w) = c\\,(1 + (v \\cdot w)^2)`, with :math:`c` fixed by
    the normalization at construction.

    Relative angles are drawn by rejection against the uniform envelope
    :math:`2c`, which accepts three draws out of four on average.
    """
    name = 'polynomial-cosine'

    def __init__(self):
        mean = quad(lambda theta: 1 + np.cos(theta)**2, 0, 2 * np.pi,
                    epsabs=1e-14, epsrel=1e-14)[0] / (2 * np.pi)
        self.c = 1 / mean
        super().__init__()

    def density(self, cos_angle):
        return self.c * (1 + np.asarray(cos_angle, dtype=float)**2)

    def relative_angles(self, rng, size):
        out = np.empty(size)
        filled = 0
        while filled < size:
            n_draw = int((size - filled) / 0.75 * 1.1) + 16
            theta = rng.uniform(-np.pi, np.pi, n_draw)
            accept = rng.random(n_draw) * 2 < 1 + np.cos(theta)**2
            keep = theta[accept][:size - filled]
            out[filled:filled + len(keep)] = keep
            filled += len(keep)
        return out


_KERNELS = {cls.name: cls for cls in (Isotropic, PolynomialCosine)}


def scatter_kernel(name):
    """
    Scattering kernel by name, ``'isotropic'`` or ``'polynomial-cosine'``.
    """
    try:
        return _KERNELS[name]()
    except KeyError:
        raise ConfigurationError('unknown scattering kernel {0!r}, expected '
                                 'one of {1}'.format(name, sorted(_KERNELS)))


def sample_scatter(kernel, incoming, rng):
    """
    Outgoing direction angles after scattering.

    Parameters
    ----------
    kernel : `~holegas.ScatterKernel`
    incoming : float or `~numpy.ndarray`
        Incoming angles in radians
    rng : `~numpy.random.Generator`

    Returns
    -------
    outgoing : `~numpy.ndarray`
        Angles in ``[0, 2 pi)`` with density ``k(v, .) / 2 pi``
    """
    incoming = np.atleast_1d(np.asarray(incoming, dtype=float))
    relative = kernel.relative_angles(rng, incoming.size)
    return np.mod(incoming.ravel() + relative, 2 * np.pi).reshape(
        incoming.shape)


class ParticleState(object):
    """
    Positions, direction angles, ages and clocks of a group of particles.
    """
    def __init__(self, positions, angles, ages):
        self.positions = np.asarray(positions, dtype=float)
        self.angles = np.asarray(angles, dtype=float)
        self.ages = np.asarray(ages, dtype=float)
        self.times = np.zeros(len(self.angles))
        self.alive = np.ones(len(self.angles), dtype=bool)
        self.death_times = np.full(len(self.angles), np.inf)

    def __len__(self):
        return len(self.angles)

    @property
    def directions(self):
        return direction_vectors(self.angles)

    def absorb(self, index, when):
        assert np.all(self.alive[index]), 'absorbed particle resurrected'
        self.alive[index] = False
        self.death_times[index] = when

    def check(self, config):
        assert np.all(self.ages >= 0), 'negative age'
        assert not np.any(config.in_hole(self.positions[self.alive])), \
            'live particle inside a hole'
        assert np.all(np.isinf(self.death_times[self.alive])), \
            'live particle with a death time'


@dataclass(frozen=True)
class SimulationConfig:
    """
    Parameters of a Monte Carlo run.

    Attributes
    ----------
    sigma : float
        Collision frequency, zero for free flight
    lattice : `~holegas.LatticeConfig`
    n_particles : int
    horizon : float
        Final time ``T``
    n_grid : int
        Number of points of the uniform output grid on ``[0, T]``
    kernel : str
        Scattering kernel name
    initial_age : str
        ``'exponential'`` (ages drawn from Exp(sigma)) or ``'zero'``
    initial : str
        ``'cell'`` (uniform on the fundamental cell) or ``'box'`` (uniform on
        a square of side ``box_size`` centered at the origin)
    box_size : float
    checkpoints : tuple
        Times in ``(0, T)`` at which age histograms are recorded
    age_bins : int
        Number of age bins on ``[0, 2 t]`` for the checkpoint ``t``
    n_partitions : int, optional
        Random stream partitions, by default ``conf.n_partitions``
    """
    sigma: float
    lattice: LatticeConfig
    n_particles: int
    horizon: float
    n_grid: int = 101
    kernel: str = 'isotropic'
    initial_age: str = 'exponential'
    initial: str = 'cell'
    box_size: float = 1.0
    checkpoints: tuple = field(default=())
    age_bins: int = 40
    n_partitions: int = None

    def __post_init__(self):
        if self.sigma < 0:
            raise ConfigurationError('sigma must be non-negative, got '
                                     '{0}'.format(self.sigma))
        if int(self.n_particles) < 1:
            raise ConfigurationError('n_particles must be at least 1')
        if not self.horizon > 0:
            raise ConfigurationError('horizon must be positive')
        if int(self.n_grid) < 2:
            raise ConfigurationError('n_grid must be at least 2')
        if self.initial_age not in ('exponential', 'zero'):
            raise ConfigurationError('initial_age must be "exponential" or '
                                     '"zero", got {0!r}'
                                     .format(self.initial_age))
        if self.initial not in ('cell', 'box'):
            raise ConfigurationError('initial must be "cell" or "box", got '
                                     '{0!r}'.format(self.initial))
        if self.initial == 'box' and not self.box_size > 0:
            raise ConfigurationError('box_size must be positive')
        for c in self.checkpoints:
            if not 0 < c < self.horizon:
                raise ConfigurationError('checkpoint {0} outside (0, {1})'
                                         .format(c, self.horizon))
        if self.kernel not in _KERNELS:
            raise ConfigurationError('unknown scattering kernel {0!r}'
                                     .format(self.kernel))

    @property
    def t_grid(self):
        return np.linspace(0, self.horizon, int(self.n_grid))

    def age_edges(self, checkpoint):
        return np.linspace(0, 2 * checkpoint, int(self.age_bins) + 1)

    def to_dict(self):
        return dict(sigma=self.sigma, lattice=self.lattice.to_dict(),
                    n_particles=int(self.n_particles), horizon=self.horizon,
                    n_grid=int(self.n_grid), kernel=self.kernel,
                    initial_age=self.initial_age, initial=self.initial,
                    box_size=self.box_size,
                    checkpoints=list(self.checkpoints),
                    age_bins=int(self.age_bins),
                    n_partitions=self.n_partitions)

    @classmethod
    def from_dict(cls, params):
        params = dict(params)
        params['lattice'] = LatticeConfig(**params['lattice'])
        params['checkpoints'] = tuple(params.get('checkpoints', ()))
        return cls(**params)


class SurvivalCurve(object):
    """
    Monte Carlo surviving fraction on a time grid.
    """
    def __init__(self, t_grid, counts, n_particles, seed=None, config=None,
                 age_histograms=None):
        """
        Parameters
        ----------
        t_grid : `~numpy.ndarray`
            Output times
        counts : `~numpy.ndarray`
            Number of particles alive at each output time
        n_particles : int
            Initial number of particles
        seed : int, optional
        config : dict, optional
            Echo of the run configuration
        age_histograms : dict, optional
            Checkpoint time to ``(edges, counts)``
        """
        self.t_grid = np.asarray(t_grid, dtype=float)
        self.counts = np.asarray(counts)
        self.n_particles = int(n_particles)
        self.seed = seed
        self.config = config or {}
        self.age_histograms = age_histograms or {}

    def __repr__(self):
        return '<SurvivalCurve n_particles={0} seed={1} horizon={2}>'.format(
            self.n_particles, self.seed, self.t_grid[-1])

    @classmethod
    def from_fractions(cls, t_grid, survival, n_particles, **kwargs):
        """
        Curve with given surviving fractions, for synthetic inputs.
        """
        counts = np.asarray(survival, dtype=float) * n_particles
        return cls(t_grid, counts, n_particles, **kwargs)

    @property
    def survival(self):
        return self.counts / self.n_particles

    @property
    def stderr(self):
        """
        Binomial standard error of the surviving fraction.
        """
        s = self.survival
        return np.sqrt(s * (1 - s) / self.n_particles)

    def age_density(self, checkpoint):
        """
        Age density at ``checkpoint`` per initial particle.

        Returns
        -------
        centers, density : `~numpy.ndarray`
        """
        edges, counts = self.age_histograms[checkpoint]
        widths = np.diff(edges)
        centers = 0.5 * (edges[1:] + edges[:-1])
        return centers, counts / (self.n_particles * widths)

    def to_table(self):
        """
        Table with columns ``t, survival, stderr``.
        """
        return Table([self.t_grid, self.survival, self.stderr],
                     names=('t', 'survival', 'stderr'))

    def age_table(self):
        """
        Table with columns ``t_checkpoint, s, density``.
        """
        rows = []
        for checkpoint in sorted(self.age_histograms):
            centers, density = self.age_density(checkpoint)
            rows.extend(zip(np.full(len(centers), checkpoint), centers,
                            density))
        return Table(rows=rows or None, names=('t_checkpoint', 's', 'density'),
                     dtype=(float, float, float))


@dataclass(frozen=True)
class RateFit:
    """
    Log-linear fit of a survival curve.

    Attributes
    ----------
    slope : float
        Decay exponent estimate
    stderr : float
        Standard error of the slope
    intercept : float
    rms_residual : float
        Root-mean-square residual of the log survival
    min_count : float
        Survivor count of the weakest bin of the window
    window : tuple
    """
    slope: float
    stderr: float
    intercept: float
    rms_residual: float
    min_count: float
    window: tuple


def _initial_state(rng, size, config):
    box_size = config.box_size if config.initial == 'box' else None
    positions, angles = sample_rays(rng, size, config.lattice, box_size)
    if config.initial_age == 'exponential' and config.sigma > 0:
        ages = rng.exponential(1 / config.sigma, size)
    else:
        ages = np.zeros(size)
    return ParticleState(positions, angles, ages)


def _run_partition(rng, size, config, kernel):
    """
    Follow ``size`` particles to the horizon; returns the survivor counts on
    the output grid and the age histogram counts.
    """
    state = _initial_state(rng, size, config)
    horizon = config.horizon
    checkpoints = np.asarray(config.checkpoints, dtype=float)
    hist = {c: np.zeros(int(config.age_bins), dtype=np.int64)
            for c in config.checkpoints}

    active = np.arange(size)
    while active.size:
        left = horizon - state.times[active]
        if config.sigma > 0:
            flight = rng.exponential(1 / config.sigma, active.size)
        else:
            flight = np.full(active.size, np.inf)
        reach = np.minimum(flight, left)
        distance = free_paths(state.positions[active],
                              state.directions[active], config.lattice,
                              caps=reach)
        hit = distance < reach
        segment = np.where(hit, distance, reach)

        for c in checkpoints:
            start = state.times[active]
            inside = (start <= c) & (c < start + segment)
            ages = state.ages[active[inside]] + (c - start[inside])
            hist[c] += np.histogram(ages, config.age_edges(c))[0]

        state.absorb(active[hit], state.times[active[hit]] + distance[hit])

        scatter = ~hit & (flight < left)
        moving = active[scatter]
        state.positions[moving] += (flight[scatter, np.newaxis] *
                                    state.directions[moving])
        state.angles[moving] = sample_scatter(kernel, state.angles[moving], rng)
        state.times[moving] += flight[scatter]
        state.ages[moving] = 0

        finished = active[~hit & ~scatter]
        state.times[finished] = horizon
        active = moving
    state.check(config.lattice)

    counts = np.array([np.count_nonzero(state.death_times > t)
                       for t in config.t_grid])
    return counts, hist


def simulate(config, seed, threads=None):
    """
    Run the Monte Carlo simulation.

    Every particle starts uniformly outside the holes with a uniform
    direction and an age drawn from the initial age density. It then
    alternates exact free flights, bounded by an Exp(sigma) scattering
    flight and the time left, with scattering events that redraw its
    direction from the kernel and reset its age. A particle whose flight
    meets a hole first is absorbed.

    Parameters
    ----------
    config : `~holegas.SimulationConfig`
    seed : int
        Run seed
    threads : int, optional
        Worker threads, ``0`` for one per CPU; the result does not depend on
        it

    Returns
    -------
    curve : `~holegas.SurvivalCurve`
    """
    kernel = scatter_kernel(config.kernel)

    def run(rng, k, size):
        return _run_partition(rng, size, config, kernel)

    parts = map_partitions(run, int(config.n_particles), seed,
                           n_partitions=config.n_partitions, threads=threads)
    counts = np.zeros(int(config.n_grid), dtype=np.int64)
    hist = {c: np.zeros(int(config.age_bins), dtype=np.int64)
            for c in config.checkpoints}
    for part_counts, part_hist in parts:
        counts += part_counts
        for c in hist:
            hist[c] += part_hist[c]
    curve = SurvivalCurve(config.t_grid, counts, config.n_particles,
                          seed=seed, config=config.to_dict(),
                          age_histograms={c: (config.age_edges(c), hist[c])
                                          for c in hist})
    log.info('simulated {0} particles (sigma={1}, epsilon={2}): survival '
             '{3:.4g} at t={4}'.format(config.n_particles, config.sigma,
                                       config.lattice.epsilon,
                                       curve.survival[-1], config.horizon))
    return curve


def fit_rate(curve, window, min_count=100):
    """
    Least-squares slope of the log survival on a time window.

    Parameters
    ----------
    curve : `~holegas.SurvivalCurve`
    window : tuple
        Closed interval ``(t_start, t_end)`` within the curve grid
    min_count : float
        Required number of survivors in every bin of the window

    Returns
    -------
    fit : `~holegas.RateFit`

    Raises
    ------
    InsufficientStatisticsError
        If a bin of the window has fewer than ``min_count`` survivors
    """
    t0, t1 = window
    if t0 < curve.t_grid[0] or t1 > curve.t_grid[-1] or not t0 < t1:
        raise DomainError('window {0} is not inside the curve grid'
                          .format(tuple(window)))
    mask = (curve.t_grid >= t0) & (curve.t_grid <= t1)
    if np.count_nonzero(mask) < 3:
        raise DomainError('window {0} holds fewer than three grid points'
                          .format(tuple(window)))
    counts = curve.counts[mask]
    if counts.min() < min_count:
        raise InsufficientStatisticsError(
            'only {0} survivors in the weakest bin of window {1}, {2} '
            'required'.format(counts.min(), tuple(window), min_count))
    t = curve.t_grid[mask]
    log_s = np.log(curve.survival[mask])
    fit = linregress(t, log_s)
    residual = log_s - (fit.intercept + fit.slope * t)
    return RateFit(slope=float(fit.slope), stderr=float(fit.stderr),
                   intercept=float(fit.intercept),
                   rms_residual=float(np.sqrt(np.mean(residual**2))),
                   min_count=float(counts.min()), window=(t0, t1))


def survivor_window(curve, t_start, min_count=100):
    """
    Widest window ``(t_start, t_end)`` whose bins all hold at least
    ``min_count`` survivors.

    Returns
    -------
    window : tuple

    Raises
    ------
    InsufficientStatisticsError
        If fewer than three grid points qualify
    """
    mask = curve.t_grid >= t_start
    t = curve.t_grid[mask]
    short = np.nonzero(curve.counts[mask] < min_count)[0]
    n_ok = short[0] if short.size else len(t)
    if n_ok < 3:
        raise InsufficientStatisticsError(
            'fewer than three bins after t={0} hold {1} survivors'
            .format(t_start, min_count))
    return (float(t[0]), float(t[n_ok - 1]))
