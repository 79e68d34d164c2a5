# Licensed under a 3-clause BSD style license - see LICENSE.rst
"""
Exact free path lengths in the plane perforated by the holes of radius
``hole_radius`` centered on the lattice of period ``epsilon``, and their
empirical distribution.
"""
import numpy as np
import astropy.units as u
from astropy import log
from astropy.table import Table

from . import conf
from .exceptions import ConfigurationError, DomainError
from .utils.streams import map_partitions

__all__ = ['LatticeConfig', 'FreePathSample', 'EmpiricalTail',
           'direction_vectors', 'free_path', 'free_paths',
           'sample_positions', 'sample_rays', 'sample_free_paths',
           'sample_empirical', 'ks_distance']

# Largest number of (ray, column) pairs examined at once by the traversal
_WINDOW_ELEMENTS = 1 << 20


class LatticeConfig(object):
    """
    Geometry of the perforated plane.
    """
    def __init__(self, epsilon, hole_radius=None, t_cap=None):
        """
        Parameters
        ----------
        epsilon : float
            Lattice period
        hole_radius : float, optional
            Radius of the holes, by default ``epsilon**2``
        t_cap : float, optional
            Longest traced free path, by default ``conf.path_cap``
        """
        epsilon = float(epsilon)
        if not epsilon > 0:
            raise ConfigurationError('epsilon must be positive, got '
                                     '{0}'.format(epsilon))
        if hole_radius is None:
            hole_radius = epsilon**2
        if t_cap is None:
            t_cap = conf.path_cap
        hole_radius = float(hole_radius)
        if not 0 < hole_radius < epsilon / 2:
            raise ConfigurationError('hole_radius must lie in (0, epsilon/2), '
                                     'got hole_radius={0}, epsilon={1}'
                                     .format(hole_radius, epsilon))
        if not float(t_cap) > 0:
            raise ConfigurationError('t_cap must be positive, got '
                                     '{0}'.format(t_cap))
        self.epsilon = epsilon
        self.hole_radius = hole_radius
        self.t_cap = float(t_cap)

    def __repr__(self):
        return ('LatticeConfig(epsilon={0!r}, hole_radius={1!r}, '
                't_cap={2!r})').format(self.epsilon, self.hole_radius,
                                       self.t_cap)

    def __eq__(self, other):
        return (isinstance(other, LatticeConfig) and
                self.to_dict() == other.to_dict())

    @property
    def scaled_radius(self):
        """
        Hole radius in units of the lattice period.
        """
        return self.hole_radius / self.epsilon

    @property
    def hole_fraction(self):
        """
        Fraction of the fundamental cell covered by holes.
        """
        return np.pi * self.scaled_radius**2

    def in_hole(self, positions):
        """
        Whether points lie in a (closed) hole.

        Parameters
        ----------
        positions : `~numpy.ndarray`
            Points with shape ``(..., 2)``

        Returns
        -------
        inside : `~numpy.ndarray` of bool
        """
        y = np.asarray(positions, dtype=float) / self.epsilon
        offset = y - np.round(y)
        return np.hypot(offset[..., 0], offset[..., 1]) <= self.scaled_radius

    def to_dict(self):
        return dict(epsilon=self.epsilon, hole_radius=self.hole_radius,
                    t_cap=self.t_cap)


class FreePathSample(object):
    """
    Starting points, directions and free path lengths of traced rays.
    """
    def __init__(self, positions, directions, path_lengths, t_cap):
        """
        Parameters
        ----------
        positions : `~numpy.ndarray`
            Starting points, shape ``(n, 2)``
        directions : `~numpy.ndarray`
            Unit directions, shape ``(n, 2)``
        path_lengths : `~numpy.ndarray`
            Free path lengths, equal to ``t_cap`` for rays without a hit
        t_cap : float
            Trace cap
        """
        self.positions = np.asarray(positions, dtype=float)
        self.directions = np.asarray(directions, dtype=float)
        self.path_lengths = np.asarray(path_lengths, dtype=float)
        self.t_cap = float(t_cap)

    def __len__(self):
        return len(self.path_lengths)

    @property
    def capped(self):
        """
        Mask of the rays that reached the trace cap.
        """
        return self.path_lengths >= self.t_cap


class EmpiricalTail(object):
    """
    Empirical survival function of the scaled free path length,
    :math:`\\hat\\Phi_\\epsilon(t)`, on a fixed output grid.
    """
    def __init__(self, t_grid, phi_hat, n_samples, epsilon, seed):
        self.t_grid = np.asarray(t_grid, dtype=float)
        self.phi_hat = np.asarray(phi_hat, dtype=float)
        self.n_samples = int(n_samples)
        self.epsilon = float(epsilon)
        self.seed = seed

    def __repr__(self):
        return '<EmpiricalTail epsilon={0} n_samples={1} seed={2}>'.format(
            self.epsilon, self.n_samples, self.seed)

    @classmethod
    def from_paths(cls, path_lengths, t_grid, epsilon, seed):
        """
        Build the empirical survival function of ``path_lengths``.
        """
        ordered = np.sort(np.asarray(path_lengths, dtype=float))
        t_grid = np.asarray(t_grid, dtype=float)
        n = len(ordered)
        above = n - np.searchsorted(ordered, t_grid, side='right')
        return cls(t_grid, above / n, n, epsilon, seed)

    @property
    def standard_error(self):
        """
        Binomial standard error of every grid value.
        """
        return np.sqrt(self.phi_hat * (1 - self.phi_hat) / self.n_samples)

    def inverse_t_bounds(self, t_range=(1, 10)):
        """
        Constants :math:`C \\le C'` with
        :math:`C/t \\le \\hat\\Phi_\\epsilon(t) \\le C'/t` on ``t_range``.

        Returns
        -------
        c_lower, c_upper : float
        """
        mask = (self.t_grid >= t_range[0]) & (self.t_grid <= t_range[1])
        scaled = self.t_grid[mask] * self.phi_hat[mask]
        return float(scaled.min()), float(scaled.max())

    def to_table(self):
        """
        Table with columns ``t, phi_hat, n_samples, epsilon, seed``.
        """
        n = len(self.t_grid)
        return Table([self.t_grid, self.phi_hat,
                      np.full(n, self.n_samples),
                      np.full(n, self.epsilon),
                      np.full(n, -1 if self.seed is None else self.seed)],
                     names=('t', 'phi_hat', 'n_samples', 'epsilon', 'seed'))


def direction_vectors(angles):
    """
    Unit vectors pointing along ``angles``.

    Parameters
    ----------
    angles : `~astropy.units.Quantity` or `~numpy.ndarray`
        Angles; plain numbers are taken to be in radians

    Returns
    -------
    directions : `~numpy.ndarray`
        Shape ``angles.shape + (2,)``
    """
    theta = u.Quantity(angles, u.rad).to_value(u.rad)
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def _traverse(px, py, dx, dy, radius, caps):
    """
    Distance to the first hole for rays in lattice units (unit period, holes
    of radius ``radius`` at the integer points), capped at ``caps``.

    The rays are first mapped by the symmetries of the lattice onto
    directions ``(a, b)`` with ``a >= b >= 0``. The ray then crosses every
    column of hole centers ``x = k`` once, and a hole of column ``k`` can
    only be hit if its center is one of the two nearest to the crossing
    point. Columns are swept in windows of growing width until every ray has
    hit a hole or passed its cap.
    """
    px = np.where(dx < 0, -px, px)
    py = np.where(dy < 0, -py, py)
    a, b = np.abs(dx), np.abs(dy)
    swap = b > a
    px, py = np.where(swap, py, px), np.where(swap, px, py)
    a, b = np.where(swap, b, a), np.where(swap, a, b)

    fx = px - np.floor(px)
    fy = py - np.floor(py)
    slope = b / a
    last_column = np.floor(fx + a * caps + radius) + 1
    column_limit = 10 * caps + 10

    out = caps.copy()
    active = np.arange(len(px))
    k_lo = 0
    width = 8
    while active.size:
        assert np.all(k_lo <= column_limit[active]), 'runaway traversal'
        k = k_lo + np.arange(width, dtype=float)
        fxa, fya = fx[active, np.newaxis], fy[active, np.newaxis]
        aa, ba = a[active, np.newaxis], b[active, np.newaxis]
        y_cross = fya + (k - fxa) * slope[active, np.newaxis]
        j_low = np.floor(y_cross)

        best = np.full(y_cross.shape, np.inf)
        for j in (j_low, j_low + 1):
            perp = aa * (j - y_cross)
            along = (k - fxa) * aa + (j - fya) * ba
            disc = radius**2 - perp**2
            entry = along - np.sqrt(np.maximum(disc, 0))
            hit = (disc > 0) & (entry > 0) & (entry < best)
            best = np.where(hit, entry, best)

        column_hit = np.isfinite(best)
        any_hit = column_hit.any(axis=1)
        first = np.argmax(column_hit, axis=1)
        entry = best[np.arange(len(active)), first]
        hit_rays = active[any_hit]
        out[hit_rays] = np.minimum(entry[any_hit], caps[hit_rays])

        finished = any_hit | (k_lo + width > last_column[active])
        active = active[~finished]
        k_lo += width
        if active.size:
            width = int(min(2 * width, max(8, _WINDOW_ELEMENTS // active.size)))
    return out


def free_paths(positions, directions, config, caps=None):
    """
    Free path lengths of many rays.

    Parameters
    ----------
    positions : `~numpy.ndarray`
        Starting points outside the holes, shape ``(n, 2)``
    directions : `~numpy.ndarray`
        Unit directions, shape ``(n, 2)``
    config : `~holegas.LatticeConfig`
    caps : float or `~numpy.ndarray`, optional
        Per-ray trace caps, by default ``config.t_cap``

    Returns
    -------
    lengths : `~numpy.ndarray`
        Distance to the first hole boundary, or the cap when no hole is met
        before it
    """
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    if positions.shape != directions.shape or positions.shape[-1] != 2:
        raise DomainError('positions and directions must both have shape '
                          '(n, 2)')
    norms = np.hypot(directions[:, 0], directions[:, 1])
    if np.any(np.abs(norms - 1) > 1e-9):
        raise DomainError('directions must be unit vectors')
    if np.any(config.in_hole(positions)):
        raise DomainError('starting point inside a hole')
    if caps is None:
        caps = config.t_cap
    caps = np.broadcast_to(np.asarray(caps, dtype=float),
                           (len(positions),)).copy()
    if np.any(~(caps > 0)):
        raise DomainError('trace caps must be positive')

    scaled = positions / config.epsilon
    scaled_caps = caps / config.epsilon
    out = np.empty(len(positions))
    batch = int(conf.ray_batch)
    for start in range(0, len(positions), batch):
        sl = slice(start, start + batch)
        out[sl] = _traverse(scaled[sl, 0], scaled[sl, 1],
                            directions[sl, 0], directions[sl, 1],
                            config.scaled_radius, scaled_caps[sl])
    # rays without a hit report their cap exactly
    return np.where(out >= scaled_caps, caps,
                    np.minimum(config.epsilon * out, caps))


def free_path(x, v, config):
    """
    Free path length of one ray.

    Parameters
    ----------
    x : array-like
        Starting point outside the holes
    v : array-like
        Unit direction
    config : `~holegas.LatticeConfig`

    Returns
    -------
    length : float
        Exact distance from ``x`` along ``v`` to the first hole boundary, or
        ``config.t_cap`` if there is none within the cap

    Examples
    --------
    >>> from holegas import LatticeConfig, free_path
    >>> config = LatticeConfig(0.1)
    >>> round(free_path([0.05, 0], [-1, 0], config), 12)
    0.04
    """
    return float(free_paths(np.asarray(x, dtype=float)[np.newaxis],
                            np.asarray(v, dtype=float)[np.newaxis],
                            config)[0])


def sample_positions(rng, size, config, box_size=None):
    """
    Points uniform on the fundamental cell ``[0, epsilon)**2``, or on the
    square ``[-box_size/2, box_size/2)**2``, outside the holes, by
    rejection.

    Parameters
    ----------
    rng : `~numpy.random.Generator`
    size : int
    config : `~holegas.LatticeConfig`
    box_size : float, optional
        Side of a square centered at the origin to sample instead of the
        fundamental cell

    Returns
    -------
    positions : `~numpy.ndarray`
        Shape ``(size, 2)``
    """
    if box_size is None:
        acceptance = 1 - config.hole_fraction
    else:
        box_size = float(box_size)
        if not box_size > 0:
            raise ConfigurationError('box_size must be positive, got '
                                     '{0}'.format(box_size))
        # upper bound on the covered area: every hole meeting the box
        reach = box_size / 2 + config.hole_radius
        n_side = 2 * np.floor(reach / config.epsilon) + 1
        acceptance = 1 - min(1.0, n_side**2 * np.pi * config.hole_radius**2 /
                             box_size**2)
    if acceptance < 0.5:
        raise ConfigurationError('rejection acceptance {0:.3f} is below 50%, '
                                 'holes too large'.format(acceptance))
    accepted = []
    n_accepted = 0
    while n_accepted < size:
        n_draw = int((size - n_accepted) / acceptance * 1.1) + 16
        if box_size is None:
            trial = config.epsilon * rng.random((n_draw, 2))
        else:
            trial = box_size * (rng.random((n_draw, 2)) - 0.5)
        keep = trial[~config.in_hole(trial)]
        accepted.append(keep)
        n_accepted += len(keep)
    return np.concatenate(accepted)[:size] if accepted else np.empty((0, 2))


def sample_rays(rng, size, config, box_size=None):
    """
    Uniform starting points on the fundamental cell (or on the box of side
    ``box_size``, see `~holegas.sample_positions`) and uniform direction
    angles, drawn in this order from ``rng``.

    Returns
    -------
    positions : `~numpy.ndarray`
        Shape ``(size, 2)``
    angles : `~numpy.ndarray`
        Angles in radians
    """
    positions = sample_positions(rng, size, config, box_size)
    return positions, rng.uniform(0, 2 * np.pi, size)


def sample_free_paths(config, n, seed, n_partitions=None, threads=None):
    """
    Trace ``n`` rays with uniform starting points and directions.

    Parameters
    ----------
    config : `~holegas.LatticeConfig`
    n : int
        Number of rays, at least one
    seed : int
        Run seed
    n_partitions : int, optional
        Number of random stream partitions, by default ``conf.n_partitions``
    threads : int, optional
        Worker threads, ``0`` for one per CPU

    Returns
    -------
    sample : `~holegas.FreePathSample`
    """
    if int(n) < 1:
        raise DomainError('n must be at least 1, got {0}'.format(n))

    def trace(rng, k, size):
        positions, angles = sample_rays(rng, size, config)
        directions = direction_vectors(angles)
        return positions, directions, free_paths(positions, directions, config)

    parts = map_partitions(trace, int(n), seed, n_partitions, threads)
    sample = FreePathSample(np.concatenate([p[0] for p in parts]),
                            np.concatenate([p[1] for p in parts]),
                            np.concatenate([p[2] for p in parts]),
                            config.t_cap)
    log.info('traced {0} free paths at epsilon={1}, {2} reached the cap'
             .format(len(sample), config.epsilon, int(sample.capped.sum())))
    return sample


def sample_empirical(config, n, seed, t_grid=None, n_partitions=None,
                     threads=None):
    """
    Empirical survival function of the free path length.

    Parameters
    ----------
    config : `~holegas.LatticeConfig`
    n : int
        Number of rays, at least one
    seed : int
        Run seed
    t_grid : `~numpy.ndarray`, optional
        Output grid, by default 1001 points on ``[0, 10]``
    n_partitions : int, optional
    threads : int, optional

    Returns
    -------
    tail : `~holegas.EmpiricalTail`
    """
    if t_grid is None:
        t_grid = np.linspace(0, 10, 1001)
    sample = sample_free_paths(config, n, seed, n_partitions=n_partitions,
                               threads=threads)
    return EmpiricalTail.from_paths(sample.path_lengths, t_grid,
                                    config.epsilon, seed)


def ks_distance(empirical, distribution, t_range=None):
    """
    Largest gap between an empirical tail and a reference on its grid.

    Parameters
    ----------
    empirical : `~holegas.EmpiricalTail`
    distribution : callable or `~holegas.EmpiricalTail`
        Reference survival function, for instance a
        `~holegas.PathDistribution`; another `~holegas.EmpiricalTail` must
        share the grid of ``empirical``
    t_range : tuple, optional
        Closed evaluation interval, by default the whole grid

    Returns
    -------
    gap : float
    """
    t_grid = empirical.t_grid
    if t_range is None:
        t_range = (t_grid[0], t_grid[-1])
    mask = (t_grid >= t_range[0]) & (t_grid <= t_range[1])
    if not np.any(mask):
        raise DomainError('t_range {0} does not meet the empirical grid'
                          .format(tuple(t_range)))
    if isinstance(distribution, EmpiricalTail):
        if not np.array_equal(distribution.t_grid, t_grid):
            raise DomainError('empirical tails must share their grid')
        reference = distribution.phi_hat[mask]
    else:
        reference = distribution(t_grid[mask])
    return float(np.max(np.abs(empirical.phi_hat[mask] - reference)))
