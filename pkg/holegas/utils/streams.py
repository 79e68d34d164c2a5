# Licensed under a 3-clause BSD style license - see LICENSE.rst
"""
Partitioned, counter-based random streams for the Monte Carlo routines.

Work on ``n`` items is split into a fixed number of contiguous partitions.
Partition ``k`` draws from a Philox generator keyed by the run seed and
jumped ``k + 1`` times, so its stream does not depend on how many threads
execute the partitions or in which order they finish.
"""
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from astropy import log

from .. import conf
from ..exceptions import ConfigurationError

__all__ = ['partition_sizes', 'partition_generator', 'resolve_threads',
           'map_partitions']


def partition_sizes(n, n_partitions=None):
    """
    Sizes of the contiguous partitions of ``n`` items.

    Parameters
    ----------
    n : int
        Number of items
    n_partitions : int, optional
        Number of partitions, by default ``conf.n_partitions``

    Returns
    -------
    sizes : `~numpy.ndarray`
        Integer sizes summing to ``n``
    """
    if n_partitions is None:
        n_partitions = conf.n_partitions
    if int(n_partitions) < 1:
        raise ConfigurationError('n_partitions must be at least 1, got '
                                 '{0}'.format(n_partitions))
    base, extra = divmod(int(n), int(n_partitions))
    sizes = np.full(int(n_partitions), base, dtype=int)
    sizes[:extra] += 1
    return sizes


def partition_generator(seed, k):
    """
    Random generator of partition ``k`` for the run ``seed``.

    Parameters
    ----------
    seed : int
        Non-negative run seed
    k : int
        Partition index

    Returns
    -------
    rng : `~numpy.random.Generator`
    """
    if int(seed) < 0:
        raise ConfigurationError('seed must be non-negative, got '
                                 '{0}'.format(seed))
    return np.random.Generator(np.random.Philox(key=int(seed)).jumped(k + 1))


def resolve_threads(threads):
    """
    Number of worker threads; ``0`` or `None` means one per CPU.
    """
    if threads is None or int(threads) == 0:
        return os.cpu_count() or 1
    if int(threads) < 0:
        raise ConfigurationError('threads must be non-negative, got '
                                 '{0}'.format(threads))
    return int(threads)


def map_partitions(func, n, seed, n_partitions=None, threads=None):
    """
    Apply ``func(rng, k, size)`` to every partition of ``n`` items.

    Parameters
    ----------
    func : callable
        Called with the partition generator, the partition index and the
        partition size
    n : int
        Number of items
    seed : int
        Run seed
    n_partitions : int, optional
        Number of partitions, by default ``conf.n_partitions``
    threads : int, optional
        Number of worker threads, ``0`` for one per CPU

    Returns
    -------
    results : list
        Return values of ``func``, in partition order
    """
    sizes = partition_sizes(n, n_partitions)
    workers = min(resolve_threads(threads), len(sizes))

    def run(k):
        result = func(partition_generator(seed, k), k, int(sizes[k]))
        log.debug('partition {0}/{1} done ({2} items)'.format(
            k + 1, len(sizes), sizes[k]))
        return result

    if workers == 1:
        return [run(k) for k in range(len(sizes))]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, range(len(sizes))))
