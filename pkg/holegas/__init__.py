# Licensed under a 3-clause BSD style license - see LICENSE.rst
try:
    from .version import version as __version__
except ImportError:
    __version__ = ''

from astropy import config as _config


class Conf(_config.ConfigNamespace):
    """
    Configuration parameters for `holegas`.
    """
    tail_cutoff = _config.ConfigItem(
        1e4, 'Time beyond which the free path density is replaced by its '
             'inverse-cube tail', cfgtype='float')
    quad_tolerance = _config.ConfigItem(
        1e-10, 'Absolute tolerance of the quadratures defining p and pdot',
        cfgtype='float')
    laplace_tolerance = _config.ConfigItem(
        1e-13, 'Absolute tolerance of the Laplace-type integrals of p',
        cfgtype='float')
    singular_switch_width = _config.ConfigItem(
        1e-4, 'Half-width around t=1/2 and t=1 inside which the logarithmic '
              'terms of the free path density are expanded in series',
        cfgtype='float')
    series_threshold = _config.ConfigItem(
        4.0, 'Time above which the free path density is evaluated through '
             'its large-time expansion', cfgtype='float')
    path_cap = _config.ConfigItem(
        100.0, 'Default maximum traced free path (macroscopic units)',
        cfgtype='float')
    n_partitions = _config.ConfigItem(
        16, 'Number of random stream partitions used by Monte Carlo '
            'routines', cfgtype='integer')
    ray_batch = _config.ConfigItem(
        4096, 'Number of rays traversed together by the vectorized lattice '
              'traversal', cfgtype='integer')


conf = Conf()

from .exceptions import *  # noqa
from .free_path import *  # noqa
from .lattice import *  # noqa
from .renewal import *  # noqa
from .rate import *  # noqa
from .transport import *  # noqa
