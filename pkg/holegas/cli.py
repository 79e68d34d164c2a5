# Licensed under a 3-clause BSD style license - see LICENSE.rst
"""
Command line interface.

Every sub-command writes its tables to ``--out-dir`` together with one JSON
sidecar per table, which records everything needed to run it again with
``holegas --replay <sidecar>``.
"""
import argparse
import os
import sys
from contextlib import ExitStack
from dataclasses import dataclass, field

import numpy as np
from astropy import log
from astropy.table import Table

from . import __version__, conf
from .acceptance import (check_pdist_table, check_rate_table, crossing_time,
                         relative_l1, results_table, run_acceptance)
from .exceptions import (ConfigurationError, DomainError, HolegasError,
                         NumericalError, UsageError)
from .free_path import tabulate
from .lattice import LatticeConfig, sample_empirical
from .rate import asymptotic_diagnostics, c_sigma, find_xi
from .renewal import (RenewalKernel, collisionless_mass, convolution_powers,
                      mu_solver, solve_volterra)
from .transport import (SimulationConfig, fit_rate, simulate,
                        survivor_window)
from .utils.io import (read_sidecar, read_table, sidecar_path, write_sidecar,
                       write_table)

__all__ = ['RunConfig', 'main', 'cmd_pdist', 'cmd_fpl_sample',
           'cmd_renewal', 'cmd_rate', 'cmd_simulate', 'cmd_compare',
           'cmd_verify']

# Options that describe how a run is executed rather than what it computes
_EXECUTION_OPTIONS = ('command', 'seed', 'threads', 'out_dir', 'replay',
                      'verbose', 'debug')

# Configuration items recorded with every run
_NUMERICS = ('tail_cutoff', 'quad_tolerance', 'laplace_tolerance',
             'singular_switch_width', 'series_threshold', 'path_cap',
             'n_partitions', 'ray_batch')

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


@dataclass
class RunConfig:
    """
    Everything a sub-command needs, and what its sidecars record.

    Attributes
    ----------
    command : str
        Sub-command name
    parameters : dict
        Command specific parameters, including the output ``format``
    seed : int
    threads : int
        Worker threads, ``0`` for one per CPU; results do not depend on it
    out_dir : str
    outputs : list
        Files written so far
    """
    command: str
    parameters: dict
    seed: int = 0
    threads: int = 0
    out_dir: str = '.'
    outputs: list = field(default_factory=list)

    @classmethod
    def from_args(cls, args):
        parameters = {key: value for key, value in vars(args).items()
                      if key not in _EXECUTION_OPTIONS}
        parameters['numerics'] = {name: getattr(conf, name)
                                  for name in _NUMERICS}
        return cls(command=args.command, parameters=parameters,
                   seed=args.seed, threads=args.threads, out_dir=args.out_dir)

    @classmethod
    def from_sidecar(cls, path, out_dir):
        """
        Run described by the sidecar ``path``, writing into ``out_dir``.
        """
        descriptor = read_sidecar(path)
        if descriptor['command'] not in COMMANDS:
            raise UsageError('unknown command {0!r}'.format(
                descriptor['command']), filename=path)
        if descriptor['version'] != __version__:
            log.warning('replaying a run of holegas {0} with version {1}'
                        .format(descriptor['version'], __version__))
        return cls(command=descriptor['command'],
                   parameters=descriptor['parameters'],
                   seed=descriptor['seed'], threads=descriptor['threads'],
                   out_dir=out_dir)

    def __getitem__(self, key):
        return self.parameters[key]

    def get(self, key, default=None):
        return self.parameters.get(key, default)

    def numerics(self):
        """
        Context in which the recorded configuration items are in force.
        """
        stack = ExitStack()
        for name, value in self.parameters.get('numerics', {}).items():
            stack.enter_context(conf.set_temp(name, value))
        return stack

    @property
    def fmt(self):
        return self.parameters.get('format', 'csv')

    def write(self, table, stem):
        """
        Write ``table`` as ``<out_dir>/<stem>.<format>``.
        """
        os.makedirs(self.out_dir, exist_ok=True)
        path = os.path.join(self.out_dir, '{0}.{1}'.format(stem, self.fmt))
        self.outputs.append(write_table(table, path, fmt=self.fmt))
        return path

    def finish(self):
        """
        Write the sidecar of every output.
        """
        for path in self.outputs:
            write_sidecar(sidecar_path(path), self.command, self.parameters,
                          self.seed, self.threads, self.outputs)
        for path in self.outputs:
            print(path)


def _distribution(run):
    _positive('table-tmax', run.get('table_tmax', 20.0))
    return tabulate(t_max=run.get('table_tmax', 20.0),
                    n_points=run.get('table_points', 2001))


def _positive(name, value):
    if not value > 0:
        raise UsageError('--{0} must be positive, got {1}'.format(name, value))


def cmd_pdist(run):
    """
    Tabulate the free path law: ``t, p, pdot, upsilon``.
    """
    _positive('tmax', run['tmax'])
    if run['points'] < 2:
        raise UsageError('--points must be at least 2, got {0}'
                         .format(run['points']))
    dist = tabulate(t_max=run['tmax'], n_points=run['points'])
    run.write(dist.to_table(), run['stem'] or 'pdist')
    return EXIT_OK


def cmd_fpl_sample(run):
    """
    Empirical free path survival function of the lattice.
    """
    _positive('tmax', run['tmax'])
    config = LatticeConfig(run['epsilon'], hole_radius=run['hole_radius'],
                           t_cap=run['t_cap'])
    t_grid = np.linspace(0, run['tmax'], run['points'])
    tail = sample_empirical(config, run['samples'], run.seed, t_grid=t_grid,
                            n_partitions=run['partitions'],
                            threads=run.threads)
    run.write(tail.to_table(), run['stem'] or 'fpl_sample')
    return EXIT_OK


def cmd_renewal(run):
    """
    Renewal solution: ``t, psi, survival, M`` and optionally the
    age-structured density ``t, s, mu``.
    """
    _positive('step', run['step'])
    _positive('horizon', run['horizon'])
    kernel = RenewalKernel(run['sigma'], _distribution(run))
    if run['method'] == 'volterra':
        curve = solve_volterra(kernel, run['step'], run['horizon'],
                               scale=run['mass'])
    else:
        curve = convolution_powers(kernel, run['terms'], run['step'],
                                   run['horizon'], scale=run['mass'])
    stem = run['stem'] or 'renewal'
    run.write(curve.to_table(mass=True), stem)
    if run['age_density']:
        grid = mu_solver(kernel, run['step'], run['horizon'])
        run.write(grid.to_table(), stem + '_mu')
    return EXIT_OK


def cmd_rate(run):
    """
    Characteristic exponents: ``sigma, xi, lambda, log_lambda, residual,
    c_multiplier``, and the trends over ``--sweep``.
    """
    sigmas = run['sigma'] or ([] if run['sweep'] else [1.0])
    stem = run['stem'] or 'rate'
    if sigmas:
        rows = []
        for sigma in sigmas:
            _positive('sigma', sigma)
            rate = find_xi(sigma)
            row = rate.to_row()
            row['lambda'] = rate.lam
            row['c_multiplier'] = c_sigma(rate)
            rows.append(row)
        table = Table(rows=rows, names=('sigma', 'xi', 'lambda', 'log_lambda',
                                        'residual', 'c_multiplier'))
        run.write(table, stem)
    if run['sweep']:
        diag = asymptotic_diagnostics(sorted(run['sweep']),
                                      threads=run.threads)
        log.info('small sigma trend: {0}, large sigma trend: {1}'.format(
            diag.small_sigma_trend, diag.large_sigma_trend))
        run.write(diag.to_table(), stem + '_sweep')
    return EXIT_OK


def cmd_simulate(run):
    """
    Monte Carlo survival curve ``t, survival, stderr``, the age histograms
    ``t_checkpoint, s, density`` and an optional decay rate fit.
    """
    config = SimulationConfig(
        sigma=run['sigma'],
        lattice=LatticeConfig(run['epsilon'], hole_radius=run['hole_radius'],
                              t_cap=run['t_cap']),
        n_particles=run['particles'], horizon=run['horizon'],
        n_grid=run['points'], kernel=run['kernel'],
        initial_age=run['initial_age'], initial=run['initial'],
        box_size=run['box_size'], checkpoints=tuple(run['checkpoints']),
        age_bins=run['age_bins'], n_partitions=run['partitions'])
    curve = simulate(config, run.seed, threads=run.threads)
    stem = run['stem'] or 'simulate'
    run.write(curve.to_table(), stem)
    if config.checkpoints:
        run.write(curve.age_table(), stem + '_ages')
    if run['fit_start'] is not None:
        fit = fit_rate(curve, survivor_window(curve, run['fit_start']))
        table = Table(rows=[(fit.slope, fit.stderr, fit.intercept,
                             fit.rms_residual, fit.min_count) + fit.window],
                      names=('slope', 'stderr', 'intercept', 'rms_residual',
                             'min_count', 't_start', 't_end'))
        run.write(table, stem + '_fit')
    return EXIT_OK


def _reference_column(table, path):
    for name in ('survival', 'p', 'phi_hat'):
        if name in table.colnames:
            return np.asarray(table[name], dtype=float)
    raise UsageError('reference has none of the columns survival, p, '
                     'phi_hat', filename=path, line=1)


def cmd_compare(run):
    """
    Error metrics between a Monte Carlo survival curve and a reference
    (renewal, pdist or fpl-sample output), or the collisionless survival
    p(t) together with the time the curve falls below it for good.
    """
    if bool(run['reference']) == bool(run['collisionless']):
        raise UsageError('compare needs exactly one of --reference and '
                         '--collisionless')
    mc = read_table(run['mc'], required=('t', 'survival', 'stderr'))
    t = np.asarray(mc['t'], dtype=float)
    if run['collisionless']:
        expected = collisionless_mass(t, _distribution(run))
    else:
        ref = read_table(run['reference'], required=('t',))
        reference = _reference_column(ref, run['reference'])
        t_ref = np.asarray(ref['t'], dtype=float)
        if t[0] < t_ref[0] or t[-1] > t_ref[-1] * (1 + 1e-12):
            raise UsageError('reference covers [{0}, {1}] but the curve '
                             'needs [{2}, {3}]'.format(t_ref[0], t_ref[-1],
                                                       t[0], t[-1]),
                             filename=run['reference'])
        expected = np.interp(t, t_ref, reference)
    survival = np.asarray(mc['survival'], dtype=float)
    stderr = np.asarray(mc['stderr'], dtype=float)
    gap = np.abs(survival - expected)
    noisy = stderr > 0
    table = Table(rows=[(relative_l1(t, survival, expected),
                         float(gap.max()),
                         float(np.max(gap[noisy] / stderr[noisy],
                                      initial=0)),
                         float(np.mean(gap[noisy] <= 3 * stderr[noisy]))
                         if np.any(noisy) else 1.0)],
                  names=('relative_l1', 'sup_gap', 'max_z', 'within_3_stderr'))
    if run['collisionless']:
        table['crossing_time'] = [crossing_time(t, survival, expected)]
    run.write(table, run['stem'] or 'compare')
    return EXIT_OK


def _verify_file(path):
    descriptor = read_sidecar(sidecar_path(path))
    checks = {'pdist': check_pdist_table, 'rate': check_rate_table}
    if descriptor['command'] not in checks:
        raise UsageError('no re-verification for {0!r} outputs'.format(
            descriptor['command']), filename=path)
    return checks[descriptor['command']](read_table(path))


def cmd_verify(run):
    """
    Run the acceptance suite, or re-verify ``--check`` files; exits with 1
    on any failure.
    """
    if run['check']:
        results = [_verify_file(path) for path in run['check']]
    else:
        results = run_acceptance(quick=run['quick'], seed=run.seed,
                                 threads=run.threads, only=run['only'])
    for result in results:
        print('{0:>3} {1:<28} {2}  {3}'.format(
            result.number, result.name, 'PASS' if result.passed else 'FAIL',
            result.detail))
    run.write(results_table(results), run['stem'] or 'verify')
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED


COMMANDS = {'pdist': cmd_pdist, 'fpl-sample': cmd_fpl_sample,
            'renewal': cmd_renewal, 'rate': cmd_rate,
            'simulate': cmd_simulate, 'compare': cmd_compare,
            'verify': cmd_verify}


def _table_options(parser):
    parser.add_argument('--table-tmax', type=float, default=20.0,
                        help='horizon of the free path law table')
    parser.add_argument('--table-points', type=int, default=2001,
                        help='nodes of the free path law table')


def _lattice_options(parser):
    parser.add_argument('--epsilon', type=float, default=1e-2,
                        help='lattice period')
    parser.add_argument('--hole-radius', type=float, default=None,
                        help='hole radius, by default epsilon**2')
    parser.add_argument('--t-cap', type=float, default=None,
                        help='longest traced free path')
    parser.add_argument('--partitions', type=int, default=None,
                        help='random stream partitions')


def build_parser():
    parser = argparse.ArgumentParser(
        prog='holegas',
        description='Mass decay of particles scattering through a periodic '
                    'lattice of absorbing holes.')
    parser.add_argument('--version', action='version',
                        version='%(prog)s ' + str(__version__))
    parser.add_argument('--seed', type=int, default=0, help='run seed')
    parser.add_argument('--threads', type=int, default=0,
                        help='worker threads, 0 for one per CPU')
    parser.add_argument('--out-dir', default='.', help='output directory')
    parser.add_argument('--format', choices=('csv', 'json'), default='csv',
                        help='format of the data files')
    parser.add_argument('--replay', metavar='SIDECAR',
                        help='run again the command recorded in a sidecar')
    parser.add_argument('-v', '--verbose', action='store_true',
                        help='log progress')
    parser.add_argument('--debug', action='store_true',
                        help='log numerical diagnostics')
    sub = parser.add_subparsers(dest='command')

    pdist = sub.add_parser('pdist', help='tabulate the free path law')
    pdist.add_argument('--tmax', type=float, default=20.0)
    pdist.add_argument('--points', type=int, default=2001)

    fpl = sub.add_parser('fpl-sample',
                         help='empirical free path law of the lattice')
    _lattice_options(fpl)
    fpl.add_argument('--samples', type=int, default=10**5)
    fpl.add_argument('--tmax', type=float, default=10.0)
    fpl.add_argument('--points', type=int, default=1001)

    renewal = sub.add_parser('renewal', help='solve the renewal equation')
    renewal.add_argument('--sigma', type=float, default=1.0)
    renewal.add_argument('--step', type=float, default=0.01)
    renewal.add_argument('--horizon', type=float, default=10.0)
    renewal.add_argument('--method', choices=('volterra', 'series'),
                         default='volterra')
    renewal.add_argument('--terms', type=int, default=100,
                         help='convolution powers summed by --method series')
    renewal.add_argument('--mass', type=float, default=1.0,
                         help='initial mass')
    renewal.add_argument('--age-density', action='store_true',
                         help='also write the age-structured density')
    _table_options(renewal)

    rate = sub.add_parser('rate', help='characteristic decay exponents')
    rate.add_argument('--sigma', type=float, nargs='*', default=[])
    rate.add_argument('--sweep', type=float, nargs='*', default=[],
                      help='collision frequencies of a trend sweep')

    sim = sub.add_parser('simulate', help='Monte Carlo transport')
    _lattice_options(sim)
    sim.add_argument('--sigma', type=float, default=1.0)
    sim.add_argument('--particles', type=int, default=10**5)
    sim.add_argument('--horizon', type=float, default=10.0)
    sim.add_argument('--points', type=int, default=101)
    sim.add_argument('--kernel', choices=('isotropic', 'polynomial-cosine'),
                     default='isotropic')
    sim.add_argument('--initial-age', choices=('exponential', 'zero'),
                     default='exponential')
    sim.add_argument('--initial', choices=('cell', 'box'), default='cell')
    sim.add_argument('--box-size', type=float, default=1.0)
    sim.add_argument('--checkpoints', type=float, nargs='*', default=[])
    sim.add_argument('--age-bins', type=int, default=40)
    sim.add_argument('--fit-start', type=float, default=None,
                     help='fit the decay rate from this time on')

    compare = sub.add_parser('compare',
                             help='compare a survival curve to a reference')
    compare.add_argument('--mc', required=True,
                         help='simulate output')
    compare.add_argument('--reference', default=None,
                         help='renewal, pdist or fpl-sample output')
    compare.add_argument('--collisionless', action='store_true',
                         help='compare with the free path survival p(t)')
    _table_options(compare)

    verify = sub.add_parser('verify', help='run the acceptance checks')
    verify.add_argument('--quick', action='store_true',
                        help='reduced problem sizes')
    verify.add_argument('--only', type=int, nargs='*', default=None,
                        help='numbers of the checks to run')
    verify.add_argument('--check', nargs='*', default=[], metavar='FILE',
                        help='re-verify pdist or rate outputs instead')

    for command in sub.choices.values():
        command.add_argument('--stem', default=None,
                             help='base name of the output files')
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.debug:
        log.setLevel('DEBUG')
    elif args.verbose:
        log.setLevel('INFO')
    else:
        log.setLevel('WARNING')

    try:
        if args.replay:
            run = RunConfig.from_sidecar(args.replay, args.out_dir)
        elif args.command is None:
            parser.print_usage(sys.stderr)
            raise UsageError('a sub-command or --replay is required')
        else:
            run = RunConfig.from_args(args)
        with run.numerics():
            status = COMMANDS[run.command](run)
        run.finish()
    except (UsageError, DomainError, ConfigurationError) as exc:
        print('holegas: error: {0}'.format(exc), file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, HolegasError) as exc:
        print('holegas: numerical failure: {0}'.format(exc), file=sys.stderr)
        return EXIT_NUMERICAL
    return status


if __name__ == '__main__':
    sys.exit(main())
