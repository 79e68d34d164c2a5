import json
import os
import shutil

import numpy as np
import pytest

from .. import conf
from ..cli import main
from ..free_path import UPSILON_ZERO
from ..utils.io import read_table


def run(tmp_path, *args):
    return main(['--out-dir', str(tmp_path)] + list(args))


@pytest.fixture(scope='module')
def pdist_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp('pdist')
    assert run(out, 'pdist', '--tmax', '5', '--points', '501') == 0
    return out


def test_pdist(pdist_dir):
    table = read_table(str(pdist_dir / 'pdist.csv'))
    assert table.colnames == ['t', 'p', 'pdot', 'upsilon']
    assert len(table) == 501
    assert abs(table['p'][0] - 1) <= 1e-6
    head = (table['t'] > 0) & (table['t'] <= 0.5)
    assert np.all(table['upsilon'][head] == UPSILON_ZERO)


def test_sidecar(pdist_dir):
    with open(pdist_dir / 'pdist.sidecar.json', encoding='utf-8') as fh:
        descriptor = json.load(fh)
    assert descriptor['command'] == 'pdist'
    assert descriptor['parameters']['tmax'] == 5
    assert descriptor['outputs'] == ['pdist.csv']
    assert 'out_dir' not in descriptor['parameters']
    numerics = descriptor['parameters']['numerics']
    assert numerics['tail_cutoff'] == conf.tail_cutoff


def test_replay_is_identical(pdist_dir, tmp_path):
    sidecar = str(pdist_dir / 'pdist.sidecar.json')
    assert run(tmp_path, '--replay', sidecar) == 0
    with open(pdist_dir / 'pdist.csv', 'rb') as fh:
        original = fh.read()
    with open(tmp_path / 'pdist.csv', 'rb') as fh:
        assert fh.read() == original


def test_check_pdist_output(pdist_dir, tmp_path, capsys):
    path = str(pdist_dir / 'pdist.csv')
    assert run(tmp_path, 'verify', '--check', path) == 0
    assert 'PASS' in capsys.readouterr().out


def test_check_spots_tampering(pdist_dir, tmp_path):
    table = read_table(str(pdist_dir / 'pdist.csv'))
    table['p'][100] += 1e-6
    path = tmp_path / 'pdist.csv'
    table.write(str(path), format='ascii.csv')
    shutil.copy(pdist_dir / 'pdist.sidecar.json', tmp_path)
    assert run(tmp_path / 'out', 'verify', '--check', str(path)) == 1


def test_rate(tmp_path):
    assert run(tmp_path, 'rate', '--sigma', '1') == 0
    table = read_table(str(tmp_path / 'rate.csv'))
    assert table.colnames == ['sigma', 'xi', 'lambda', 'log_lambda',
                              'residual', 'c_multiplier']
    assert -1 < table['xi'][0] < 0
    assert table['residual'][0] <= 1e-10
    assert run(tmp_path / 'out', 'verify', '--check',
               str(tmp_path / 'rate.csv')) == 0


def test_json_format(tmp_path):
    assert run(tmp_path, '--format', 'json', 'pdist', '--tmax', '1',
               '--points', '11', '--stem', 'short') == 0
    table = read_table(str(tmp_path / 'short.json'))
    assert len(table) == 11
    assert os.path.exists(tmp_path / 'short.sidecar.json')


def test_renewal_outputs(tmp_path):
    assert run(tmp_path, 'renewal', '--sigma', '1', '--step', '0.05',
               '--horizon', '2', '--age-density') == 0
    curve = read_table(str(tmp_path / 'renewal.csv'))
    assert curve.colnames == ['t', 'psi', 'survival', 'M']
    assert curve['survival'][0] == pytest.approx(1, rel=1e-6)
    ages = read_table(str(tmp_path / 'renewal_mu.csv'))
    assert ages.colnames == ['t', 's', 'mu']


def test_renewal_replay(tmp_path):
    assert run(tmp_path, 'renewal', '--step', '0.05', '--horizon', '2',
               '--table-tmax', '10', '--table-points', '1001') == 0
    sidecar = tmp_path / 'renewal.sidecar.json'
    with open(sidecar, encoding='utf-8') as fh:
        descriptor = json.load(fh)
    assert descriptor['parameters']['table_tmax'] == 10
    assert descriptor['parameters']['table_points'] == 1001
    assert 'numerics' in descriptor['parameters']

    # the recorded configuration is applied for the replay only
    descriptor['parameters']['numerics']['path_cap'] = 50.0
    with open(sidecar, 'w', encoding='utf-8') as fh:
        json.dump(descriptor, fh)
    cap = conf.path_cap
    assert run(tmp_path / 'again', '--replay', str(sidecar)) == 0
    assert conf.path_cap == cap
    with open(tmp_path / 'renewal.csv', 'rb') as fh:
        original = fh.read()
    with open(tmp_path / 'again' / 'renewal.csv', 'rb') as fh:
        assert fh.read() == original


def test_simulate_and_compare(tmp_path):
    assert run(tmp_path, '--seed', '3', 'simulate', '--epsilon', '0.05',
               '--particles', '500', '--horizon', '2', '--points', '21',
               '--checkpoints', '1') == 0
    assert os.path.exists(tmp_path / 'simulate_ages.csv')
    assert run(tmp_path, 'renewal', '--sigma', '1', '--horizon', '2') == 0
    assert run(tmp_path, 'compare', '--mc', str(tmp_path / 'simulate.csv'),
               '--reference', str(tmp_path / 'renewal.csv')) == 0
    metrics = read_table(str(tmp_path / 'compare.csv'))
    assert metrics['relative_l1'][0] >= 0
    assert 0 <= metrics['within_3_stderr'][0] <= 1

    assert run(tmp_path, 'compare', '--mc', str(tmp_path / 'simulate.csv'),
               '--collisionless', '--stem', 'free') == 0
    free = read_table(str(tmp_path / 'free.csv'))
    assert 'crossing_time' in free.colnames
    assert free['sup_gap'][0] > 0


@pytest.mark.parametrize("args", [
    ('pdist', '--tmax', '-1'),
    ('pdist', '--points', '1'),
    ('rate', '--sigma', '0'),
    ('compare', '--mc', 'missing.csv', '--reference', 'missing.csv'),
    ('compare', '--mc', 'missing.csv'),
    ('compare', '--mc', 'missing.csv', '--reference', 'missing.csv',
     '--collisionless'),
    ('simulate', '--epsilon', '0.1', '--hole-radius', '0.06'),
    ('--replay', 'missing.sidecar.json'),
    (),
])
def test_usage_errors(tmp_path, args):
    assert run(tmp_path, *args) == 2


def test_numerical_failure(tmp_path):
    # too few particles for a decay rate fit
    assert run(tmp_path, 'simulate', '--epsilon', '0.1', '--particles', '50',
               '--horizon', '2', '--points', '21', '--fit-start', '0') == 3


def test_malformed_reference(tmp_path):
    bad = tmp_path / 'bad.csv'
    bad.write_text('t,survival,stderr\n0,1,0\n0.5,oops,0\n')
    assert run(tmp_path, 'compare', '--mc', str(bad), '--reference',
               str(bad)) == 2


def test_quick_acceptance_subset(tmp_path, capsys):
    assert run(tmp_path, 'verify', '--quick', '--only', '1', '3') == 0
    out = capsys.readouterr().out
    assert out.count('PASS') == 2
    table = read_table(str(tmp_path / 'verify.csv'))
    assert list(table['number']) == [1, 3]
