import numpy as np
import pytest
import astropy.units as u
from scipy.stats import ks_2samp

from ..acceptance import march_free_paths
from ..exceptions import ConfigurationError, DomainError
from ..lattice import (EmpiricalTail, LatticeConfig, direction_vectors,
                       free_path, free_paths, ks_distance, sample_empirical,
                       sample_free_paths, sample_positions)


def test_head_on():
    config = LatticeConfig(0.1)
    assert free_path([0.05, 0], [-1, 0], config) == pytest.approx(0.04,
                                                                  abs=1e-12)
    assert free_path([0.05, 0], [1, 0], config) == pytest.approx(0.04,
                                                                 abs=1e-12)


def test_channels_reach_the_cap():
    config = LatticeConfig(0.01, t_cap=5.0)
    positions = np.array([[0.5, 0.0], [0.5, 0.5], [0.5, 0.0], [0.0, 0.5]])
    directions = np.array([[0, 1], [1, 0], [0, -1], [-1, 0]], dtype=float)
    lengths = free_paths(config.epsilon * positions, directions, config)
    assert np.all(lengths == config.t_cap)


def test_caps_per_ray():
    config = LatticeConfig(0.1)
    lengths = free_paths([[0.05, 0], [0.05, 0]], [[-1, 0], [-1, 0]], config,
                         caps=[1.0, 0.02])
    np.testing.assert_allclose(lengths, [0.04, 0.02], atol=1e-12)


@pytest.mark.parametrize("epsilon", [0.1, 0.05, 0.01])
def test_traversal_matches_marching(epsilon):
    rng = np.random.default_rng(7)
    config = LatticeConfig(epsilon, t_cap=5.0)
    positions = epsilon * rng.random((300, 2))
    positions = positions[~config.in_hole(positions)]
    directions = direction_vectors(rng.uniform(0, 2 * np.pi, len(positions)))
    exact = free_paths(positions, directions, config)
    marched = march_free_paths(positions, directions, config)
    assert np.max(np.abs(exact - marched)) <= 1e-6 * epsilon


def test_oblique_ray():
    config = LatticeConfig(1e-2)
    x = np.array([[0.3, 0.4]]) * config.epsilon
    v = direction_vectors(u.Quantity([30], u.deg))
    exact = free_paths(x, v, config)
    assert 0 < exact[0] < config.t_cap
    np.testing.assert_allclose(exact, march_free_paths(x, v, config),
                               atol=1e-6 * config.epsilon)


def test_point_reflection():
    rng = np.random.default_rng(11)
    config = LatticeConfig(0.02)
    positions = 50 * rng.random((500, 2)) - 25
    positions = positions[~config.in_hole(positions)]
    directions = direction_vectors(rng.uniform(0, 2 * np.pi, len(positions)))
    np.testing.assert_allclose(free_paths(-positions, -directions, config),
                               free_paths(positions, directions, config),
                               rtol=1e-12)


# symmetries of the square lattice: swap of the axes, mirror of one axis
@pytest.mark.parametrize("matrix", [[[0, 1], [1, 0]], [[1, 0], [0, -1]],
                                    [[0, -1], [1, 0]]])
def test_lattice_symmetries(matrix):
    matrix = np.array(matrix, dtype=float)
    rng = np.random.default_rng(13)
    config = LatticeConfig(0.02)
    positions = 50 * rng.random((500, 2)) - 25
    positions = positions[~config.in_hole(positions)]
    directions = direction_vectors(rng.uniform(0, 2 * np.pi, len(positions)))
    np.testing.assert_allclose(free_paths(positions @ matrix.T,
                                          directions @ matrix.T, config),
                               free_paths(positions, directions, config),
                               rtol=1e-9)


@pytest.mark.parametrize("image", [lambda theta: np.pi / 2 - theta,
                                   lambda theta: -theta,
                                   lambda theta: np.pi + theta])
def test_octant_directions_have_the_same_law(image):
    config = LatticeConfig(0.02, t_cap=10.0)
    theta = 0.3
    rng = np.random.default_rng(21)
    first = sample_positions(rng, 4000, config)
    second = sample_positions(rng, 4000, config)

    def paths(positions, angle):
        directions = np.tile(direction_vectors(angle), (len(positions), 1))
        return free_paths(positions, directions, config)

    assert ks_2samp(paths(first, theta),
                    paths(second, image(theta))).pvalue > 1e-3


def test_start_inside_a_hole():
    config = LatticeConfig(0.1)
    with pytest.raises(DomainError):
        free_path([0.005, 0], [1, 0], config)
    with pytest.raises(DomainError):
        free_path([0.1, 0.1], [0, 1], config)


def test_directions_must_be_unit():
    with pytest.raises(DomainError):
        free_path([0.05, 0], [2, 0], LatticeConfig(0.1))


@pytest.mark.parametrize("kwargs", [
    dict(epsilon=0),
    dict(epsilon=-1),
    dict(epsilon=0.1, hole_radius=0.05),
    dict(epsilon=0.1, hole_radius=0),
    dict(epsilon=0.1, t_cap=0),
])
def test_config_validation(kwargs):
    with pytest.raises(ConfigurationError):
        LatticeConfig(**kwargs)


def test_default_radius():
    config = LatticeConfig(0.1)
    assert config.hole_radius == pytest.approx(0.01)
    assert config.scaled_radius == pytest.approx(0.1)
    assert config == LatticeConfig(0.1)
    assert config != LatticeConfig(0.1, t_cap=3)


def test_rejection_needs_room():
    config = LatticeConfig(1.0, hole_radius=0.45)
    with pytest.raises(ConfigurationError):
        sample_positions(np.random.default_rng(0), 10, config)


def test_sampled_positions():
    config = LatticeConfig(0.1, hole_radius=0.03)
    positions = sample_positions(np.random.default_rng(0), 1000, config)
    assert positions.shape == (1000, 2)
    assert np.all((positions >= 0) & (positions < config.epsilon))
    assert not np.any(config.in_hole(positions))


@pytest.mark.parametrize("box_size", [0.15, 0.25, 1.0])
def test_box_positions(box_size):
    config = LatticeConfig(0.3, hole_radius=0.03)
    positions = sample_positions(np.random.default_rng(2), 2000, config,
                                 box_size=box_size)
    assert positions.shape == (2000, 2)
    assert np.all(np.abs(positions) <= box_size / 2)
    assert not np.any(config.in_hole(positions))
    # uniform on the box, not folded into the fundamental cell
    assert positions.min() < -0.4 * box_size
    assert positions.max() > 0.4 * box_size


def test_box_needs_room():
    config = LatticeConfig(0.1)
    with pytest.raises(ConfigurationError):
        sample_positions(np.random.default_rng(0), 10, config, box_size=0.02)
    with pytest.raises(ConfigurationError):
        sample_positions(np.random.default_rng(0), 10, config, box_size=0)


def test_single_ray_tail():
    tail = sample_empirical(LatticeConfig(0.1), 1, seed=5)
    assert set(np.unique(tail.phi_hat)) <= {0.0, 1.0}
    assert tail.phi_hat[0] == 1
    assert np.all(np.diff(tail.phi_hat) <= 0)


def test_sample_size():
    with pytest.raises(DomainError):
        sample_free_paths(LatticeConfig(0.1), 0, seed=0)


def test_independent_of_thread_count():
    config = LatticeConfig(0.05, t_cap=10.0)
    serial = sample_free_paths(config, 2000, seed=3, threads=1)
    parallel = sample_free_paths(config, 2000, seed=3, threads=4)
    np.testing.assert_array_equal(serial.path_lengths, parallel.path_lengths)
    np.testing.assert_array_equal(serial.positions, parallel.positions)


def test_seeds_differ():
    config = LatticeConfig(0.05, t_cap=10.0)
    a = sample_free_paths(config, 200, seed=1, threads=1)
    b = sample_free_paths(config, 200, seed=2, threads=1)
    assert not np.array_equal(a.path_lengths, b.path_lengths)


def test_reversed_directions_have_the_same_law():
    config = LatticeConfig(0.02, t_cap=10.0)
    sample = sample_free_paths(config, 5000, seed=9, threads=1)
    reversed_paths = free_paths(sample.positions, -sample.directions, config)
    assert ks_2samp(sample.path_lengths, reversed_paths).pvalue > 1e-3


def test_homogenized_law(distribution):
    config = LatticeConfig(5e-3, t_cap=10.0)
    tail = sample_empirical(config, 20000, seed=1, threads=1)
    assert ks_distance(tail, distribution, t_range=(0.1, 9)) <= 0.03
    c_lower, c_upper = tail.inverse_t_bounds()
    assert 0 < c_lower <= c_upper < 1


def test_ks_distance(distribution):
    grid = np.linspace(0, 10, 11)
    tail = EmpiricalTail(grid, np.ones(11), 1, 0.1, None)
    assert ks_distance(tail, tail) == 0
    single = EmpiricalTail(np.array([2.0]), np.ones(1), 1, 0.1, None)
    assert ks_distance(single, distribution) == pytest.approx(
        1 - distribution.p(2.0), abs=1e-12)
    with pytest.raises(DomainError):
        ks_distance(tail, tail, t_range=(20, 30))
    with pytest.raises(DomainError):
        ks_distance(tail, single)


def test_tail_table():
    tail = EmpiricalTail.from_paths([0.5, 1.5, 2.5, 3.5], [0, 1, 2, 3, 4],
                                    0.1, 42)
    np.testing.assert_allclose(tail.phi_hat, [1, 0.75, 0.5, 0.25, 0])
    np.testing.assert_allclose(tail.standard_error[1],
                               np.sqrt(0.75 * 0.25 / 4))
    table = tail.to_table()
    assert table.colnames == ['t', 'phi_hat', 'n_samples', 'epsilon', 'seed']
    assert np.all(table['seed'] == 42)
