"""Tests for the scenario world."""
import math

import numpy as np
import pytest

from uavlab import data_utils
from uavlab.environments import world
from . import utils


def test_desk_layout():
    """Test that the three-site layout has the expected site and cell centers."""
    config = world.ScenarioConfig()
    scenario = world.build_world(config)
    assert scenario.num_cells == 9
    assert scenario.num_users == 30
    np.testing.assert_allclose(scenario.site_centers,
                               [[0, 0], [750, 0], [375, 750 * math.sqrt(3) / 2]])
    expected = [[125, 250 * math.sqrt(3) / 2], [-250, 0], [125, -250 * math.sqrt(3) / 2]]
    np.testing.assert_allclose(scenario.cell_centers[:3], expected, atol=1e-9)
    np.testing.assert_array_equal(scenario.cell_sites, [0, 0, 0, 1, 1, 1, 2, 2, 2])


def test_users_inside_cells():
    """Test that every user lies in a cell and is homed at the nearest center."""
    scenario = world.build_world(world.ScenarioConfig(num_users=200, seed=3))
    for user in scenario.users:
        distances = np.linalg.norm(scenario.cell_centers - user.position, axis=1)
        assert user.home_cell == int(np.argmin(distances))
        assert world.inside_hexagon(user.position[np.newaxis],
                                    scenario.cell_centers[user.home_cell],
                                    scenario.config.cell_radius)[0]


def test_same_seed_same_world():
    """Test that a scenario is fully determined by its config."""
    first = world.build_world(world.ScenarioConfig(seed=7))
    second = world.build_world(world.ScenarioConfig(seed=7))
    other = world.build_world(world.ScenarioConfig(seed=8))
    assert first.world_hash() == second.world_hash()
    np.testing.assert_array_equal(first.demands, second.demands)
    assert first.world_hash() != other.world_hash()


def test_random_fraction_schedule():
    """Test that a third of nine cells sleep at every step."""
    scenario = world.build_world(world.ScenarioConfig())
    for t in range(scenario.episode_length):
        assert len(scenario.inactive_cells(t)) == 3
    assert scenario.schedule.shape == (9, 100)


def test_schedule_switch():
    """Test that the sleeping set is redrawn at the switch step."""
    config = world.ScenarioConfig(schedule_switch_step=50, seed=1)
    scenario = world.build_world(config)
    assert scenario.inactive_cells(0) == scenario.inactive_cells(49)
    assert scenario.inactive_cells(50) == scenario.inactive_cells(99)
    assert len(scenario.inactive_cells(50)) == 3


def test_schedule_file(tmp_path):
    """Test that a schedule file drives the cell states."""
    schedule = np.ones((3, 4), dtype=int)
    schedule[1, 2:] = 0
    path = str(tmp_path / 'schedule.csv')
    data_utils.write_schedule(path, schedule)
    config = world.ScenarioConfig(num_sites=1, episode_length=4, schedule_mode='file',
                                  schedule_path=path)
    scenario = world.build_world(config)
    assert scenario.inactive_cells(1) == set()
    assert scenario.inactive_cells(2) == {1}
    np.testing.assert_array_equal(scenario.cell_states(3), [1, 0, 1])


def test_schedule_file_wrong_shape(tmp_path):
    """Test that a schedule of the wrong shape is rejected."""
    path = str(tmp_path / 'schedule.csv')
    data_utils.write_schedule(path, np.ones((3, 5), dtype=int))
    config = world.ScenarioConfig(num_sites=1, episode_length=4, schedule_mode='file',
                                  schedule_path=path)
    with pytest.raises(ValueError):
        world.build_world(config)


def test_uav_needed():
    """Test that users need a UAV exactly when their home cell is off."""
    scenario = utils.hand_world(schedule=[[1, 0], [0, 0], [1, 1]],
                                user_positions=[[125, 200], [-250, 0], [125, -200]],
                                demands=np.full((3, 2), 1e6))
    np.testing.assert_array_equal(scenario.home_cells, [0, 1, 2])
    np.testing.assert_array_equal(scenario.uav_needed(0), [False, True, False])
    np.testing.assert_array_equal(scenario.uav_needed(1), [True, True, False])


def test_step_out_of_range():
    """Test that steps outside the episode raise IndexError."""
    scenario = utils.tiny_world()
    with pytest.raises(IndexError):
        scenario.cell_states(scenario.episode_length)
    with pytest.raises(IndexError):
        scenario.demand_at(0, -1)
    with pytest.raises(IndexError):
        scenario.demand_at(scenario.num_users, 0)


def test_demands_follow_surges():
    """Test that demand equals the base rate, multiplied during a surge."""
    config = world.ScenarioConfig(traffic=world.TrafficConfig(surge_on_prob=0.5), seed=2)
    scenario = world.build_world(config)
    multiplier = config.traffic.surge_multiplier
    expected = scenario.base_rates[:, np.newaxis] * np.where(scenario.surges, multiplier, 1.0)
    np.testing.assert_allclose(scenario.demands, expected)
    assert not scenario.surges[:, 0].any()
    assert scenario.surges.any()
    assert scenario.demands.max() <= config.traffic.max_rate


def test_world_is_read_only():
    """Test that the world arrays cannot be modified."""
    scenario = utils.tiny_world()
    with pytest.raises(ValueError):
        scenario.demands[0, 0] = 0.0


def test_invalid_config():
    """Test that invalid scenario parameters are rejected."""
    with pytest.raises(ValueError):
        world.ScenarioConfig(num_uavs=0)
    with pytest.raises(ValueError):
        world.ScenarioConfig(sleep_fraction=1.5)
    with pytest.raises(ValueError):
        world.ScenarioConfig(schedule_mode='file')
    with pytest.raises(ValueError):
        world.TrafficConfig(surge_multiplier=0.5)
    with pytest.raises(ValueError):
        world.build_world(world.ScenarioConfig(num_sites=7, area_half_width=500))


def test_make_random_independent_streams():
    """Test that distinct keys give distinct streams and equal keys equal streams."""
    first = world.make_random(0, 1, 5).uniform(size=4)
    np.testing.assert_array_equal(first, world.make_random(0, 1, 5).uniform(size=4))
    assert not np.allclose(first, world.make_random(0, 1, 6).uniform(size=4))
