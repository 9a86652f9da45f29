"""A set of utility functions for testing."""
import numpy as np

from uavlab.agents.maddpg import TrainConfig
from uavlab.environments import coverage
from uavlab.environments import world

CELL_RADIUS = 250.0
AREA_HALF_WIDTH = 1000.0


def hand_world(schedule, user_positions, demands, num_uavs=1, v_max=20.0, p_max=2.0):
    """Build a one-site world from hand-picked arrays.

    Parameters
    ----------
    schedule : array_like
        Array of shape (3, T) of cell states.
    user_positions : array_like
        Array of shape (M, 2).
    demands : array_like
        Array of shape (M, T) in bits/s.

    """
    schedule = np.array(schedule, dtype=np.int8)
    user_positions = np.array(user_positions, dtype=float).reshape(-1, 2)
    demands = np.array(demands, dtype=float).reshape(len(user_positions), -1)
    num_steps = schedule.shape[1]
    config = world.ScenarioConfig(area_half_width=AREA_HALF_WIDTH, num_sites=1,
                                  cell_radius=CELL_RADIUS, num_uavs=num_uavs,
                                  num_users=len(user_positions), episode_length=num_steps,
                                  v_max=v_max, p_max=p_max)
    angles = np.radians(world.SECTOR_ANGLES)
    cell_centers = CELL_RADIUS * np.column_stack([np.cos(angles), np.sin(angles)])
    return world.World(config=config,
                       site_centers=np.zeros((1, 2)),
                       cell_centers=cell_centers,
                       cell_sites=np.zeros(3, dtype=int),
                       schedule=schedule,
                       user_positions=user_positions,
                       home_cells=world.nearest_cells(user_positions, cell_centers),
                       profiles=np.zeros(len(user_positions), dtype=int),
                       base_rates=demands[:, 0].copy(),
                       surges=np.zeros(demands.shape, dtype=bool),
                       demands=demands)


def tiny_world(seed=0, **kwargs):
    """Build a small generated world."""
    params = dict(area_half_width=800.0, num_sites=1, num_uavs=2, num_users=8,
                  episode_length=6, seed=seed)
    params.update(kwargs)
    return world.build_world(world.ScenarioConfig(**params))


def tiny_env(seed=0, **kwargs):
    """Build a coverage environment over a small generated world."""
    return coverage.UavCoverage(tiny_world(seed, **kwargs))


def tiny_train_config(**kwargs):
    """Return training settings small enough for unit tests."""
    params = dict(episodes=3, batch_size=4, warmup_steps=4, hidden_sizes=(8,),
                  buffer_capacity=64, eval_interval=0, update_interval=1,
                  ou_sigma_decay=0.9999)
    params.update(kwargs)
    return TrainConfig(**params)
