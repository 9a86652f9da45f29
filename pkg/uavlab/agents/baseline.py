"""Implementations of the random and KNN-Fixed baseline agents and the all-cells-ON reference."""
import dataclasses

import numpy as np

from . import agent
from ..environments import energy
from ..environments import world as world_lib


def random_policy(random, num_agents, action_size=3):
    """Draw every raw action component uniformly from [-1, 1]."""
    return random.uniform(-1.0, 1.0, size=(num_agents, action_size))


def knn_fixed_policy(uav_positions, needed_positions, v_max, power, k=6):
    """Move each UAV towards the centroid of its k nearest UAV-needed users.

    Parameters
    ----------
    uav_positions : np.ndarray
        Array of shape (N, 2).
    needed_positions : np.ndarray
        Array of shape (U, 2) of the users whose home cell is OFF.
    v_max : float
        The largest displacement.
    power : float
        The power every UAV transmits at.
    k : int
        The number of neighbors.

    Returns
    -------
    actions : np.ndarray
        Physical actions (dx, dy, P) of shape (N, 3). UAVs hover when no user needs a UAV. Each
        UAV decides on its own, so several UAVs may chase the same cluster.

    """
    uav_positions = np.asarray(uav_positions, dtype=float).reshape(-1, 2)
    needed_positions = np.asarray(needed_positions, dtype=float).reshape(-1, 2)
    actions = np.zeros((len(uav_positions), 3))
    actions[:, 2] = power
    if len(needed_positions) == 0:
        return actions
    for i, position in enumerate(uav_positions):
        distances = np.linalg.norm(needed_positions - position, axis=1)
        nearest = np.lexsort((np.arange(len(distances)), distances))[:k]
        heading = needed_positions[nearest].mean(axis=0) - position
        length = np.linalg.norm(heading)
        if length > v_max:
            heading = heading * (v_max / length)
        actions[i, :2] = heading
    return actions


class RandomAgent(agent.Agent):
    """An agent whose raw actions are uniform in [-1, 1].

    Parameters
    ----------
    num_agents : int
        The number of UAVs.
    action_size : int
        The number of action components per UAV.
    seed : int
        The seed actions are drawn from. Each episode gets its own stream.

    """

    def __init__(self, num_agents, action_size=3, seed=0):
        """Create a random agent."""
        self._hyperparameters = {'num_agents': num_agents, 'action_size': action_size,
                                 'seed': seed}
        self._num_agents = num_agents
        self._action_size = action_size
        self._seed = seed
        self._random = world_lib.make_random(seed, 5)

    @property
    def name(self):  # noqa: D102
        return 'random'

    @property
    def hyperparameters(self):  # noqa: D102
        return self._hyperparameters

    def reset(self, episode_seed=None):  # noqa: D102
        if episode_seed is not None:
            self._random = world_lib.make_random(self._seed, 5, episode_seed)

    def act(self, observations, env):  # noqa: D102
        return random_policy(self._random, self._num_agents, self._action_size)


class KnnFixedAgent(agent.Agent):
    """A heuristic that flies each UAV to its nearest cluster of UAV-needed users.

    Parameters
    ----------
    k : int
        The number of nearest UAV-needed users whose centroid a UAV heads for.
    fixed_power : float, optional
        The power of every UAV. Defaults to p_max / N so the fleet power bound holds.

    """

    def __init__(self, k=6, fixed_power=None):
        """Create a KNN-Fixed agent."""
        self._hyperparameters = {'k': k, 'fixed_power': fixed_power}
        self._k = k
        self._fixed_power = fixed_power

    @property
    def name(self):  # noqa: D102
        return 'knn_fixed'

    @property
    def hyperparameters(self):  # noqa: D102
        return self._hyperparameters

    def power(self, env):
        """Return the power the agent transmits at in an environment."""
        config = env.world.config
        power = self._fixed_power
        if power is None:
            power = config.p_max / env.num_agents
        if not 0 <= power <= config.p_max:
            raise ValueError('fixed_power must be in [0, {}].'.format(config.p_max))
        return power

    def act(self, observations, env):  # noqa: D102
        physical = knn_fixed_policy(env.uav_positions, env.uav_needed_positions(),
                                    env.world.config.v_max, self.power(env), self._k)
        return np.clip(env.to_raw(physical), -1.0, 1.0)


@dataclasses.dataclass(frozen=True)
class AllCellsOnResult:
    """The outcome of running a world with every cell ON and no UAVs.

    Attributes
    ----------
    ledger : EnergyLedger
        The energy of one episode. UAV entries are empty.
    served_percent : float
        The mean over steps of the percentage of users their home cell can serve.
    served_per_step : np.ndarray
        The served percentage of every step.

    """

    ledger: energy.EnergyLedger
    served_percent: float
    served_per_step: np.ndarray


def all_cells_on_eval(world, energy_params=None):
    """Evaluate the conventional configuration where every cell stays ON and no UAV flies.

    Parameters
    ----------
    world : World
        The scenario. Its schedule is ignored.
    energy_params : EnergyParams, optional
        The energy model. Its dt is replaced by the scenario's dt.

    Returns
    -------
    result : AllCellsOnResult
        The episode ledger and the served-user percentage.

    """
    energy_params = energy_params if energy_params is not None else energy.EnergyParams()
    energy_params = dataclasses.replace(energy_params, dt=world.config.dt)
    num_steps = world.episode_length
    states = np.ones((num_steps, world.num_cells), dtype=np.int8)
    loads = np.zeros((num_steps, world.num_cells))
    served = np.zeros(num_steps)
    for t in range(num_steps):
        loads[t], gbs_served = energy.cell_loads(world.home_cells, world.demands[:, t], states[t],
                                                 energy_params.cell_capacity)
        served[t] = 100.0 * gbs_served.sum() / world.num_users
    ledger = energy.episode_ledger(states, loads, np.zeros((num_steps, 0, 2)),
                                   np.zeros((num_steps, 0)), world.cell_sites, energy_params)
    return AllCellsOnResult(ledger=ledger, served_percent=float(served.mean()),
                            served_per_step=served)
