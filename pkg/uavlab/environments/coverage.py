"""Contains the implementation for the UAV coverage environment.

In this environment N UAVs fly at a fixed altitude over a network whose cells follow a sleep
schedule. Users in sleeping cells ("UAV-needed" users) can only be served by a UAV, and every UAV
is rewarded for the share of UAV-needed users it serves and penalized for the energy it spends.
"""
import dataclasses

import numpy as np

from . import channel
from . import energy
from . import environment
from .. import data_utils

ACTION_SIZE = 3
NUM_NEAREST_USERS = 6
USER_SLOT_SIZE = 4

# Relative slack used when deciding whether a constraint is violated.
CONSTRAINT_TOLERANCE = 1e-12


@dataclasses.dataclass(frozen=True)
class RewardWeights:
    """Weights of the per-step reward and of the evaluation objective.

    Parameters
    ----------
    omega1 : float
        Weight of the coverage term.
    omega2 : float
        Weight of the energy term.
    gamma : float
        Discount factor in [0, 1).
    lam : float
        Trade-off coefficient of the throughput-minus-energy objective, per joule. Only used to
        report the evaluation objective.

    """

    omega1: float = 0.8
    omega2: float = 0.2
    gamma: float = 0.99
    lam: float = 1e-3

    def __post_init__(self):
        """Validate the weights."""
        if self.omega1 < 0 or self.omega2 < 0:
            raise ValueError('omega1 and omega2 must be non-negative.')
        if not 0 <= self.gamma < 1:
            raise ValueError('gamma must be in [0, 1).')


@dataclasses.dataclass(frozen=True)
class StepOutcome:
    """Everything the environment returns from a step.

    Attributes
    ----------
    rewards : np.ndarray
        The reward R_i(t) of each agent.
    report : SinrReport
        The link state of the step.
    ledger : EnergyLedger
        A one-step ledger.
    done : bool
        True once the last step of the episode has been taken.
    info : dict
        Coverage ratio, served counts, throughput and E_max.
    observations : np.ndarray
        The next local observation of each agent.
    global_state : np.ndarray
        The next global state.

    """

    rewards: np.ndarray
    report: channel.SinrReport
    ledger: energy.EnergyLedger
    done: bool
    info: dict
    observations: np.ndarray
    global_state: np.ndarray


def to_physical(raw_actions, v_max, p_max):
    """Map raw actions in [-1, 1]^3 to (dx, dy) in [-v_max, v_max]^2 and P in [0, p_max]."""
    raw_actions = np.asarray(raw_actions, dtype=float).reshape(-1, ACTION_SIZE)
    physical = np.empty_like(raw_actions)
    physical[:, :2] = raw_actions[:, :2] * v_max
    physical[:, 2] = (raw_actions[:, 2] + 1) / 2 * p_max
    return physical


def to_raw(physical_actions, v_max, p_max):
    """Invert to_physical."""
    physical_actions = np.asarray(physical_actions, dtype=float).reshape(-1, ACTION_SIZE)
    raw = np.empty_like(physical_actions)
    raw[:, :2] = physical_actions[:, :2] / v_max
    raw[:, 2] = 2 * physical_actions[:, 2] / p_max - 1
    return raw


def enforce_constraints(actions, v_max, p_max, fleet_power_max=None):
    """Project joint physical actions onto the feasible set.

    Parameters
    ----------
    actions : np.ndarray
        Array of shape (N, 3) of (dx, dy, P).
    v_max : float
        The largest displacement norm.
    p_max : float
        The largest power of a single UAV.
    fleet_power_max : float, optional
        The largest total power of all UAVs, p_max when omitted.

    Returns
    -------
    feasible : np.ndarray
        Displacements longer than v_max are scaled radially to v_max, powers are clipped to
        [0, p_max], and if the total power still exceeds the fleet bound every power is scaled by
        the same factor.

    """
    if fleet_power_max is None:
        fleet_power_max = p_max
    feasible = np.array(actions, dtype=float).reshape(-1, ACTION_SIZE)
    norms = np.linalg.norm(feasible[:, :2], axis=1)
    too_fast = norms > v_max * (1 + CONSTRAINT_TOLERANCE)
    feasible[too_fast, :2] *= (v_max / norms[too_fast])[:, np.newaxis]
    feasible[:, 2] = np.clip(feasible[:, 2], 0, p_max)
    total = feasible[:, 2].sum()
    if total > fleet_power_max * (1 + CONSTRAINT_TOLERANCE):
        feasible[:, 2] *= fleet_power_max / total
    return feasible


def agent_rewards(report, uav_needed, uav_energy, e_max, weights):
    """Compute the reward of every agent for one step.

    Parameters
    ----------
    report : SinrReport
        The link state of the step.
    uav_needed : np.ndarray
        Boolean mask of the users whose home cell is OFF.
    uav_energy : np.ndarray
        E_i(t) of each UAV in joules.
    e_max : float
        The largest energy a UAV can spend in one step.
    weights : RewardWeights
        The reward weights.

    Returns
    -------
    rewards : np.ndarray
        omega1 * coverage_i + omega2 * (1 - E_i / E_max), where coverage_i is the number of
        UAV-needed users UAV i serves at their required rate over the number of UAV-needed users,
        and 1 when there are none.

    """
    uav_needed = np.asarray(uav_needed, dtype=bool)
    num_needed = uav_needed.sum()
    num_uavs = len(uav_energy)
    if num_needed == 0:
        coverage = np.ones(num_uavs)
    else:
        coverage = np.array([(report.served_by(i) & uav_needed).sum() / num_needed
                             for i in range(num_uavs)])
    penalty = np.minimum(np.asarray(uav_energy, dtype=float) / e_max, 1.0)
    return weights.omega1 * coverage + weights.omega2 * (1 - penalty)


def episode_objective(throughputs, uav_energies, lam):
    """Return the throughput-minus-energy objective of an episode.

    Parameters
    ----------
    throughputs : array_like
        The network throughput of every step in bits/s.
    uav_energies : array_like
        The energy E_i(t) of every UAV and step in joules.
    lam : float
        The trade-off coefficient per joule.

    Returns
    -------
    objective : float
        sum_t throughput(t) - lam * sum_t sum_i E_i(t).

    """
    return float(np.sum(throughputs) - lam * np.sum(uav_energies))


def audit_trace(records, v_max, p_max, fleet_power_max=None):
    """Count the steps of a trace that break the mobility or power constraints.

    Parameters
    ----------
    records : list of dict
        Trace records as produced by UavCoverage.trace.
    v_max : float
        The largest displacement norm.
    p_max : float
        The largest power of a single UAV.
    fleet_power_max : float, optional
        The largest total power, p_max when omitted.

    Returns
    -------
    audit : dict
        The number of audited steps and the number of steps violating each constraint.

    """
    if fleet_power_max is None:
        fleet_power_max = p_max
    slack = 1 + 1e-9
    audit = {'steps': 0, 'speed_violations': 0, 'power_violations': 0,
             'fleet_power_violations': 0}
    for record in records:
        displacements = np.asarray(record['displacements'], dtype=float).reshape(-1, 2)
        powers = np.asarray(record['powers'], dtype=float)
        audit['steps'] += 1
        audit['speed_violations'] += int(np.any(
            np.linalg.norm(displacements, axis=1) > v_max * slack))
        audit['power_violations'] += int(np.any(powers < 0) or np.any(powers > p_max * slack))
        audit['fleet_power_violations'] += int(powers.sum() > fleet_power_max * slack)
    return audit


def write_trace(path, records):
    """Write trace records as JSON lines, one step per line."""
    data_utils.write_jsonl(path, records)


class UavCoverage(environment.Environment):
    """An environment where UAVs cover the users of sleeping cells.

    Parameters
    ----------
    world : World
        The scenario.
    channel_params : ChannelParams, optional
        The channel model.
    energy_params : EnergyParams, optional
        The energy model. Its dt is replaced by the scenario's dt.
    reward_weights : RewardWeights, optional
        The reward weights.
    observation_radius : float, optional
        UAV-needed users farther than this from a UAV are not observed by it. Defaults to twice
        the cell radius.
    spawn_points : array_like, optional
        Array of shape (N, 2) of starting positions. Defaults to the site centers, assigned
        round-robin.
    fleet_power_max : float, optional
        The bound on the total UAV power. Defaults to the per-UAV bound p_max.

    """

    def __init__(self, world, channel_params=None, energy_params=None, reward_weights=None,
                 observation_radius=None, spawn_points=None, fleet_power_max=None):
        """Create a UAV coverage environment."""
        config = world.config
        self._world = world
        self._channel = channel_params if channel_params is not None else channel.ChannelParams()
        energy_params = energy_params if energy_params is not None else energy.EnergyParams()
        self._energy = dataclasses.replace(energy_params, dt=config.dt)
        self._weights = reward_weights if reward_weights is not None else RewardWeights()
        self._observation_radius = (observation_radius if observation_radius is not None
                                    else 2 * config.cell_radius)
        if spawn_points is None:
            sites = world.site_centers
            spawn_points = sites[np.arange(config.num_uavs) % len(sites)]
        self._spawn_points = np.array(spawn_points, dtype=float).reshape(config.num_uavs, 2)
        self._fleet_power_max = fleet_power_max if fleet_power_max is not None else config.p_max
        self._e_max = self._energy.max_step_energy(config.p_max, config.v_max)
        self._rate_scale = config.traffic.max_rate
        self._episode_seed = 0
        self._random = None
        self._timestep = 0
        self._positions = None
        self._powers = None
        self._ledgers = []
        self._trace = []

    @property
    def name(self):  # noqa: D102
        return 'uav-coverage'

    @property
    def world(self):
        """Return the scenario the environment runs on."""
        return self._world

    @property
    def channel_params(self):
        """Return the channel parameters."""
        return self._channel

    @property
    def energy_params(self):
        """Return the energy parameters."""
        return self._energy

    @property
    def reward_weights(self):
        """Return the reward weights."""
        return self._weights

    @property
    def num_agents(self):  # noqa: D102
        return self._world.config.num_uavs

    @property
    def observation_size(self):  # noqa: D102
        return (ACTION_SIZE * self.num_agents + NUM_NEAREST_USERS * USER_SLOT_SIZE +
                self._world.num_cells)

    @property
    def state_size(self):  # noqa: D102
        return 3 * self.num_agents + 3 * self._world.num_users + self._world.num_cells

    @property
    def action_size(self):  # noqa: D102
        return ACTION_SIZE

    @property
    def e_max(self):
        """Return the largest energy a UAV can spend in one step, in joules."""
        return self._e_max

    @property
    def fleet_power_max(self):
        """Return the bound on the total UAV power."""
        return self._fleet_power_max

    @property
    def timestep(self):
        """Return the index of the next step."""
        return self._timestep

    @property
    def done(self):
        """Return whether the episode is over."""
        return self._timestep >= self._world.episode_length

    @property
    def uav_positions(self):
        """Return a copy of the current UAV positions."""
        return self._positions.copy()

    @property
    def uav_powers(self):
        """Return a copy of the current UAV powers."""
        return self._powers.copy()

    @property
    def trace(self):
        """Return the list of per-step records of the current episode."""
        return self._trace

    def seed(self, seed=None):
        """Set the episode seed used by reset when none is passed."""
        self._episode_seed = 0 if seed is None else int(seed)

    def reset(self, episode_seed=None):
        """Reset the UAVs to their spawn points with zero power.

        Parameters
        ----------
        episode_seed : int, optional
            The seed of the episode's fading stream.

        Returns
        -------
        observations : np.ndarray
            The local observation of each agent.
        global_state : np.ndarray
            The global state.

        """
        if episode_seed is None:
            episode_seed = self._episode_seed
        self._random = self._world.episode_random(episode_seed)
        self._timestep = 0
        self._positions = self._spawn_points.copy()
        self._powers = np.zeros(self.num_agents)
        self._ledgers = []
        self._trace = []
        return self.observations(), self.global_state()

    def enforce_constraints(self, actions):
        """Project joint physical actions onto the feasible set of this scenario."""
        config = self._world.config
        return enforce_constraints(actions, config.v_max, config.p_max, self._fleet_power_max)

    def to_physical(self, raw_actions):
        """Map raw actions in [-1, 1]^3 to physical (dx, dy, P) actions."""
        config = self._world.config
        return to_physical(raw_actions, config.v_max, config.p_max)

    def to_raw(self, physical_actions):
        """Map physical (dx, dy, P) actions back to raw actions."""
        config = self._world.config
        return to_raw(physical_actions, config.v_max, config.p_max)

    def step(self, actions):
        """Apply joint raw actions and advance the episode by one step.

        Parameters
        ----------
        actions : np.ndarray
            Array of shape (N, 3) of raw actions.

        Returns
        -------
        outcome : StepOutcome
            The outcome of the step.

        """
        if self._random is None:
            raise RuntimeError('reset must be called before step.')
        if self.done:
            raise RuntimeError('The episode is over, call reset to start a new one.')
        actions = np.asarray(actions, dtype=float)
        if actions.shape != (self.num_agents, ACTION_SIZE):
            raise ValueError('Expected actions of shape {}, got {}.'.format(
                (self.num_agents, ACTION_SIZE), actions.shape))

        world = self._world
        config = world.config
        t = self._timestep
        feasible = self.enforce_constraints(self.to_physical(actions))
        old_positions = self._positions
        self._positions = np.clip(old_positions + feasible[:, :2],
                                  -config.area_half_width, config.area_half_width)
        displacements = self._positions - old_positions
        self._powers = feasible[:, 2]

        states = world.cell_states(t)
        demands = world.demands[:, t]
        uav_needed = world.uav_needed(t)
        active = np.flatnonzero(states == 1)
        gains = channel.sample_gains(self._positions, config.uav_altitude,
                                     world.cell_centers[active], world.user_positions,
                                     self._channel, self._random)
        report = channel.compute_sinr(self._powers, gains, demands, self._channel, uav_needed)
        loads, gbs_served = energy.cell_loads(world.home_cells, demands, states,
                                              self._energy.cell_capacity)
        ledger = energy.episode_ledger(states[np.newaxis], loads[np.newaxis],
                                       displacements[np.newaxis], self._powers[np.newaxis],
                                       world.cell_sites, self._energy)
        uav_energy = ledger.uav[0]
        rewards = agent_rewards(report, uav_needed, uav_energy, self._e_max, self._weights)
        throughput = channel.total_throughput(report)

        num_needed = int(uav_needed.sum())
        num_uav_served = int((report.served_mask & uav_needed).sum())
        info = {'t': t,
                'coverage': num_uav_served / num_needed if num_needed else 1.0,
                'num_uav_needed': num_needed,
                'num_uav_served': num_uav_served,
                'num_gbs_served': int(gbs_served.sum()),
                'num_served': int((report.served_mask | gbs_served).sum()),
                'throughput': throughput,
                'e_max': self._e_max}
        self._ledgers.append(ledger)
        self._trace.append({'t': t,
                            'positions': self._positions.copy(),
                            'displacements': displacements,
                            'powers': self._powers.copy(),
                            'assoc': report.assoc,
                            'rewards': rewards,
                            'uav_energy': uav_energy,
                            'cell_energy': ledger.cell[0],
                            'site_energy': ledger.site[0],
                            'throughput': throughput,
                            'coverage': info['coverage'],
                            'num_served': info['num_served']})

        self._timestep += 1
        return StepOutcome(rewards=rewards,
                           report=report,
                           ledger=ledger,
                           done=self.done,
                           info=info,
                           observations=self.observations(),
                           global_state=self.global_state())

    def ledger(self):
        """Return the energy ledger of the steps taken so far in this episode."""
        if not self._ledgers:
            raise ValueError('No steps have been taken in this episode.')
        return energy.EnergyLedger.concatenate(self._ledgers)

    def objective(self):
        """Return the throughput-minus-energy objective of the steps taken so far."""
        return episode_objective([record['throughput'] for record in self._trace],
                                 [record['uav_energy'] for record in self._trace],
                                 self._weights.lam)

    def uav_needed_positions(self):
        """Return the positions of the users that currently need a UAV."""
        t = min(self._timestep, self._world.episode_length - 1)
        return self._world.user_positions[self._world.uav_needed(t)]

    def observations(self):
        """Return the local observation of every agent.

        Returns
        -------
        observations : np.ndarray
            Array of shape (N, observation_size). Row i holds UAV i's position and power, the
            other UAVs' positions and powers, six slots (x, y, demand, present) for the nearest
            UAV-needed users within the observation radius, and every cell state. UAV positions
            are divided by the area half width, user slots hold the offset from UAV i divided by
            the observation radius, powers are divided by p_max and demands by the largest demand.

        """
        world = self._world
        t = min(self._timestep, world.episode_length - 1)
        uavs = self._uav_features()
        needed = np.flatnonzero(world.uav_needed(t))
        needed_positions = world.user_positions[needed]
        cell_states = world.cell_states(t).astype(float)

        observations = np.zeros((self.num_agents, self.observation_size))
        for i in range(self.num_agents):
            others = np.delete(uavs, i, axis=0).reshape(-1)
            slots = np.zeros((NUM_NEAREST_USERS, USER_SLOT_SIZE))
            if len(needed):
                distances = np.linalg.norm(needed_positions - self._positions[i], axis=1)
                visible = np.flatnonzero(distances <= self._observation_radius)
                order = visible[np.lexsort((needed[visible], distances[visible]))]
                for slot, index in enumerate(order[:NUM_NEAREST_USERS]):
                    user = needed[index]
                    offset = world.user_positions[user] - self._positions[i]
                    slots[slot, :2] = offset / self._observation_radius
                    slots[slot, 2] = min(1.0, world.demands[user, t] / self._rate_scale)
                    slots[slot, 3] = 1.0
            observations[i] = np.concatenate([uavs[i], others, slots.reshape(-1), cell_states])
        return observations

    def global_state(self):
        """Return the global state seen by centralized critics.

        Returns
        -------
        state : np.ndarray
            Every UAV's (x, y, P), every user's (x, y, demand) and every cell state, normalized
            like the local observations.

        """
        world = self._world
        t = min(self._timestep, world.episode_length - 1)
        users = np.column_stack([world.user_positions / world.config.area_half_width,
                                 np.minimum(1.0, world.demands[:, t] / self._rate_scale)])
        return np.concatenate([self._uav_features().reshape(-1), users.reshape(-1),
                               world.cell_states(t).astype(float)])

    def _uav_features(self):
        config = self._world.config
        return np.column_stack([self._positions / config.area_half_width,
                                self._powers / config.p_max])
