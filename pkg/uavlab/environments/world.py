"""Contains the static scenario of a sleeping-cell network.

A world holds GBS sites on a hexagonal lattice, three hexagonal cells per site, users placed
uniformly over the covered area, the cell ON/OFF schedule, and the per-user rate demand process.
Everything is sampled once at construction from the scenario seed, after which the world is
immutable and may be shared between any number of environments.
"""
import dataclasses
import hashlib
import math
import typing

import numpy as np

from .. import data_utils

# Rate scaling of each traffic profile relative to the user's base draw.
PROFILE_SCALES = {'streaming': 1.0, 'conferencing': 0.6}
PROFILE_NAMES = tuple(PROFILE_SCALES)

# Directions (degrees) from a site center to the centers of its three cells.
SECTOR_ANGLES = (60.0, 180.0, 300.0)


def make_random(*keys):
    """Create a RandomState whose seed is derived from a tuple of non-negative integers.

    Parameters
    ----------
    keys : int
        Integers identifying the stream, e.g. (scenario seed, episode seed). 64-bit values are
        supported.

    Returns
    -------
    random : np.random.RandomState
        The seeded random number generator.

    """
    sequence = np.random.SeedSequence([int(key) for key in keys])
    return np.random.RandomState(sequence.generate_state(4))


@dataclasses.dataclass(frozen=True)
class TrafficConfig:
    """Parameters of the synthetic rate-demand process.

    Each user draws a base rate log-uniformly from
    [base_rate_mean - base_rate_spread, base_rate_mean + base_rate_spread], scaled by the rate
    scale of its traffic profile. A per-user two-state Markov chain (starting OFF) switches
    surges on and off, and demand is multiplied by surge_multiplier while the surge is ON.

    Parameters
    ----------
    base_rate_mean : float
        Center of the base rate range in bits/s.
    base_rate_spread : float
        Half width of the base rate range in bits/s.
    surge_multiplier : float
        Demand multiplier while a surge is active. Must be at least 1.
    surge_on_prob : float
        Per-step probability of entering a surge.
    surge_off_prob : float
        Per-step probability of leaving a surge.
    profile_mix : tuple of float
        Weights over the (streaming, conferencing) profiles.

    """

    base_rate_mean: float = 1.0e6
    base_rate_spread: float = 0.5e6
    surge_multiplier: float = 3.0
    surge_on_prob: float = 0.02
    surge_off_prob: float = 0.2
    profile_mix: typing.Tuple[float, float] = (0.5, 0.5)

    def __post_init__(self):
        """Validate the traffic parameters."""
        object.__setattr__(self, 'profile_mix', tuple(float(w) for w in self.profile_mix))
        if self.base_rate_mean <= 0:
            raise ValueError('base_rate_mean must be positive.')
        if not 0 <= self.base_rate_spread < self.base_rate_mean:
            raise ValueError('base_rate_spread must be in [0, base_rate_mean).')
        if self.surge_multiplier < 1:
            raise ValueError('surge_multiplier must be at least 1.')
        for name in ('surge_on_prob', 'surge_off_prob'):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError('{} must be in [0, 1].'.format(name))
        if (len(self.profile_mix) != len(PROFILE_NAMES) or min(self.profile_mix) < 0 or
                sum(self.profile_mix) <= 0):
            raise ValueError('profile_mix must hold {} non-negative weights with a positive sum.'
                             .format(len(PROFILE_NAMES)))

    @property
    def max_rate(self):
        """Return the largest demand the process can produce in bits/s."""
        return (self.base_rate_mean + self.base_rate_spread) * self.surge_multiplier


@dataclasses.dataclass(frozen=True)
class ScenarioConfig:
    """The static description of a scenario.

    Parameters
    ----------
    area_half_width : float
        UAVs and cells live in the square [-area_half_width, area_half_width]^2 (meters).
    num_sites : int
        The number of GBS sites. Each site hosts three cells.
    cell_radius : float
        Circumradius of every hexagonal cell in meters.
    num_uavs : int
        The number of UAVs.
    num_users : int
        The number of ground users.
    uav_altitude : float
        The fixed flying altitude of every UAV in meters.
    v_max : float
        The largest displacement of a UAV in one step, in meters.
    p_max : float
        The largest transmit power of a UAV in watts.
    episode_length : int
        The number of steps T in an episode.
    dt : float
        The duration of one step in seconds.
    traffic : TrafficConfig
        The rate-demand process.
    schedule_mode : str
        Either 'random_fraction' or 'file'.
    sleep_fraction : float
        The fraction of cells that sleep in 'random_fraction' mode.
    schedule_path : str or None
        The schedule file used in 'file' mode.
    schedule_switch_step : int or None
        In 'random_fraction' mode, the step at which a second random set of cells goes to sleep.
    seed : int
        The seed all scenario randomness is derived from.

    """

    area_half_width: float = 1500.0
    num_sites: int = 3
    cell_radius: float = 250.0
    num_uavs: int = 2
    num_users: int = 30
    uav_altitude: float = 100.0
    v_max: float = 20.0
    p_max: float = 2.0
    episode_length: int = 100
    dt: float = 1.0
    traffic: TrafficConfig = dataclasses.field(default_factory=TrafficConfig)
    schedule_mode: str = 'random_fraction'
    sleep_fraction: float = 1 / 3
    schedule_path: typing.Optional[str] = None
    schedule_switch_step: typing.Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        """Validate the scenario parameters."""
        if isinstance(self.traffic, dict):
            object.__setattr__(self, 'traffic', TrafficConfig(**self.traffic))
        for name in ('num_sites', 'num_uavs', 'num_users', 'episode_length'):
            if getattr(self, name) < 1:
                raise ValueError('{} must be at least 1.'.format(name))
        for name in ('area_half_width', 'cell_radius', 'uav_altitude', 'v_max', 'p_max', 'dt'):
            if getattr(self, name) <= 0:
                raise ValueError('{} must be positive.'.format(name))
        if not 0 <= self.sleep_fraction <= 1:
            raise ValueError('sleep_fraction must be in [0, 1].')
        if self.schedule_mode not in ('random_fraction', 'file'):
            raise ValueError('schedule_mode must be one of: random_fraction, file.')
        if self.schedule_mode == 'file' and self.schedule_path is None:
            raise ValueError('schedule_path is required when schedule_mode is file.')
        if (self.schedule_switch_step is not None and
                not 0 < self.schedule_switch_step < self.episode_length):
            raise ValueError('schedule_switch_step must be in (0, episode_length).')
        if self.seed < 0:
            raise ValueError('seed must be non-negative.')

    @property
    def num_cells(self):
        """Return the number of cells K."""
        return 3 * self.num_sites


class Cell(typing.NamedTuple):
    """A hexagonal sector cell."""

    id: int
    site_id: int
    center: np.ndarray
    radius: float
    state_schedule: np.ndarray


class User(typing.NamedTuple):
    """A fixed ground user."""

    id: int
    position: np.ndarray
    home_cell: int
    demand_profile: np.ndarray


@dataclasses.dataclass(frozen=True, eq=False)
class World:
    """An immutable scenario built by build_world.

    Attributes
    ----------
    config : ScenarioConfig
        The configuration the world was built from.
    site_centers : np.ndarray
        Array of shape (num_sites, 2).
    cell_centers : np.ndarray
        Array of shape (K, 2).
    cell_sites : np.ndarray
        cell_sites[k] is the site hosting cell k.
    schedule : np.ndarray
        Array of shape (K, T) where schedule[k, t] = s_k(t).
    user_positions : np.ndarray
        Array of shape (M, 2).
    home_cells : np.ndarray
        home_cells[j] is the index of the cell center nearest to user j.
    profiles : np.ndarray
        profiles[j] indexes PROFILE_NAMES.
    base_rates : np.ndarray
        The per-user base rate in bits/s.
    surges : np.ndarray
        Boolean array of shape (M, T), the surge chain state of each user.
    demands : np.ndarray
        Array of shape (M, T) where demands[j, t] = R_req,j(t).

    """

    config: ScenarioConfig
    site_centers: np.ndarray
    cell_centers: np.ndarray
    cell_sites: np.ndarray
    schedule: np.ndarray
    user_positions: np.ndarray
    home_cells: np.ndarray
    profiles: np.ndarray
    base_rates: np.ndarray
    surges: np.ndarray
    demands: np.ndarray

    def __post_init__(self):
        """Freeze all arrays."""
        for field in dataclasses.fields(self):
            value = getattr(self, field.name)
            if isinstance(value, np.ndarray):
                value.setflags(write=False)

    @property
    def num_cells(self):
        """Return the number of cells K."""
        return len(self.cell_centers)

    @property
    def num_users(self):
        """Return the number of users M."""
        return len(self.user_positions)

    @property
    def episode_length(self):
        """Return the number of steps T."""
        return self.config.episode_length

    @property
    def cells(self):
        """Return a list of Cell records."""
        return [Cell(k, int(self.cell_sites[k]), self.cell_centers[k], self.config.cell_radius,
                     self.schedule[k]) for k in range(self.num_cells)]

    @property
    def users(self):
        """Return a list of User records."""
        return [User(j, self.user_positions[j], int(self.home_cells[j]), self.demands[j])
                for j in range(self.num_users)]

    def _check_step(self, t):
        if not 0 <= t < self.episode_length:
            raise IndexError('Step {} is outside [0, {}).'.format(t, self.episode_length))

    def cell_states(self, t):
        """Return the ON/OFF state of every cell at step t."""
        self._check_step(t)
        return self.schedule[:, t]

    def inactive_cells(self, t):
        """Return the set A(t) of cells that are OFF at step t.

        Parameters
        ----------
        t : int
            The step, 0 <= t < T.

        Returns
        -------
        inactive : set of int
            The indices k with s_k(t) = 0.

        """
        return {int(k) for k in np.flatnonzero(self.cell_states(t) == 0)}

    def uav_needed(self, t):
        """Return a boolean mask of the users whose home cell is OFF at step t."""
        return self.cell_states(t)[self.home_cells] == 0

    def demand_at(self, user_id, t):
        """Return the rate demand R_req,j(t) of a user in bits/s.

        Parameters
        ----------
        user_id : int
            The user index j.
        t : int
            The step, 0 <= t < T.

        Returns
        -------
        demand : float
            The base rate of the user, multiplied by the surge multiplier if the user's surge
            chain is ON at t.

        """
        if not 0 <= user_id < self.num_users:
            raise IndexError('User {} is outside [0, {}).'.format(user_id, self.num_users))
        self._check_step(t)
        return float(self.demands[user_id, t])

    def episode_random(self, episode_seed):
        """Return the random stream owned by a single episode."""
        return make_random(self.config.seed, 1, episode_seed)

    def world_hash(self):
        """Return a hex digest that identifies the scenario contents."""
        digest = hashlib.sha256()
        for array in (self.site_centers, self.cell_centers, self.cell_sites, self.schedule,
                      self.user_positions, self.home_cells, self.demands):
            digest.update(np.ascontiguousarray(array).tobytes())
        digest.update(repr(self.config).encode('utf-8'))
        return digest.hexdigest()


def hex_site_centers(num_sites, spacing):
    """Generate site centers on a hexagonal lattice, filling rings outward from the origin.

    Parameters
    ----------
    num_sites : int
        The number of site centers.
    spacing : float
        The distance between neighboring sites.

    Returns
    -------
    centers : np.ndarray
        Array of shape (num_sites, 2). Site 0 is at the origin; later sites are sorted by ring
        and then counter-clockwise by angle.

    """
    num_rings = 0
    while 1 + 3 * num_rings * (num_rings + 1) < num_sites:
        num_rings += 1

    candidates = []
    for q in range(-num_rings, num_rings + 1):
        for r in range(max(-num_rings, -q - num_rings), min(num_rings, -q + num_rings) + 1):
            ring = max(abs(q), abs(r), abs(q + r))
            x = spacing * (q + r / 2)
            y = spacing * math.sqrt(3) / 2 * r
            angle = math.atan2(y, x) % (2 * math.pi)
            candidates.append((ring, round(angle, 9), x, y))
    candidates.sort()
    return np.array([[x, y] for _, _, x, y in candidates[:num_sites]])


def inside_hexagon(points, center, radius):
    """Return whether each point lies inside a flat-top hexagon.

    Parameters
    ----------
    points : np.ndarray
        Array of shape (n, 2).
    center : np.ndarray
        The hexagon center.
    radius : float
        The hexagon circumradius.

    Returns
    -------
    inside : np.ndarray
        Boolean array of shape (n,).

    """
    offset = np.abs(np.asarray(points) - center)
    half_height = math.sqrt(3) / 2 * radius
    return (offset[:, 1] <= half_height) & (
        math.sqrt(3) * offset[:, 0] + offset[:, 1] <= math.sqrt(3) * radius)


def nearest_cells(points, cell_centers):
    """Return the index of the nearest cell center to each point, ties to the lowest index."""
    distances = np.linalg.norm(points[:, np.newaxis, :] - cell_centers[np.newaxis], axis=-1)
    return np.argmin(distances, axis=1)


def build_world(config):
    """Build an immutable world from a scenario configuration.

    Parameters
    ----------
    config : ScenarioConfig
        The scenario. The same config (including seed) always yields an identical world.

    Returns
    -------
    world : World
        The constructed world.

    """
    random = make_random(config.seed, 0)
    radius = config.cell_radius
    site_centers = hex_site_centers(config.num_sites, 3 * radius)
    offsets = np.array([[math.cos(math.radians(a)), math.sin(math.radians(a))]
                        for a in SECTOR_ANGLES]) * radius
    cell_centers = (site_centers[:, np.newaxis, :] + offsets[np.newaxis]).reshape(-1, 2)
    cell_sites = np.repeat(np.arange(config.num_sites), len(SECTOR_ANGLES))
    if np.any(np.abs(cell_centers) + radius > config.area_half_width):
        raise ValueError('{} sites of radius {} do not fit in an area of half width {}.'.format(
            config.num_sites, radius, config.area_half_width))

    user_positions = _place_users(config.num_users, cell_centers, radius, random)
    home_cells = nearest_cells(user_positions, cell_centers)
    profiles, base_rates, surges, demands = _sample_traffic(config, random)
    schedule = _build_schedule(config, len(cell_centers), random)

    return World(config=config,
                 site_centers=site_centers,
                 cell_centers=cell_centers,
                 cell_sites=cell_sites,
                 schedule=schedule,
                 user_positions=user_positions,
                 home_cells=home_cells,
                 profiles=profiles,
                 base_rates=base_rates,
                 surges=surges,
                 demands=demands)


def _place_users(num_users, cell_centers, radius, random):
    """Place users uniformly over the union of cells by rejection sampling."""
    low = cell_centers.min(axis=0) - radius
    high = cell_centers.max(axis=0) + radius
    positions = []
    while len(positions) < num_users:
        candidates = random.uniform(low, high, size=(2 * num_users, 2))
        nearest = nearest_cells(candidates, cell_centers)
        for point, cell in zip(candidates, nearest):
            if inside_hexagon(point[np.newaxis], cell_centers[cell], radius)[0]:
                positions.append(point)
    return np.array(positions[:num_users])


def _sample_traffic(config, random):
    """Pre-sample profiles, base rates and surge chains for every user."""
    traffic = config.traffic
    num_users, num_steps = config.num_users, config.episode_length
    weights = np.array(traffic.profile_mix) / sum(traffic.profile_mix)
    profiles = random.choice(len(PROFILE_NAMES), size=num_users, p=weights)
    scales = np.array([PROFILE_SCALES[name] for name in PROFILE_NAMES])[profiles]
    low = traffic.base_rate_mean - traffic.base_rate_spread
    high = traffic.base_rate_mean + traffic.base_rate_spread
    base_rates = scales * np.exp(random.uniform(np.log(low), np.log(high), size=num_users))

    surges = np.zeros((num_users, num_steps), dtype=bool)
    draws = random.uniform(size=(num_users, num_steps))
    for t in range(1, num_steps):
        previous = surges[:, t - 1]
        surges[:, t] = np.where(previous, draws[:, t] >= traffic.surge_off_prob,
                                draws[:, t] < traffic.surge_on_prob)
    demands = base_rates[:, np.newaxis] * np.where(surges, traffic.surge_multiplier, 1.0)
    return profiles, base_rates, surges, demands


def _build_schedule(config, num_cells, random):
    """Build the K x T ON/OFF schedule."""
    num_steps = config.episode_length
    if config.schedule_mode == 'file':
        schedule = data_utils.read_schedule(config.schedule_path)
        if schedule.shape != (num_cells, num_steps):
            raise ValueError('Schedule file has shape {} but the scenario needs {}.'.format(
                schedule.shape, (num_cells, num_steps)))
        return schedule

    num_off = int(math.floor(num_cells * config.sleep_fraction + 1e-9))
    schedule = np.ones((num_cells, num_steps), dtype=np.int8)
    schedule[random.choice(num_cells, size=num_off, replace=False), :] = 0
    if config.schedule_switch_step is not None:
        switch = config.schedule_switch_step
        schedule[:, switch:] = 1
        schedule[random.choice(num_cells, size=num_off, replace=False), switch:] = 0
    return schedule
