"""Energy accounting for UAVs, cells and GBS sites.

Step energies are kept in joules. Ledgers report totals in watt-hours.
"""
import dataclasses

import numpy as np
import pandas as pd

JOULES_PER_WH = 3600.0


def joules_to_wh(joules):
    """Convert joules into watt-hours."""
    return joules / JOULES_PER_WH


def wh_to_joules(wh):
    """Convert watt-hours into joules."""
    return wh * JOULES_PER_WH


@dataclasses.dataclass(frozen=True)
class EnergyParams:
    """Parameters of the UAV and cell energy models.

    Parameters
    ----------
    alpha1 : float
        Quadratic propulsion coefficient in J / m^2 (per step).
    alpha2 : float
        Linear propulsion coefficient in J / m (per step).
    dt : float
        Step duration in seconds.
    p_static : float
        Power drawn by an ON cell at zero load, in watts.
    delta_p : float
        Load-dependent power slope of a cell, in watts at full load.
    p_site : float
        Site overhead power drawn while any cell of the site is ON, in watts.
    cell_capacity : float
        Traffic in bits/s that saturates a cell. May be np.inf.

    """

    alpha1: float = 0.5
    alpha2: float = 5.0
    dt: float = 1.0
    p_static: float = 130.0
    delta_p: float = 50.0
    p_site: float = 100.0
    cell_capacity: float = 5e6

    def __post_init__(self):
        """Validate the energy parameters."""
        for name in ('alpha1', 'alpha2', 'p_static', 'delta_p', 'p_site'):
            if getattr(self, name) < 0:
                raise ValueError('{} must be non-negative.'.format(name))
        if self.dt <= 0:
            raise ValueError('dt must be positive.')
        if self.cell_capacity <= 0:
            raise ValueError('cell_capacity must be positive.')

    def max_step_energy(self, p_max, v_max):
        """Return E_max = P_max dt + alpha1 v_max^2 + alpha2 v_max in joules."""
        return p_max * self.dt + self.alpha1 * v_max ** 2 + self.alpha2 * v_max


@dataclasses.dataclass(frozen=True)
class EnergyLedger:
    """Per-step energy of every UAV, cell and site.

    Attributes
    ----------
    uav_prop : np.ndarray
        Array of shape (T, N), propulsion energy in joules.
    uav_comm : np.ndarray
        Array of shape (T, N), communication energy in joules.
    cell : np.ndarray
        Array of shape (T, K), cell energy in joules.
    site : np.ndarray
        Array of shape (T, S), site overhead energy in joules.
    dt : float
        Step duration in seconds.

    """

    uav_prop: np.ndarray
    uav_comm: np.ndarray
    cell: np.ndarray
    site: np.ndarray
    dt: float

    @property
    def num_steps(self):
        """Return the number of steps covered by the ledger."""
        return self.cell.shape[0]

    @property
    def uav(self):
        """Return E_i(t) = E_prop + E_comm in joules, shape (T, N)."""
        return self.uav_prop + self.uav_comm

    @property
    def uav_total_joules(self):
        """Return the episode energy of each UAV in joules."""
        return self.uav.sum(axis=0)

    @property
    def uav_wh(self):
        """Return the episode energy of each UAV in Wh."""
        return joules_to_wh(self.uav.sum(axis=0))

    @property
    def cell_wh(self):
        """Return the episode energy E_c of each cell in Wh."""
        return joules_to_wh(self.cell.sum(axis=0))

    @property
    def site_wh(self):
        """Return the episode energy E_s of each site in Wh."""
        return joules_to_wh(self.site.sum(axis=0))

    @property
    def e_uav(self):
        """Return E_UAV, the energy of all UAVs in Wh."""
        return float(self.uav_wh.sum())

    @property
    def e_cell(self):
        """Return the energy of all cells in Wh, excluding site overhead."""
        return float(self.cell_wh.sum())

    @property
    def e_site(self):
        """Return the site overhead energy in Wh."""
        return float(self.site_wh.sum())

    @property
    def e_total(self):
        """Return E_total = sum E_c + sum E_s in Wh."""
        return self.e_cell + self.e_site

    @classmethod
    def concatenate(cls, ledgers):
        """Join ledgers of consecutive step ranges into one ledger."""
        ledgers = list(ledgers)
        if not ledgers:
            raise ValueError('Need at least one ledger to concatenate.')
        return cls(uav_prop=np.concatenate([ledger.uav_prop for ledger in ledgers]),
                   uav_comm=np.concatenate([ledger.uav_comm for ledger in ledgers]),
                   cell=np.concatenate([ledger.cell for ledger in ledgers]),
                   site=np.concatenate([ledger.site for ledger in ledgers]),
                   dt=ledgers[0].dt)

    def to_frame(self):
        """Flatten the ledger into a table with one row per entity and step.

        Returns
        -------
        frame : pd.DataFrame
            Columns entity_id, kind ('uav', 'cell' or 'site'), t, watts and joules.

        """
        frames = []
        for kind, joules in (('uav', self.uav), ('cell', self.cell), ('site', self.site)):
            num_steps, num_entities = joules.shape
            frames.append(pd.DataFrame({
                'entity_id': np.repeat(np.arange(num_entities), num_steps),
                'kind': kind,
                't': np.tile(np.arange(num_steps), num_entities),
                'watts': joules.T.reshape(-1) / self.dt,
                'joules': joules.T.reshape(-1),
            }))
        return pd.concat(frames, ignore_index=True)


def uav_step_energy(displacement, power, params):
    """Compute the energy a UAV spends in one step.

    Parameters
    ----------
    displacement : array_like
        The displacement dq in meters, last axis of size 2. Several UAVs may be passed at once.
    power : float or array_like
        The transmit power in watts.
    params : EnergyParams
        The energy parameters.

    Returns
    -------
    e_prop : float or np.ndarray
        alpha1 |dq|^2 + alpha2 |dq| in joules.
    e_comm : float or np.ndarray
        power * dt in joules.

    """
    power = np.asarray(power, dtype=float)
    if np.any(power < 0):
        raise ValueError('Transmit power must be non-negative.')
    distance = np.linalg.norm(np.asarray(displacement, dtype=float), axis=-1)
    e_prop = params.alpha1 * distance ** 2 + params.alpha2 * distance
    e_comm = power * params.dt
    if e_prop.ndim == 0 and e_comm.ndim == 0:
        return float(e_prop), float(e_comm)
    return e_prop, e_comm


def cell_step_power(state, load, params):
    """Compute the instantaneous power of one or more cells.

    Parameters
    ----------
    state : int or array_like
        The ON (1) / OFF (0) state z.
    load : float or array_like
        The load fraction phi in [0, 1].
    params : EnergyParams
        The energy parameters.

    Returns
    -------
    power : float or np.ndarray
        z (P_static + delta_p phi) in watts.

    """
    load = np.asarray(load, dtype=float)
    if np.any(load < 0) or np.any(load > 1):
        raise ValueError('Load fractions must be in [0, 1].')
    power = np.asarray(state, dtype=float) * (params.p_static + params.delta_p * load)
    if power.ndim == 0:
        return float(power)
    return power


def cell_loads(home_cells, demands, cell_states, capacity):
    """Decide which users active cells serve and how loaded each cell is.

    Users of an active cell are admitted in index order while the admitted demand stays within
    the cell capacity.

    Parameters
    ----------
    home_cells : np.ndarray
        The home cell of each user.
    demands : np.ndarray
        The demand of each user in bits/s.
    cell_states : np.ndarray
        The ON/OFF state of each cell.
    capacity : float
        The cell capacity in bits/s.

    Returns
    -------
    loads : np.ndarray
        The load fraction min(1, admitted demand / capacity) of each cell, zero for OFF cells.
    gbs_served : np.ndarray
        Boolean mask of the users served by their home cell.

    """
    num_cells = len(cell_states)
    loads = np.zeros(num_cells)
    gbs_served = np.zeros(len(home_cells), dtype=bool)
    for cell in np.flatnonzero(np.asarray(cell_states) == 1):
        admitted = 0.0
        for user in np.flatnonzero(home_cells == cell):
            if admitted + demands[user] <= capacity:
                admitted += demands[user]
                gbs_served[user] = True
        loads[cell] = min(1.0, admitted / capacity)
    return loads, gbs_served


def episode_ledger(cell_states, loads, displacements, powers, cell_sites, params):
    """Integrate a trace of step powers into an energy ledger.

    Parameters
    ----------
    cell_states : np.ndarray
        Array of shape (T, K) of cell ON/OFF states.
    loads : np.ndarray
        Array of shape (T, K) of cell load fractions.
    displacements : np.ndarray
        Array of shape (T, N, 2) of UAV displacements in meters.
    powers : np.ndarray
        Array of shape (T, N) of UAV transmit powers in watts.
    cell_sites : np.ndarray
        cell_sites[k] is the site hosting cell k.
    params : EnergyParams
        The energy parameters.

    Returns
    -------
    ledger : EnergyLedger
        Site energy accrues P_site dt in every step where at least one cell of the site is ON.

    """
    cell_states = np.asarray(cell_states)
    loads = np.asarray(loads, dtype=float)
    displacements = np.asarray(displacements, dtype=float)
    powers = np.asarray(powers, dtype=float)
    num_steps = cell_states.shape[0]
    if (loads.shape != cell_states.shape or len(displacements) != num_steps or
            len(powers) != num_steps or displacements.shape[:2] != powers.shape):
        raise ValueError('Trace arrays cover inconsistent numbers of steps or entities.')
    if len(cell_sites) != cell_states.shape[1]:
        raise ValueError('cell_sites must have one entry per cell.')

    uav_prop, uav_comm = uav_step_energy(displacements, powers, params)
    cell = cell_step_power(cell_states, loads, params) * params.dt
    num_sites = int(np.max(cell_sites)) + 1 if len(cell_sites) else 0
    site = np.zeros((num_steps, num_sites))
    for site_id in range(num_sites):
        site_on = np.any(cell_states[:, np.asarray(cell_sites) == site_id] == 1, axis=1)
        site[:, site_id] = site_on * params.p_site * params.dt
    return EnergyLedger(uav_prop=np.asarray(uav_prop, dtype=float).reshape(powers.shape),
                        uav_comm=np.asarray(uav_comm, dtype=float).reshape(powers.shape),
                        cell=np.asarray(cell, dtype=float).reshape(cell_states.shape),
                        site=site,
                        dt=params.dt)
