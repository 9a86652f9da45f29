"""Air-to-ground channel, SINR and best-SINR association.

Large-scale gain follows w0 * d^-alpha and small-scale fading is Rician with a fixed-phase LoS
term. Active cells are modeled as interferers using the same channel with the GBS height in place
of the UAV altitude. Users whose home cell is ON are served by that cell and are never associated
with a UAV.
"""
import dataclasses
import typing

import numpy as np


def noise_power_from_density(density_dbm_per_hz, bandwidth, noise_figure_db=0.0):
    """Convert a thermal noise density into the noise power over a bandwidth in watts."""
    noise_dbm = density_dbm_per_hz + 10 * np.log10(bandwidth) + noise_figure_db
    return 10 ** ((noise_dbm - 30) / 10)


@dataclasses.dataclass(frozen=True)
class ChannelParams:
    """Parameters of the channel model.

    Parameters
    ----------
    w0 : float
        Linear power gain at the 1 m reference distance.
    alpha : float
        Path-loss exponent, at least 2.
    rician_G : float
        Linear Rician factor. np.inf gives a pure LoS channel.
    bandwidth : float
        Bandwidth of every link in Hz.
    noise_power : float
        Thermal noise power in watts. Replaced by the power derived from noise_density_dbm_hz
        when that is given.
    gbs_tx_power : float
        Transmit power of every active cell in watts.
    gbs_height : float
        Antenna height of the ground base stations in meters.
    noise_density_dbm_hz : float, optional
        Thermal noise density in dBm/Hz, for example -174.
    noise_figure_db : float
        Receiver noise figure added to the density.

    """

    w0: float = 1e-4
    alpha: float = 2.2
    rician_G: float = 10.0  # pylint: disable=invalid-name
    bandwidth: float = 1e6
    noise_power: float = 1e-13
    gbs_tx_power: float = 5.0
    gbs_height: float = 25.0
    noise_density_dbm_hz: typing.Optional[float] = None
    noise_figure_db: float = 0.0

    def __post_init__(self):
        """Validate the channel parameters."""
        if self.alpha < 2:
            raise ValueError('alpha must be at least 2.')
        if self.rician_G < 0:
            raise ValueError('rician_G must be non-negative.')
        for name in ('w0', 'bandwidth', 'noise_power', 'gbs_height'):
            if getattr(self, name) <= 0:
                raise ValueError('{} must be positive.'.format(name))
        if self.gbs_tx_power < 0:
            raise ValueError('gbs_tx_power must be non-negative.')
        if self.noise_density_dbm_hz is not None:
            object.__setattr__(self, 'noise_power', float(noise_power_from_density(
                self.noise_density_dbm_hz, self.bandwidth, self.noise_figure_db)))


@dataclasses.dataclass(frozen=True)
class SinrReport:
    """The link state of one step.

    Attributes
    ----------
    gains : np.ndarray
        Array of shape (N + C, M) of |h|^2, UAVs first and then active cells.
    sinr : np.ndarray
        Array of shape (N, M), the SINR of every UAV-user link.
    rates : np.ndarray
        Array of shape (N, M), the achievable rate of every UAV-user link in bits/s.
    assoc : np.ndarray
        assoc[j] is the UAV serving user j or -1 if the user has no UAV.
    served_mask : np.ndarray
        served_mask[j] is true if user j is associated and its rate meets its demand.

    """

    gains: np.ndarray
    sinr: np.ndarray
    rates: np.ndarray
    assoc: np.ndarray
    served_mask: np.ndarray

    @property
    def num_uavs(self):
        """Return the number of UAVs N."""
        return self.sinr.shape[0]

    def served_by(self, uav_id):
        """Return a mask of the users served by a given UAV."""
        return self.served_mask & (self.assoc == uav_id)


def link_distance(uav_pos, altitude, user_pos):
    """Compute the 3D distance between UAVs at a fixed altitude and ground users.

    Parameters
    ----------
    uav_pos : array_like
        Horizontal UAV position(s), last axis of size 2. Broadcasts against user_pos.
    altitude : float
        The UAV altitude H, must be positive.
    user_pos : array_like
        Horizontal user position(s), last axis of size 2.

    Returns
    -------
    distance : float or np.ndarray
        sqrt(H^2 + dx^2 + dy^2).

    """
    offset = np.asarray(uav_pos, dtype=float) - np.asarray(user_pos, dtype=float)
    return np.sqrt(altitude ** 2 + np.sum(offset ** 2, axis=-1))


def sample_channel_gain(distance, params, random):
    """Sample the channel power gain |h|^2 of one or more links.

    Parameters
    ----------
    distance : float or np.ndarray
        Link distance(s) in meters, all positive.
    params : ChannelParams
        The channel parameters.
    random : np.random.RandomState
        The stream the NLoS component is drawn from.

    Returns
    -------
    gain : float or np.ndarray
        w0 * d^-alpha * |h~|^2 where h~ mixes a unit LoS term and a CN(0, 1) scattered term
        weighted by the Rician factor, so that E[|h~|^2] = 1.

    """
    distance = np.asarray(distance, dtype=float)
    if np.any(distance <= 0):
        raise ValueError('Link distances must be positive.')
    if np.isinf(params.rician_G):
        los_weight, nlos_weight = 1.0, 0.0
    else:
        los_weight = np.sqrt(params.rician_G / (1 + params.rician_G))
        nlos_weight = np.sqrt(1 / (1 + params.rician_G))
    scattered = random.normal(scale=np.sqrt(0.5), size=distance.shape + (2,))
    real = los_weight + nlos_weight * scattered[..., 0]
    imag = nlos_weight * scattered[..., 1]
    gain = params.w0 * distance ** (-params.alpha) * (real ** 2 + imag ** 2)
    if gain.ndim == 0:
        return float(gain)
    return gain


def sample_gains(uav_positions, altitude, cell_centers, user_positions, params, random):
    """Sample the gain matrix from every transmitter to every user.

    Parameters
    ----------
    uav_positions : np.ndarray
        Array of shape (N, 2).
    altitude : float
        The UAV altitude.
    cell_centers : np.ndarray
        Array of shape (C, 2) holding the centers of the active cells only.
    user_positions : np.ndarray
        Array of shape (M, 2).
    params : ChannelParams
        The channel parameters.
    random : np.random.RandomState
        The episode stream.

    Returns
    -------
    gains : np.ndarray
        Array of shape (N + C, M), UAV rows first.

    """
    users = np.asarray(user_positions, dtype=float)[np.newaxis]
    uav_distances = link_distance(np.asarray(uav_positions, dtype=float).reshape(-1, 1, 2),
                                  altitude, users)
    cell_distances = link_distance(np.asarray(cell_centers, dtype=float).reshape(-1, 1, 2),
                                   params.gbs_height, users)
    distances = np.concatenate([uav_distances, cell_distances], axis=0)
    return sample_channel_gain(distances, params, random).reshape(distances.shape)


def compute_sinr(uav_powers, gains, demands, params, uav_needed=None):
    """Compute SINR, rates and best-SINR association for one step.

    Parameters
    ----------
    uav_powers : np.ndarray
        Transmit power of each of the N UAVs in watts.
    gains : np.ndarray
        Array of shape (N + C, M) from sample_gains.
    demands : np.ndarray
        The rate demand of each user in bits/s.
    params : ChannelParams
        The channel parameters.
    uav_needed : np.ndarray, optional
        Boolean mask of users whose home cell is OFF. Only these users are associated with a UAV.
        All users are eligible when omitted.

    Returns
    -------
    report : SinrReport
        SINR is P_i |h_ij|^2 over noise plus the power received from every other UAV and every
        active cell. Each eligible user is associated with the UAV of highest SINR (lowest index
        on ties) unless every UAV delivers zero SINR.

    """
    uav_powers = np.asarray(uav_powers, dtype=float).reshape(-1)
    gains = np.asarray(gains, dtype=float)
    num_uavs = len(uav_powers)
    if gains.ndim != 2 or gains.shape[0] < num_uavs:
        raise ValueError('gains must have shape (N + C, M) with N = {}.'.format(num_uavs))
    num_users = gains.shape[1]
    demands = np.asarray(demands, dtype=float).reshape(-1)
    if len(demands) != num_users:
        raise ValueError('Got {} demands for {} users.'.format(len(demands), num_users))
    if uav_needed is None:
        uav_needed = np.ones(num_users, dtype=bool)
    uav_needed = np.asarray(uav_needed, dtype=bool)
    if len(uav_needed) != num_users:
        raise ValueError('uav_needed must have one entry per user.')
    if np.any(uav_powers < 0):
        raise ValueError('UAV powers must be non-negative.')

    received = uav_powers[:, np.newaxis] * gains[:num_uavs]
    gbs_interference = params.gbs_tx_power * gains[num_uavs:].sum(axis=0)
    others = np.ones((num_uavs, num_uavs)) - np.eye(num_uavs)
    interference = others @ received + gbs_interference[np.newaxis]
    sinr = received / (params.noise_power + interference)
    rates = params.bandwidth * np.log2(1 + sinr)

    assoc = np.full(num_users, -1, dtype=int)
    if num_uavs > 0:
        best = np.argmax(sinr, axis=0)
        has_signal = sinr[best, np.arange(num_users)] > 0
        assoc = np.where(uav_needed & has_signal, best, -1)
    served_mask = np.zeros(num_users, dtype=bool)
    associated = assoc >= 0
    served_mask[associated] = (rates[assoc[associated], np.flatnonzero(associated)] >=
                               demands[associated])
    return SinrReport(gains=gains, sinr=sinr, rates=rates, assoc=assoc, served_mask=served_mask)


def total_throughput(report):
    """Return the network throughput sum_i sum_j a_ij R_ij of a report in bits/s."""
    associated = np.flatnonzero(report.assoc >= 0)
    return float(report.rates[report.assoc[associated], associated].sum())
