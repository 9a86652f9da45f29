"""Contains make, a function to instantiate a standardized environment from a string."""
import copy
import dataclasses

from . import channel
from . import energy
from . import world
from .coverage import RewardWeights, UavCoverage

NAMED_ENV_DICT = {
    'nes-desk-v1': (
        UavCoverage,
        dict(num_sites=3,
             num_uavs=2,
             num_users=30,
             episode_length=100,
             sleep_fraction=1 / 3)
    ),
    'nes-tiny-v1': (
        UavCoverage,
        dict(num_sites=1,
             num_uavs=1,
             num_users=6,
             episode_length=10,
             area_half_width=800.0,
             sleep_fraction=1 / 3)
    ),
}

_SCENARIO_KEYS = {field.name for field in dataclasses.fields(world.ScenarioConfig)}
_CHANNEL_KEYS = {field.name for field in dataclasses.fields(channel.ChannelParams)}
_ENERGY_KEYS = {field.name for field in dataclasses.fields(energy.EnergyParams)} - {'dt'}
_REWARD_KEYS = {field.name for field in dataclasses.fields(RewardWeights)}
_ENV_KEYS = {'observation_radius', 'spawn_points', 'fleet_power_max'}


def make(name, **kwargs):
    """
    Create an environment by name.

    You may optionally override any scenario, channel, energy, reward or environment argument by
    specifying kwargs.

    Parameters
    ----------
    name : str
        The name of the environment.

    Returns
    ------
    env : Environment
        The constructed environment.

    """
    if name not in NAMED_ENV_DICT:
        raise ValueError('{} is not a valid environment name. '.format(name) +
                         'Valid named environments: {}'.format(list(NAMED_ENV_DICT.keys())))
    env_class, params = NAMED_ENV_DICT[name]
    params = copy.deepcopy(params)
    params.update(kwargs)

    unknown = set(params) - (_SCENARIO_KEYS | _CHANNEL_KEYS | _ENERGY_KEYS | _REWARD_KEYS |
                             _ENV_KEYS)
    if unknown:
        raise ValueError('Unknown environment arguments: {}'.format(sorted(unknown)))

    def pick(keys):
        return {key: value for key, value in params.items() if key in keys}

    scenario = world.build_world(world.ScenarioConfig(**pick(_SCENARIO_KEYS)))
    return env_class(scenario,
                     channel_params=channel.ChannelParams(**pick(_CHANNEL_KEYS)),
                     energy_params=energy.EnergyParams(**pick(_ENERGY_KEYS)),
                     reward_weights=RewardWeights(**pick(_REWARD_KEYS)),
                     **pick(_ENV_KEYS))
