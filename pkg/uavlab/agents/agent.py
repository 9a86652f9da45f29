"""Defines the base class from which agents inherit and the description of evaluated policies.

An agent controls every UAV of an environment. Agents used in the experiment framework must be a
descendent of the Agent base class.
"""
import abc
import dataclasses
import typing

POLICY_TAGS = ('maddpg_checkpoint', 'random', 'knn_fixed', 'all_cells_on')

# Policy names accepted on the command line.
CLI_POLICY_TAGS = {'maddpg': 'maddpg_checkpoint',
                   'random': 'random',
                   'knn': 'knn_fixed',
                   'allon': 'all_cells_on'}


class Agent(abc.ABC):
    """The interface for agents."""

    @property
    @abc.abstractmethod
    def name(self):
        """Get the name of the agent."""
        raise NotImplementedError

    @property
    @abc.abstractmethod
    def hyperparameters(self):
        """Get a dict of all the agent's hyperparameters."""
        raise NotImplementedError

    def reset(self, episode_seed=None):
        """Prepare the agent for a new evaluation episode.

        Parameters
        ----------
        episode_seed : int, optional
            The seed of the episode about to start.

        """

    @abc.abstractmethod
    def act(self, observations, env):
        """Choose the joint action of all UAVs.

        Parameters
        ----------
        observations : np.ndarray
            Array of shape (N, observation_size), the local observation of each UAV.
        env : UavCoverage
            The environment. Heuristic agents may read its world view. Learned agents only use
            the observations.

        Returns
        -------
        actions : np.ndarray
            Array of shape (N, 3) of raw actions in [-1, 1].

        """
        raise NotImplementedError


@dataclasses.dataclass(frozen=True)
class PolicyKind:
    """The policy an evaluation runs.

    Parameters
    ----------
    tag : str
        One of 'maddpg_checkpoint', 'random', 'knn_fixed' or 'all_cells_on'.
    checkpoint : str, optional
        The checkpoint directory of a learned policy.
    fixed_power : float, optional
        The power every UAV transmits at under KNN-Fixed. Defaults to p_max / N.
    k : int
        The number of neighbors KNN-Fixed averages over.
    seed : int
        The seed of the random policy.

    """

    tag: str
    checkpoint: typing.Optional[str] = None
    fixed_power: typing.Optional[float] = None
    k: int = 6
    seed: int = 0

    def __post_init__(self):
        """Validate the policy description."""
        if self.tag not in POLICY_TAGS:
            raise ValueError('{} is not a valid policy. Valid policies: {}'.format(
                self.tag, ', '.join(POLICY_TAGS)))
        if self.tag == 'maddpg_checkpoint' and self.checkpoint is None:
            raise ValueError('A checkpoint is required to evaluate a learned policy.')
        if self.fixed_power is not None and self.fixed_power < 0:
            raise ValueError('fixed_power must be non-negative.')
        if self.k < 1:
            raise ValueError('k must be at least 1.')

    @classmethod
    def from_cli_name(cls, name, **kwargs):
        """Create a policy from its command line name (maddpg, random, knn or allon)."""
        if name not in CLI_POLICY_TAGS:
            raise ValueError('{} is not a valid policy name. Valid names: {}'.format(
                name, ', '.join(CLI_POLICY_TAGS)))
        return cls(CLI_POLICY_TAGS[name], **kwargs)

    @property
    def method_name(self):
        """Return the name the policy is reported under."""
        return {'maddpg_checkpoint': 'maddpg',
                'random': 'random',
                'knn_fixed': 'knn_fixed',
                'all_cells_on': 'all_cells_on'}[self.tag]
