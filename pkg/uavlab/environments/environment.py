"""Defines the base class from which multi-agent environments inherit.

Environment is the interface all environments must implement. Agents interact with it through
joint actions (one row per agent) and receive one observation per agent plus a global state that
only centralized critics may use.
"""
import abc


class Environment(abc.ABC):
    """The interface all environments must implement."""

    @abc.abstractmethod
    def reset(self, episode_seed=None):
        """Reset the environment to the start of an episode. Must be called before the first step.

        Parameters
        ----------
        episode_seed : int, optional
            The seed of the episode's random stream. Uses the seed set by seed() when omitted.

        Returns
        -------
        observations : np.ndarray
            Array of shape (num_agents, observation_size), the local observation of each agent.
        global_state : np.ndarray
            Array of shape (state_size,), the state visible to centralized critics.

        """
        raise NotImplementedError

    @abc.abstractmethod
    def step(self, actions):
        """Run one timestep of the environment.

        Parameters
        ----------
        actions : np.ndarray
            Array of shape (num_agents, action_size) of raw actions in [-1, 1].

        Returns
        -------
        outcome : StepOutcome
            The rewards, next observations, next global state, done flag and extra information
            that can be used for debugging and evaluation.

        """
        raise NotImplementedError

    @property
    @abc.abstractmethod
    def num_agents(self):
        """Return the number of agents acting in the environment."""
        raise NotImplementedError

    @property
    @abc.abstractmethod
    def observation_size(self):
        """Return the length of each agent's observation vector."""
        raise NotImplementedError

    @property
    @abc.abstractmethod
    def state_size(self):
        """Return the length of the global state vector."""
        raise NotImplementedError

    @property
    @abc.abstractmethod
    def action_size(self):
        """Return the length of each agent's action vector."""
        raise NotImplementedError

    @property
    @abc.abstractmethod
    def name(self):
        """Name of environment, used for saving."""
        raise NotImplementedError

    def seed(self, seed=None):
        """Set the seed for this environment's random number generator(s)."""

    def close(self):
        """Perform any necessary cleanup."""

    def __enter__(self):
        """Return the environment when used as a context manager."""
        return self

    def __exit__(self, *args):
        """Perform any necessary cleanup when the object goes out of context."""
        self.close()
        return False
