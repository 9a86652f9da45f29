"""Temporally correlated Ornstein-Uhlenbeck exploration noise."""
import numpy as np


class OUNoise:
    """Ornstein-Uhlenbeck noise with one process per agent and action component.

    Each sample advances N_t = N_{t-1} + theta (mu - N_{t-1}) dt + sigma sqrt(dt) W_t, with W_t
    standard normal, and then decays sigma by sigma_decay down to sigma_min.

    Parameters
    ----------
    num_agents : int
        The number of agents.
    action_size : int
        The number of action components per agent.
    mu : float
        The long-run mean.
    theta : float
        The mean-reversion rate.
    sigma : float
        The initial volatility.
    sigma_decay : float
        The factor sigma is multiplied by after every sample.
    sigma_min : float
        The floor of the decay.
    dt : float
        The step of the recurrence.
    random : np.random.RandomState, optional
        The noise stream.

    """

    def __init__(self, num_agents, action_size, mu=0.0, theta=0.15, sigma=0.2,
                 sigma_decay=0.9999, sigma_min=0.01, dt=1.0, random=None):
        """Create a noise process at its mean."""
        if theta < 0 or sigma < 0 or sigma_min < 0:
            raise ValueError('theta, sigma and sigma_min must be non-negative.')
        if not 0 < sigma_decay <= 1:
            raise ValueError('sigma_decay must be in (0, 1].')
        self._shape = (num_agents, action_size)
        self.mu = mu
        self.theta = theta
        self.sigma = sigma
        self.sigma_decay = sigma_decay
        self.sigma_min = sigma_min
        self.dt = dt
        self._random = random if random is not None else np.random.RandomState(0)
        self.state = np.full(self._shape, float(mu))

    @property
    def random(self):
        """Return the noise stream."""
        return self._random

    def reset(self):
        """Move the process back to its mean. Sigma keeps its decayed value."""
        self.state = np.full(self._shape, float(self.mu))

    def sample(self):
        """Advance the process by one step and return the new noise."""
        drift = self.theta * (self.mu - self.state) * self.dt
        diffusion = self.sigma * np.sqrt(self.dt) * self._random.standard_normal(self._shape)
        self.state = self.state + drift + diffusion
        if self.sigma > self.sigma_min:
            self.sigma = max(self.sigma_min, self.sigma * self.sigma_decay)
        return self.state.copy()

    def to_dict(self):
        """Serialize the process, excluding its random stream."""
        return {'mu': self.mu,
                'theta': self.theta,
                'sigma': self.sigma,
                'sigma_decay': self.sigma_decay,
                'sigma_min': self.sigma_min,
                'dt': self.dt,
                'state': self.state.tolist()}

    def load_dict(self, document):
        """Restore the process from the output of to_dict."""
        for name in ('mu', 'theta', 'sigma', 'sigma_decay', 'sigma_min', 'dt'):
            setattr(self, name, document[name])
        self.state = np.array(document['state'], dtype=np.float64).reshape(self._shape)
