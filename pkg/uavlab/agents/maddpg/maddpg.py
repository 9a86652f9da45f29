"""Numpy implementation of centralized-training, decentralized-execution MADDPG."""
import dataclasses
import logging
import os
import typing

import numpy as np
import pandas as pd

from .maddpg_lib import nn
from .maddpg_lib import noise
from .maddpg_lib import replay
from .. import agent
from ... import data_utils
from ...environments import coverage
from ...environments import world as world_lib

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = 1
MANIFEST_FILE = 'manifest.json'
CURVE_COLUMNS = ('episode', 'mean_step_reward', 'sigma', 'lr')
EVAL_COLUMNS = ('episode', 'mean_step_reward', 'coverage')

# Training episode seeds live above every evaluation seed.
TRAIN_SEED_OFFSET = 2 ** 32

# Discount used until an environment supplies its own.
DEFAULT_GAMMA = coverage.RewardWeights().gamma


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    """Settings of a training run.

    The episode length comes from the environment.

    Parameters
    ----------
    episodes : int
        The number of training episodes.
    actor_lr : float
        The initial actor learning rate.
    critic_lr : float
        The initial critic learning rate.
    gamma : float, optional
        The discount factor in [0, 1). Defaults to the gamma of the environment's reward
        weights; a different explicit value is rejected when training starts.
    tau : float
        The Polyak factor in (0, 1].
    batch_size : int
        The number of transitions per update.
    warmup_steps : int
        The number of environment steps before the first update.
    update_interval : int
        Updates happen every update_interval environment steps.
    clip_norm : float
        The global gradient norm bound.
    hidden_sizes : tuple of int
        The hidden layer widths of every actor and critic.
    buffer_capacity : int
        The replay capacity, a power of two.
    alpha : float
        The prioritization exponent.
    beta_start : float
        The importance-sampling exponent at the first update.
    beta_end : float
        The importance-sampling exponent at the last planned step.
    priority_eps : float
        The priority floor.
    exploration_off_episode : int, optional
        The first episode without exploration noise. Defaults to 80% of the episodes.
    lr_decay_episode : int, optional
        The episode at which learning rates are multiplied by lr_decay_factor. Defaults to 20%
        of the episodes.
    lr_decay_factor : float
        The learning rate multiplier.
    eval_interval : int
        Run greedy evaluation episodes every eval_interval episodes. 0 disables evaluation.
    eval_episodes : int
        The number of greedy episodes per evaluation.
    checkpoint_interval : int
        Save a checkpoint every checkpoint_interval episodes. 0 disables periodic checkpoints.
    ou_theta : float
        The OU mean-reversion rate.
    ou_sigma : float
        The initial OU volatility.
    ou_sigma_decay : float, optional
        The per-step OU volatility decay. Defaults to the rate that brings sigma from ou_sigma
        to ou_sigma_min over the exploring steps of the run.
    ou_sigma_min : float
        The OU volatility floor.
    action_reg : float
        Weight of the squared tanh pre-activations in the actor loss. Keeps actors out of
        saturation.
    seed : int
        The seed of network initialization, noise, replay sampling and training episodes.

    """

    episodes: int = 3000
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    gamma: typing.Optional[float] = None
    tau: float = 0.01
    batch_size: int = 128
    warmup_steps: int = 1000
    update_interval: int = 2
    clip_norm: float = 1.0
    hidden_sizes: typing.Tuple[int, ...] = (64, 64)
    buffer_capacity: int = 2 ** 17
    alpha: float = 0.6
    beta_start: float = 0.4
    beta_end: float = 1.0
    priority_eps: float = 1e-6
    exploration_off_episode: typing.Optional[int] = None
    lr_decay_episode: typing.Optional[int] = None
    lr_decay_factor: float = 0.5
    eval_interval: int = 0
    eval_episodes: int = 1
    checkpoint_interval: int = 0
    ou_theta: float = 0.15
    ou_sigma: float = 0.2
    ou_sigma_decay: typing.Optional[float] = None
    ou_sigma_min: float = 0.01
    action_reg: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        """Validate the training settings."""
        object.__setattr__(self, 'hidden_sizes', tuple(int(size) for size in self.hidden_sizes))
        if self.episodes < 0:
            raise ValueError('episodes must be non-negative.')
        for name in ('actor_lr', 'critic_lr', 'clip_norm'):
            if getattr(self, name) <= 0:
                raise ValueError('{} must be positive.'.format(name))
        for name in ('batch_size', 'update_interval', 'eval_episodes'):
            if getattr(self, name) < 1:
                raise ValueError('{} must be at least 1.'.format(name))
        for name in ('warmup_steps', 'eval_interval', 'checkpoint_interval', 'seed'):
            if getattr(self, name) < 0:
                raise ValueError('{} must be non-negative.'.format(name))
        if self.gamma is not None and not 0 <= self.gamma < 1:
            raise ValueError('gamma must be in [0, 1).')
        if not 0 < self.tau <= 1:
            raise ValueError('tau must be in (0, 1].')
        if not 0 <= self.beta_start <= 1 or not 0 <= self.beta_end <= 1:
            raise ValueError('beta_start and beta_end must be in [0, 1].')
        if not 0 < self.lr_decay_factor <= 1:
            raise ValueError('lr_decay_factor must be in (0, 1].')
        if self.ou_sigma_decay is not None and not 0 < self.ou_sigma_decay <= 1:
            raise ValueError('ou_sigma_decay must be in (0, 1].')
        if self.action_reg < 0:
            raise ValueError('action_reg must be non-negative.')

    @property
    def exploration_off(self):
        """Return the first episode without exploration noise."""
        if self.exploration_off_episode is not None:
            return self.exploration_off_episode
        return int(0.8 * self.episodes)

    @property
    def lr_decay(self):
        """Return the episode at which learning rates decay."""
        if self.lr_decay_episode is not None:
            return self.lr_decay_episode
        return int(0.2 * self.episodes)

    def sigma_decay(self, episode_length):
        """Return the per-step OU volatility decay for episodes of episode_length steps."""
        if self.ou_sigma_decay is not None:
            return self.ou_sigma_decay
        exploring_steps = self.exploration_off * episode_length
        if exploring_steps < 1 or not 0 < self.ou_sigma_min < self.ou_sigma:
            return 1.0
        return (self.ou_sigma_min / self.ou_sigma) ** (1 / exploring_steps)

    def beta(self, step, total_steps):
        """Return the importance-sampling exponent after step of total_steps environment steps."""
        progress = min(1.0, step / total_steps) if total_steps > 0 else 1.0
        return self.beta_start + (self.beta_end - self.beta_start) * progress


@dataclasses.dataclass
class AgentNets:
    """The networks and optimizers of one agent."""

    actor: nn.MlpParams
    critic: nn.MlpParams
    target_actor: nn.MlpParams
    target_critic: nn.MlpParams
    actor_optimizer: nn.AdamState
    critic_optimizer: nn.AdamState

    def to_dict(self):
        """Serialize the networks and optimizer states."""
        return {'actor': nn.params_to_dict(self.actor),
                'critic': nn.params_to_dict(self.critic),
                'target_actor': nn.params_to_dict(self.target_actor),
                'target_critic': nn.params_to_dict(self.target_critic),
                'actor_optimizer': self.actor_optimizer.to_dict(),
                'critic_optimizer': self.critic_optimizer.to_dict()}

    @classmethod
    def from_dict(cls, document):
        """Create networks from the output of to_dict."""
        return cls(actor=nn.params_from_dict(document['actor']),
                   critic=nn.params_from_dict(document['critic']),
                   target_actor=nn.params_from_dict(document['target_actor']),
                   target_critic=nn.params_from_dict(document['target_critic']),
                   actor_optimizer=nn.AdamState.from_dict(document['actor_optimizer']),
                   critic_optimizer=nn.AdamState.from_dict(document['critic_optimizer']))


@dataclasses.dataclass
class TrainingResult:
    """The outcome of a training run.

    Attributes
    ----------
    curve : pd.DataFrame
        One row per episode with columns episode, mean_step_reward, sigma and lr.
    evaluations : pd.DataFrame
        One row per periodic greedy evaluation with columns episode, mean_step_reward, coverage.
    steps : int
        The number of environment steps taken.

    """

    curve: pd.DataFrame
    evaluations: pd.DataFrame
    steps: int


class Maddpg(agent.Agent):
    """Multi-agent DDPG with centralized critics and decentralized actors.

    Every agent owns an actor mapping its local observation to a raw action in [-1, 1]^3 and a
    critic scoring the global state together with the joint action. All agents share one
    prioritized replay buffer of joint transitions.

    Parameters
    ----------
    num_agents : int
        The number of UAVs.
    observation_size : int
        The width of each local observation.
    state_size : int
        The width of the global state.
    action_size : int
        The width of each action.
    config : TrainConfig, optional
        The training settings.

    """

    def __init__(self, num_agents, observation_size, state_size, action_size=3, config=None):
        """Create an agent with freshly initialized networks."""
        super().__init__()
        self._hyperparameters = {}
        # We only want the function arguments so remove class related objects.
        self._hyperparameters.update(locals())
        del self._hyperparameters['self']
        del self._hyperparameters['__class__']

        config = config if config is not None else TrainConfig()
        self._hyperparameters['config'] = dataclasses.asdict(config)
        self._config = config
        self._num_agents = num_agents
        self._observation_size = observation_size
        self._state_size = state_size
        self._action_size = action_size
        self._actor_spec = nn.MlpSpec((observation_size,) + config.hidden_sizes + (action_size,),
                                      'tanh')
        self._critic_spec = nn.MlpSpec(
            (state_size + num_agents * action_size,) + config.hidden_sizes + (1,), 'none')
        self.nets = [self._init_nets(i) for i in range(num_agents)]
        self._noise = noise.OUNoise(num_agents, action_size,
                                    theta=config.ou_theta,
                                    sigma=config.ou_sigma,
                                    sigma_decay=config.sigma_decay(1),
                                    sigma_min=config.ou_sigma_min,
                                    random=world_lib.make_random(config.seed, 3))
        self._replay = replay.PrioritizedReplay(config.buffer_capacity,
                                                alpha=config.alpha,
                                                eps=config.priority_eps,
                                                random=world_lib.make_random(config.seed, 4))
        self._gamma = config.gamma if config.gamma is not None else DEFAULT_GAMMA
        self.train_steps = 0
        self.episodes_done = 0

    @property
    def name(self):  # noqa: D102
        return 'maddpg'

    @property
    def hyperparameters(self):  # noqa: D102
        return self._hyperparameters

    @property
    def config(self):
        """Return the training settings."""
        return self._config

    @property
    def gamma(self):
        """Return the discount factor of the critic targets."""
        return self._gamma

    @property
    def num_agents(self):
        """Return the number of agents."""
        return self._num_agents

    @property
    def noise(self):
        """Return the exploration noise process."""
        return self._noise

    @property
    def replay(self):
        """Return the shared replay buffer."""
        return self._replay

    def act(self, observations, env):  # noqa: D102
        return self.select_actions(observations, explore=False)

    def select_actions(self, observations, explore=False):
        """Compute the joint raw action from local observations.

        Parameters
        ----------
        observations : np.ndarray
            Array of shape (N, observation_size). Actor i only reads row i.
        explore : bool
            Whether to add OU noise. Noise is advanced only when exploring.

        Returns
        -------
        actions : np.ndarray
            Array of shape (N, action_size) clipped to [-1, 1].

        """
        observations = np.asarray(observations, dtype=np.float64)
        if observations.shape != (self._num_agents, self._observation_size):
            raise ValueError('Expected observations of shape {}, got {}.'.format(
                (self._num_agents, self._observation_size), observations.shape))
        actions = np.stack([nn.forward(nets.actor, observation)[0]
                            for nets, observation in zip(self.nets, observations)])
        if explore:
            actions = actions + self._noise.sample()
        return np.clip(actions, -1.0, 1.0)

    def critic_update(self, batch, agent_id, weights, next_actions=None):
        """Take one critic step for an agent on an importance-weighted batch.

        Parameters
        ----------
        batch : Transition
            A batch of B joint transitions.
        agent_id : int
            The agent whose critic is trained.
        weights : np.ndarray
            The importance-sampling weights of the batch.
        next_actions : np.ndarray, optional
            The target actors' joint actions for the next observations, computed when omitted.

        Returns
        -------
        td_errors : np.ndarray
            |Q_i(s, a) - y_i| of every transition, where
            y_i = r_i + gamma (1 - done) Q'_i(s', a') and a' comes from the target actors.
        loss : float
            The weighted mean squared TD error before the update.

        """
        nets = self.nets[agent_id]
        batch_size = len(batch.rewards)
        weights = np.asarray(weights, dtype=np.float64).reshape(-1)
        if len(weights) != batch_size:
            raise ValueError('Got {} weights for a batch of {}.'.format(len(weights), batch_size))

        targets = self.td_targets(batch, agent_id, next_actions)
        critic_inputs = np.concatenate([batch.state, batch.actions.reshape(batch_size, -1)],
                                       axis=1)
        values, cache = nn.forward(nets.critic, critic_inputs)
        td = values[:, 0] - targets
        loss = float(np.mean(weights * td ** 2))
        grads, _ = nn.backward(nets.critic, cache, (2 * weights * td / batch_size)[:, np.newaxis])
        nn.adam_step(nets.critic_optimizer, nets.critic, grads)
        return np.abs(td), loss

    def target_actions(self, batch):
        """Return the target actors' joint actions for the next observations of a batch."""
        return np.stack([nn.forward(nets.target_actor, batch.next_observations[:, j])[0]
                         for j, nets in enumerate(self.nets)], axis=1)

    def td_targets(self, batch, agent_id, next_actions=None):
        """Return the bootstrapped critic targets of an agent for a batch."""
        batch_size = len(batch.rewards)
        if next_actions is None:
            next_actions = self.target_actions(batch)
        next_inputs = np.concatenate([batch.next_state, next_actions.reshape(batch_size, -1)],
                                     axis=1)
        next_values = nn.forward(self.nets[agent_id].target_critic, next_inputs)[0][:, 0]
        not_done = 1.0 - np.asarray(batch.done, dtype=np.float64).reshape(-1)
        return batch.rewards[:, agent_id] + self._gamma * not_done * next_values

    def actor_update(self, batch, agent_id):
        """Take one deterministic policy gradient step for an agent and update its targets.

        The actions of the other agents are taken from the batch and the gradient flows from the
        critic's action input into the actor. An L2 penalty of weight action_reg on the actor's
        output pre-activations keeps the tanh layer out of saturation.

        Returns
        -------
        objective : float
            The mean critic value of the batch before the update.

        """
        nets = self.nets[agent_id]
        batch_size = len(batch.rewards)
        own_actions, actor_cache = nn.forward(nets.actor, batch.observations[:, agent_id])
        actions = batch.actions.copy()
        actions[:, agent_id] = own_actions
        critic_inputs = np.concatenate([batch.state, actions.reshape(batch_size, -1)], axis=1)
        values, critic_cache = nn.forward(nets.critic, critic_inputs)
        _, grad_inputs = nn.backward(nets.critic, critic_cache,
                                     -np.ones((batch_size, 1)) / batch_size)
        start = self._state_size + agent_id * self._action_size
        grad_actions = grad_inputs[:, start:start + self._action_size]
        pre_actions = actor_cache['pre_activations'][-1]
        penalty = 2 * self._config.action_reg * pre_actions / batch_size
        grads, _ = nn.backward(nets.actor, actor_cache, grad_actions, grad_pre_outputs=penalty)
        nn.adam_step(nets.actor_optimizer, nets.actor, grads)
        nn.polyak_update(nets.target_actor, nets.actor, self._config.tau)
        nn.polyak_update(nets.target_critic, nets.critic, self._config.tau)
        return float(values.mean())

    def learn(self, beta):
        """Sample a batch, update every agent and refresh the sampled priorities.

        Returns
        -------
        td_errors : np.ndarray
            The mean over agents of |TD error| of every sampled transition.

        """
        batch, indices, weights = self._replay.sample(self._config.batch_size, beta)
        td_errors = np.zeros((self._num_agents, len(indices)))
        next_actions = self.target_actions(batch)
        for i in range(self._num_agents):
            td_errors[i], loss = self.critic_update(batch, i, weights, next_actions)
            objective = self.actor_update(batch, i)
            logger.debug('Agent %d: critic loss %.6g, actor objective %.6g.', i, loss, objective)
        priorities = td_errors.mean(axis=0)
        self._replay.update_priorities(indices, priorities)
        self.train_steps += 1
        return priorities

    def train(self, env, out_dir=None):
        """Train all agents in an environment.

        Parameters
        ----------
        env : UavCoverage
            The environment.
        out_dir : str, optional
            If given, periodic checkpoints are written to out_dir/checkpoint_<episode> and the
            final checkpoint to out_dir/checkpoint.

        Returns
        -------
        result : TrainingResult
            The training curve and the periodic evaluations.

        Raises
        ------
        ValueError
            If the environment does not match the agent dimensions, or if the configured gamma
            differs from the discount of the environment's reward weights.

        """
        config = self._config
        if env.num_agents != self._num_agents or env.observation_size != self._observation_size:
            raise ValueError('The environment does not match the agent dimensions.')
        env_gamma = env.reward_weights.gamma
        if config.gamma is not None and config.gamma != env_gamma:
            raise ValueError('The training gamma {} differs from the environment gamma {}.'.format(
                config.gamma, env_gamma))
        self._gamma = env_gamma
        self._noise.sigma_decay = config.sigma_decay(env.world.episode_length)
        total_steps = config.episodes * env.world.episode_length
        steps = 0
        rows = []
        evaluations = []
        for episode in range(config.episodes):
            if episode == config.lr_decay and episode > 0:
                self._decay_learning_rates(config.lr_decay_factor)
            explore = episode < config.exploration_off
            observations, state = env.reset(TRAIN_SEED_OFFSET * (config.seed + 1) + episode)
            self._noise.reset()
            episode_rewards = []
            done = False
            while not done:
                actions = self.select_actions(observations, explore=explore)
                outcome = env.step(actions)
                self._replay.push(replay.Transition(observations=observations,
                                                    actions=actions,
                                                    rewards=outcome.rewards,
                                                    next_observations=outcome.observations,
                                                    done=outcome.done,
                                                    state=state,
                                                    next_state=outcome.global_state))
                episode_rewards.append(outcome.rewards.mean())
                observations, state, done = (outcome.observations, outcome.global_state,
                                             outcome.done)
                steps += 1
                if (steps >= config.warmup_steps and len(self._replay) >= config.batch_size and
                        steps % config.update_interval == 0):
                    self.learn(config.beta(steps, total_steps))

            self.episodes_done += 1
            row = {'episode': episode,
                   'mean_step_reward': float(np.mean(episode_rewards)),
                   'sigma': self._noise.sigma,
                   'lr': self.nets[0].actor_optimizer.lr}
            rows.append(row)
            logger.info('Episode %d: mean step reward %.6f, sigma %.6f, lr %.3g.',
                        episode, row['mean_step_reward'], row['sigma'], row['lr'])

            if config.eval_interval and (episode + 1) % config.eval_interval == 0:
                evaluations.append(self._evaluate(env, episode))
            if out_dir is not None and config.checkpoint_interval and (
                    (episode + 1) % config.checkpoint_interval == 0):
                self.save(os.path.join(out_dir, 'checkpoint_{:06d}'.format(episode + 1)))

        if out_dir is not None:
            self.save(os.path.join(out_dir, 'checkpoint'))
        return TrainingResult(curve=pd.DataFrame(rows, columns=list(CURVE_COLUMNS)),
                              evaluations=pd.DataFrame(evaluations, columns=list(EVAL_COLUMNS)),
                              steps=steps)

    def save(self, directory):
        """Write one file per agent and a manifest to a directory.

        Replay contents are not saved. Reloading restores networks, optimizer states, the noise
        process and every random stream exactly.
        """
        data_utils.ensure_dir(directory)
        for i, nets in enumerate(self.nets):
            data_utils.write_json(os.path.join(directory, 'agent_{}.json'.format(i)),
                                  nets.to_dict())
        data_utils.write_json(os.path.join(directory, MANIFEST_FILE), {
            'format': CHECKPOINT_FORMAT,
            'num_agents': self._num_agents,
            'observation_size': self._observation_size,
            'state_size': self._state_size,
            'action_size': self._action_size,
            'gamma': self._gamma,
            'config': data_utils.to_builtin(dataclasses.asdict(self._config)),
            'noise': self._noise.to_dict(),
            'noise_random': data_utils.random_state_to_dict(self._noise.random),
            'replay_random': data_utils.random_state_to_dict(self._replay.random),
            'train_steps': self.train_steps,
            'episodes_done': self.episodes_done,
        })
        logger.info('Saved checkpoint to %s.', directory)

    @classmethod
    def load(cls, directory):
        """Create an agent from a directory written by save."""
        manifest_path = os.path.join(directory, MANIFEST_FILE)
        if not os.path.isfile(manifest_path):
            raise FileNotFoundError('No checkpoint manifest at {}.'.format(manifest_path))
        manifest = data_utils.read_json(manifest_path)
        if manifest['format'] != CHECKPOINT_FORMAT:
            raise ValueError('Unsupported checkpoint format {}.'.format(manifest['format']))
        model = cls(manifest['num_agents'], manifest['observation_size'], manifest['state_size'],
                    manifest['action_size'], TrainConfig(**manifest['config']))
        for i in range(model.num_agents):
            agent_path = os.path.join(directory, 'agent_{}.json'.format(i))
            if not os.path.isfile(agent_path):
                raise FileNotFoundError('Missing agent file {}.'.format(agent_path))
            model.nets[i] = AgentNets.from_dict(data_utils.read_json(agent_path))
        model._gamma = manifest['gamma']
        model.noise.load_dict(manifest['noise'])
        model.noise.random.set_state(
            data_utils.random_state_from_dict(manifest['noise_random']).get_state())
        model.replay.random.set_state(
            data_utils.random_state_from_dict(manifest['replay_random']).get_state())
        model.train_steps = manifest['train_steps']
        model.episodes_done = manifest['episodes_done']
        return model

    def _init_nets(self, agent_id):
        config = self._config
        random = world_lib.make_random(config.seed, 2, agent_id)
        actor = nn.init_params(self._actor_spec, random)
        critic = nn.init_params(self._critic_spec, random)
        return AgentNets(actor=actor,
                         critic=critic,
                         target_actor=actor.copy(),
                         target_critic=critic.copy(),
                         actor_optimizer=nn.AdamState.for_params(actor, lr=config.actor_lr,
                                                                 clip_norm=config.clip_norm),
                         critic_optimizer=nn.AdamState.for_params(critic, lr=config.critic_lr,
                                                                  clip_norm=config.clip_norm))

    def _decay_learning_rates(self, factor):
        for nets in self.nets:
            nets.actor_optimizer.lr *= factor
            nets.critic_optimizer.lr *= factor
        logger.info('Decayed learning rates to %.3g (actor) and %.3g (critic).',
                    self.nets[0].actor_optimizer.lr, self.nets[0].critic_optimizer.lr)

    def _evaluate(self, env, episode):
        rewards = []
        coverages = []
        for k in range(self._config.eval_episodes):
            observations, _ = env.reset(k)
            done = False
            while not done:
                outcome = env.step(self.select_actions(observations, explore=False))
                rewards.append(outcome.rewards.mean())
                coverages.append(outcome.info['coverage'])
                observations, done = outcome.observations, outcome.done
        row = {'episode': episode,
               'mean_step_reward': float(np.mean(rewards)),
               'coverage': float(np.mean(coverages))}
        logger.info('Greedy evaluation after episode %d: mean step reward %.6f, coverage %.4f.',
                    episode, row['mean_step_reward'], row['coverage'])
        return row
