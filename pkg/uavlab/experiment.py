"""Evaluation harness: experiment configuration, evaluation runs, reports and comparison tables."""
import dataclasses
import hashlib
import json
import logging
import os
import typing

import numpy as np
import pandas as pd
import scipy.stats

from . import __version__
from . import data_utils
from .agents import agent as agent_lib
from .agents import baseline
from .agents.maddpg import Maddpg, TrainConfig
from .environments import channel as channel_lib
from .environments import coverage
from .environments import energy as energy_lib
from .environments import world as world_lib

logger = logging.getLogger(__name__)

REPORT_FILE = 'report.json'
ENV_KEYS = ('observation_radius', 'spawn_points', 'fleet_power_max')
REFERENCE_METHOD = 'maddpg'
ALL_CELLS_ON = 'all_cells_on'


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    """Every setting of an experiment, as read from a YAML config file.

    Each attribute mirrors one top-level section of the file: scenario (with a nested traffic
    section), channel, energy, reward, env and train.
    """

    scenario: world_lib.ScenarioConfig = dataclasses.field(
        default_factory=world_lib.ScenarioConfig)
    channel: channel_lib.ChannelParams = dataclasses.field(
        default_factory=channel_lib.ChannelParams)
    energy: energy_lib.EnergyParams = dataclasses.field(default_factory=energy_lib.EnergyParams)
    reward: coverage.RewardWeights = dataclasses.field(default_factory=coverage.RewardWeights)
    env: dict = dataclasses.field(default_factory=dict)
    train: TrainConfig = dataclasses.field(default_factory=TrainConfig)

    @classmethod
    def from_dict(cls, document):
        """Create a config from a nested dict, rejecting unknown sections and keys."""
        sections = {'scenario': world_lib.ScenarioConfig,
                    'channel': channel_lib.ChannelParams,
                    'energy': energy_lib.EnergyParams,
                    'reward': coverage.RewardWeights,
                    'train': TrainConfig}
        unknown = set(document) - set(sections) - {'env'}
        if unknown:
            raise ValueError('Unknown config sections: {}'.format(sorted(unknown)))

        kwargs = {}
        for section, section_class in sections.items():
            values = dict(document.get(section) or {})
            _check_keys(section, values, {field.name for field in
                                          dataclasses.fields(section_class)})
            if section == 'scenario' and isinstance(values.get('traffic'), dict):
                _check_keys('scenario.traffic', values['traffic'],
                            {field.name for field in dataclasses.fields(world_lib.TrafficConfig)})
            kwargs[section] = section_class(**values)
        env = dict(document.get('env') or {})
        _check_keys('env', env, set(ENV_KEYS))
        return cls(env=env, **kwargs)

    def to_dict(self):
        """Return the config as a nested dict of plain values."""
        return data_utils.to_builtin({'scenario': dataclasses.asdict(self.scenario),
                                      'channel': dataclasses.asdict(self.channel),
                                      'energy': dataclasses.asdict(self.energy),
                                      'reward': dataclasses.asdict(self.reward),
                                      'env': dict(self.env),
                                      'train': dataclasses.asdict(self.train)})

    def config_hash(self):
        """Return a SHA-256 digest of the config."""
        encoded = json.dumps(self.to_dict(), sort_keys=True, default=str).encode('utf-8')
        return hashlib.sha256(encoded).hexdigest()

    def build_env(self):
        """Build the world and the coverage environment described by the config."""
        scenario = world_lib.build_world(self.scenario)
        return coverage.UavCoverage(scenario,
                                    channel_params=self.channel,
                                    energy_params=self.energy,
                                    reward_weights=self.reward,
                                    **self.env)


def _check_keys(section, values, allowed):
    unknown = set(values) - set(allowed)
    if unknown:
        raise ValueError('Unknown keys in config section {}: {}'.format(section, sorted(unknown)))


def load_config(path=None):
    """Read an experiment config from a YAML file, or return the defaults if path is None."""
    if path is None:
        return ExperimentConfig()
    return ExperimentConfig.from_dict(data_utils.read_yaml(path))


@dataclasses.dataclass(frozen=True)
class EvalReport:
    """The aggregated outcome of evaluating one method.

    Attributes
    ----------
    method : str
        The method name.
    world_hash : str
        The hash of the evaluated world.
    seed : int
        The first evaluation episode seed. Episode k uses seed + k.
    coverage : list of float
        Per episode, served UAV-needed user-steps over UAV-needed user-steps.
    served_percent : list of float
        Per episode, the mean percentage of users served by a UAV or their home cell.
    episode_rewards : list of float
        Per episode, the mean reward over steps and agents. Empty without UAVs.
    step_rewards : list of float
        Per step, the mean reward over episodes and agents. Empty without UAVs.
    objectives : list of float
        Per episode, the throughput-minus-energy objective. Empty without UAVs.
    e_uav : float or None
        Mean episode energy of all UAVs in Wh. None when no UAVs are deployed.
    e_cell : float
        Mean episode energy of all cells in Wh.
    e_site : float
        Mean episode site overhead energy in Wh.
    audit : dict
        Constraint violation counts over every evaluated step.

    """

    method: str
    world_hash: str
    seed: int
    coverage: typing.List[float]
    served_percent: typing.List[float]
    episode_rewards: typing.List[float]
    step_rewards: typing.List[float]
    objectives: typing.List[float]
    e_uav: typing.Optional[float]
    e_cell: float
    e_site: float
    audit: dict

    def __post_init__(self):
        """Validate the ranges of the report."""
        if any(not 0 <= value <= 1 for value in self.coverage):
            raise ValueError('Coverage ratios must be in [0, 1].')
        if any(not 0 <= value <= 100 for value in self.served_percent):
            raise ValueError('Served percentages must be in [0, 100].')

    @property
    def episodes(self):
        """Return the number of evaluated episodes."""
        return len(self.coverage)

    @property
    def mean_coverage(self):
        """Return the mean coverage ratio over episodes."""
        return float(np.mean(self.coverage))

    @property
    def mean_served_percent(self):
        """Return the mean served-user percentage over episodes."""
        return float(np.mean(self.served_percent))

    @property
    def e_network(self):
        """Return the mean episode energy of cells and sites in Wh."""
        return self.e_cell + self.e_site

    @property
    def e_total(self):
        """Return the mean episode energy of UAVs, cells and sites in Wh."""
        return (self.e_uav or 0.0) + self.e_network

    def to_dict(self):
        """Return the report as a dict of plain values."""
        return data_utils.to_builtin(dataclasses.asdict(self))

    @classmethod
    def from_dict(cls, document):
        """Create a report from the output of to_dict."""
        return cls(**document)

    def save(self, path):
        """Write the report as JSON. A directory path gets a report.json inside it."""
        if os.path.isdir(path):
            path = os.path.join(path, REPORT_FILE)
        data_utils.write_json(path, self.to_dict())
        return path

    @classmethod
    def load(cls, path):
        """Read a report written by save."""
        if os.path.isdir(path):
            path = os.path.join(path, REPORT_FILE)
        if not os.path.isfile(path):
            raise FileNotFoundError('No evaluation report at {}.'.format(path))
        return cls.from_dict(data_utils.read_json(path))


def make_agent(policy, env):
    """Create the agent a policy describes.

    Parameters
    ----------
    policy : PolicyKind
        The policy. All-cells-ON has no agent.
    env : UavCoverage
        The environment the agent will control.

    Returns
    -------
    agent : Agent
        The agent.

    """
    if policy.tag == 'maddpg_checkpoint':
        model = Maddpg.load(policy.checkpoint)
        if model.num_agents != env.num_agents:
            raise ValueError('The checkpoint controls {} UAVs but the environment has {}.'.format(
                model.num_agents, env.num_agents))
        return model
    if policy.tag == 'random':
        return baseline.RandomAgent(env.num_agents, env.action_size, seed=policy.seed)
    if policy.tag == 'knn_fixed':
        return baseline.KnnFixedAgent(k=policy.k, fixed_power=policy.fixed_power)
    raise ValueError('Policy {} does not use an agent.'.format(policy.tag))


def run_eval(env, agent, episodes=15, seed=0, method=None, trace_path=None):
    """Evaluate an agent over fixed-seed episodes without exploration.

    Parameters
    ----------
    env : UavCoverage
        The environment.
    agent : Agent
        The agent.
    episodes : int
        The number of episodes. Episode k uses episode seed seed + k.
    seed : int
        The first episode seed.
    method : str, optional
        The reported method name. Defaults to the agent's name.
    trace_path : str, optional
        If given, the trace of the first episode is written there as JSON lines.

    Returns
    -------
    report : EvalReport
        The aggregated report.

    """
    if episodes < 1:
        raise ValueError('episodes must be at least 1.')
    config = env.world.config
    coverages = []
    served_percent = []
    episode_rewards = []
    step_rewards = np.zeros((episodes, env.world.episode_length))
    objectives = []
    ledgers = []
    audit = {}
    for k in range(episodes):
        episode_seed = seed + k
        agent.reset(episode_seed)
        observations, _ = env.reset(episode_seed)
        num_needed = num_uav_served = 0
        served = []
        done = False
        while not done:
            outcome = env.step(agent.act(observations, env))
            step_rewards[k, outcome.info['t']] = outcome.rewards.mean()
            num_needed += outcome.info['num_uav_needed']
            num_uav_served += outcome.info['num_uav_served']
            served.append(outcome.info['num_served'])
            observations, done = outcome.observations, outcome.done

        coverages.append(num_uav_served / num_needed if num_needed else 1.0)
        served_percent.append(100.0 * float(np.mean(served)) / env.world.num_users)
        episode_rewards.append(float(step_rewards[k].mean()))
        objectives.append(env.objective())
        ledgers.append(env.ledger())
        for key, value in coverage.audit_trace(env.trace, config.v_max, config.p_max,
                                               env.fleet_power_max).items():
            audit[key] = audit.get(key, 0) + value
        if k == 0 and trace_path is not None:
            coverage.write_trace(trace_path, env.trace)
        logger.info('Evaluation episode %d (seed %d): coverage %.4f, served %.2f%%.',
                    k, episode_seed, coverages[-1], served_percent[-1])

    return EvalReport(method=method if method is not None else agent.name,
                      world_hash=env.world.world_hash(),
                      seed=seed,
                      coverage=coverages,
                      served_percent=served_percent,
                      episode_rewards=episode_rewards,
                      step_rewards=step_rewards.mean(axis=0).tolist(),
                      objectives=objectives,
                      e_uav=float(np.mean([ledger.e_uav for ledger in ledgers])),
                      e_cell=float(np.mean([ledger.e_cell for ledger in ledgers])),
                      e_site=float(np.mean([ledger.e_site for ledger in ledgers])),
                      audit=audit)


def all_cells_on_report(world, episodes=15, seed=0, energy_params=None):
    """Report the all-cells-ON reference in the same shape as run_eval.

    The reference is deterministic, so every episode has the same energy and served share. No
    user ever needs a UAV, so every coverage entry is 1.
    """
    if episodes < 1:
        raise ValueError('episodes must be at least 1.')
    result = baseline.all_cells_on_eval(world, energy_params)
    return EvalReport(method=ALL_CELLS_ON,
                      world_hash=world.world_hash(),
                      seed=seed,
                      coverage=[1.0] * episodes,
                      served_percent=[result.served_percent] * episodes,
                      episode_rewards=[],
                      step_rewards=[],
                      objectives=[],
                      e_uav=None,
                      e_cell=result.ledger.e_cell,
                      e_site=result.ledger.e_site,
                      audit={})


def evaluate_policy(env, policy, episodes=15, seed=0, trace_path=None):
    """Evaluate the policy a PolicyKind describes on an environment."""
    if policy.tag == 'all_cells_on':
        return all_cells_on_report(env.world, episodes, seed, env.energy_params)
    return run_eval(env, make_agent(policy, env), episodes, seed, method=policy.method_name,
                    trace_path=trace_path)


def savings_percent(reference, value):
    """Return how much less energy value uses than reference, in percent of reference."""
    if reference <= 0:
        raise ValueError('The reference energy must be positive.')
    return (reference - value) / reference * 100


def energy_table(reports, reference=REFERENCE_METHOD):
    """Build the energy comparison table of several methods evaluated on one world.

    Parameters
    ----------
    reports : list of EvalReport
        The reports, one per method.
    reference : str
        The learned method savings are computed against.

    Returns
    -------
    table : pd.DataFrame
        One row per method with columns method, e_uav_wh (NaN without UAVs), e_cell_wh (cells
        and sites), e_total_wh, served_percent, coverage, saving_vs_<reference>_percent (how much
        the reference saves relative to the row) and saving_vs_all_cells_on_percent (how much
        the row saves relative to the all-cells-ON reference).

    """
    reports = list(reports)
    if not reports:
        raise ValueError('Need at least one report.')
    hashes = {report.world_hash for report in reports}
    if len(hashes) > 1:
        raise ValueError('Reports were evaluated on different worlds: {}'.format(sorted(hashes)))
    by_method = {report.method: report for report in reports}
    reference_report = by_method.get(reference)
    all_on_report = by_method.get(ALL_CELLS_ON)

    rows = []
    for report in reports:
        rows.append({
            'method': report.method,
            'e_uav_wh': report.e_uav if report.e_uav is not None else np.nan,
            'e_cell_wh': report.e_network,
            'e_total_wh': report.e_total,
            'served_percent': report.mean_served_percent,
            'coverage': report.mean_coverage,
            'saving_vs_{}_percent'.format(reference): (
                savings_percent(report.e_total, reference_report.e_total)
                if reference_report is not None else np.nan),
            'saving_vs_all_cells_on_percent': (
                savings_percent(all_on_report.e_total, report.e_total)
                if all_on_report is not None else np.nan),
        })
    return pd.DataFrame(rows)


def format_energy_table(table):
    """Render an energy table as aligned text, with -- for absent values."""
    return table.to_string(index=False, na_rep='--', float_format='{:.2f}'.format)


def paired_test(report_a, report_b):
    """Test whether method a covers more than method b over paired evaluation episodes.

    Returns
    -------
    statistic : float
        The paired t statistic of coverage(a) - coverage(b).
    p_value : float
        The one-sided p-value of the alternative mean(a) > mean(b).

    """
    coverage_a = np.asarray(report_a.coverage, dtype=float)
    coverage_b = np.asarray(report_b.coverage, dtype=float)
    if len(coverage_a) != len(coverage_b) or len(coverage_a) < 2:
        raise ValueError('A paired test needs two reports of equally many (at least 2) episodes.')
    differences = coverage_a - coverage_b
    if np.all(differences == differences[0]):
        if differences[0] > 0:
            return np.inf, 0.0
        if differences[0] < 0:
            return -np.inf, 1.0
        return 0.0, 1.0
    statistic, two_sided = scipy.stats.ttest_rel(coverage_a, coverage_b)
    p_value = two_sided / 2 if statistic > 0 else 1 - two_sided / 2
    return float(statistic), float(p_value)


def emit_curves(out_dir, reports, curve=None, manifest=None, reference=REFERENCE_METHOD):
    """Write plot-ready CSV files and a manifest.

    Parameters
    ----------
    out_dir : str
        The output directory.
    reports : list of EvalReport
        The evaluated methods.
    curve : pd.DataFrame, optional
        A training curve, written to reward_curve.csv. Must not be empty.
    manifest : dict, optional
        Extra manifest entries such as the config hash and seed.
    reference : str
        The method the savings columns of energy_table.csv are computed against.

    Returns
    -------
    paths : list of str
        The written files.

    """
    reports = list(reports)
    if not reports:
        raise ValueError('Need at least one report to emit.')
    if curve is not None and curve.empty:
        raise ValueError('The training curve is empty.')
    data_utils.ensure_dir(out_dir)
    paths = []

    if curve is not None:
        paths.append(os.path.join(out_dir, 'reward_curve.csv'))
        data_utils.write_csv(paths[-1], curve)

    step_columns = {report.method: report.step_rewards for report in reports
                    if report.step_rewards}
    if step_columns:
        num_steps = max(len(values) for values in step_columns.values())
        step_frame = pd.DataFrame({'step': np.arange(num_steps)})
        for method, values in step_columns.items():
            step_frame[method] = pd.Series(values, dtype=float)
        paths.append(os.path.join(out_dir, 'eval_reward_per_step.csv'))
        data_utils.write_csv(paths[-1], step_frame)

    num_episodes = max(report.episodes for report in reports)
    coverage_frame = pd.DataFrame({'episode': np.arange(num_episodes)})
    for report in reports:
        coverage_frame[report.method] = pd.Series(report.coverage, dtype=float)
    paths.append(os.path.join(out_dir, 'coverage_per_episode.csv'))
    data_utils.write_csv(paths[-1], coverage_frame)

    paths.append(os.path.join(out_dir, 'energy_table.csv'))
    data_utils.write_csv(paths[-1], energy_table(reports, reference=reference))

    document = {'code_version': __version__,
                'world_hash': reports[0].world_hash,
                'methods': [report.method for report in reports],
                'reference': reference,
                'seeds': {report.method: report.seed for report in reports}}
    document.update(manifest or {})
    paths.append(os.path.join(out_dir, 'manifest.json'))
    data_utils.write_json(paths[-1], data_utils.to_builtin(document))
    logger.info('Wrote %d files to %s.', len(paths), out_dir)
    return paths


def policy_from_cli(name, checkpoint=None, fixed_power=None, k=6, seed=0):
    """Create a PolicyKind from command line arguments."""
    return agent_lib.PolicyKind.from_cli_name(name, checkpoint=checkpoint,
                                              fixed_power=fixed_power, k=k, seed=seed)
