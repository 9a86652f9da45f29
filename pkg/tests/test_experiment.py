"""Tests for the evaluation harness and the command line interface."""
import os

import numpy as np
import pandas as pd
import pytest
import yaml

from uavlab import cli
from uavlab import data_utils
from uavlab import experiment
from uavlab.agents import KnnFixedAgent, PolicyKind, RandomAgent
from uavlab.environments.channel import ChannelParams
from uavlab.environments.energy import EnergyParams
from . import utils

TINY_CONFIG = {
    'scenario': {'area_half_width': 800.0, 'num_sites': 1, 'num_uavs': 2, 'num_users': 8,
                 'episode_length': 5, 'seed': 1, 'traffic': {'surge_on_prob': 0.1}},
    'energy': {'p_site': 80.0},
    'reward': {'omega1': 0.7, 'omega2': 0.3},
    'env': {'fleet_power_max': 3.0},
    'train': {'episodes': 2, 'batch_size': 4, 'warmup_steps': 4, 'hidden_sizes': [8],
              'buffer_capacity': 64},
}


def make_report(method, e_uav, e_cell, e_site=0.0, coverage=(0.5, 0.6), world_hash='abc'):
    """Create a report with hand-picked energies."""
    return experiment.EvalReport(method=method, world_hash=world_hash, seed=0,
                                 coverage=list(coverage), served_percent=[90.0] * len(coverage),
                                 episode_rewards=[], step_rewards=[], objectives=[],
                                 e_uav=e_uav, e_cell=e_cell, e_site=e_site, audit={})


def one_row_curve():
    """Return a one-row training curve."""
    return pd.DataFrame({'episode': [0], 'mean_step_reward': [0.5], 'sigma': [0.2],
                         'lr': [1e-4]})


def write_config(tmp_path, document=None):
    """Write an experiment config file and return its path."""
    path = str(tmp_path / 'config.yaml')
    with open(path, 'w') as config_file:
        yaml.safe_dump(document if document is not None else TINY_CONFIG, config_file)
    return path


def test_load_config(tmp_path):
    """Test that every config section reaches the environment."""
    config = experiment.load_config(write_config(tmp_path))
    assert config.scenario.traffic.surge_on_prob == 0.1
    assert config.train.hidden_sizes == (8,)
    env = config.build_env()
    assert env.num_agents == 2
    assert env.fleet_power_max == 3.0
    assert env.energy_params.p_site == 80.0
    assert env.reward_weights.omega1 == 0.7
    assert experiment.load_config(None) == experiment.ExperimentConfig()
    assert config.config_hash() == experiment.load_config(write_config(tmp_path)).config_hash()
    assert config.config_hash() != experiment.ExperimentConfig().config_hash()


def test_default_sections():
    """Test that each config section holds the parameters of its module."""
    config = experiment.ExperimentConfig()
    assert isinstance(config.channel, ChannelParams)
    assert isinstance(config.energy, EnergyParams)
    assert set(config.to_dict()) == {'scenario', 'channel', 'energy', 'reward', 'env', 'train'}


@pytest.mark.parametrize('document', [
    {'scenery': {}},
    {'scenario': {'num_drones': 2}},
    {'scenario': {'traffic': {'burst': 1.0}}},
    {'env': {'speed': 1.0}},
    {'train': {'episodes': -1}},
])
def test_invalid_config(tmp_path, document):
    """Test that unknown sections, unknown keys and bad values are rejected."""
    with pytest.raises(ValueError):
        experiment.load_config(write_config(tmp_path, document))


def test_run_eval(tmp_path):
    """Test the aggregated report of a baseline evaluation."""
    env = utils.tiny_env(seed=2)
    trace_path = str(tmp_path / 'trace.jsonl')
    report = experiment.run_eval(env, KnnFixedAgent(), episodes=2, seed=10,
                                 trace_path=trace_path)
    assert report.method == 'knn_fixed'
    assert report.episodes == 2
    assert len(report.step_rewards) == 6
    assert len(report.objectives) == 2
    assert report.audit == {'steps': 12, 'speed_violations': 0, 'power_violations': 0,
                            'fleet_power_violations': 0}
    assert report.e_uav > 0
    assert report.world_hash == env.world.world_hash()
    assert all(0 <= value <= 1 for value in report.coverage)
    assert len(data_utils.read_jsonl(trace_path)) == 6

    again = experiment.run_eval(env, KnnFixedAgent(), episodes=2, seed=10)
    assert again.to_dict() == report.to_dict()


def test_random_eval_stays_feasible():
    """Test that random raw actions are made feasible by the environment."""
    env = utils.tiny_env(seed=3)
    report = experiment.run_eval(env, RandomAgent(env.num_agents, seed=1), episodes=3)
    assert report.audit['speed_violations'] == 0
    assert report.audit['fleet_power_violations'] == 0


def test_all_cells_on_report():
    """Test that the all-cells-ON reference has no UAV energy and full coverage."""
    env = utils.tiny_env()
    report = experiment.evaluate_policy(env, PolicyKind('all_cells_on'), episodes=3)
    assert report.e_uav is None
    assert report.coverage == [1.0, 1.0, 1.0]
    assert report.e_total == pytest.approx(report.e_cell + report.e_site)
    assert report.e_cell > 0


def test_report_save_load(tmp_path):
    """Test that a saved report is read back unchanged."""
    report = make_report('random', 1.5, 20.0, 3.0)
    path = report.save(str(tmp_path))
    assert path.endswith('report.json')
    assert experiment.EvalReport.load(str(tmp_path)) == report
    with pytest.raises(FileNotFoundError):
        experiment.EvalReport.load(str(tmp_path / 'missing'))
    with pytest.raises(ValueError):
        make_report('random', 1.0, 1.0, coverage=(1.5,))


def test_energy_table_savings():
    """Test the savings columns against a known pair of totals."""
    reports = [make_report('maddpg', 1.97, 90.0),
               make_report('all_cells_on', None, 121.06),
               make_report('knn_fixed', 3.0, 95.0)]
    table = experiment.energy_table(reports).set_index('method')
    assert table.loc['maddpg', 'e_total_wh'] == pytest.approx(91.97)
    assert table.loc['maddpg', 'saving_vs_all_cells_on_percent'] == pytest.approx(24.03, abs=0.01)
    assert table.loc['all_cells_on', 'saving_vs_maddpg_percent'] == pytest.approx(24.03, abs=0.01)
    assert table.loc['maddpg', 'saving_vs_maddpg_percent'] == 0.0
    assert np.isnan(table.loc['all_cells_on', 'e_uav_wh'])
    assert '--' in experiment.format_energy_table(table.reset_index())


def test_energy_table_needs_one_world():
    """Test that reports of different worlds cannot be compared."""
    with pytest.raises(ValueError):
        experiment.energy_table([make_report('maddpg', 1.0, 1.0, world_hash='a'),
                                 make_report('random', 1.0, 1.0, world_hash='b')])


def test_savings_percent():
    """Test the savings formula and its reference check."""
    assert experiment.savings_percent(121.06, 91.97) == pytest.approx(24.03, abs=0.01)
    with pytest.raises(ValueError):
        experiment.savings_percent(0.0, 1.0)


def test_paired_test():
    """Test the one-sided paired comparison of coverage."""
    better = make_report('maddpg', 1.0, 1.0, coverage=(0.9, 0.8, 0.95, 0.85))
    worse = make_report('random', 1.0, 1.0, coverage=(0.5, 0.6, 0.4, 0.55))
    statistic, p_value = experiment.paired_test(better, worse)
    assert statistic > 0
    assert p_value < 0.05
    _, reverse = experiment.paired_test(worse, better)
    assert reverse > 0.95
    high = make_report('maddpg', 1.0, 1.0, coverage=(0.75, 0.5, 1.0, 0.25))
    low = make_report('knn_fixed', 1.0, 1.0, coverage=(0.5, 0.25, 0.75, 0.0))
    assert experiment.paired_test(high, low) == (np.inf, 0.0)
    assert experiment.paired_test(high, high) == (0.0, 1.0)
    with pytest.raises(ValueError):
        experiment.paired_test(better, make_report('x', 1.0, 1.0, coverage=(0.5,)))


def test_emit_curves(tmp_path):
    """Test the plot-ready files."""
    env = utils.tiny_env()
    learned = experiment.run_eval(env, KnnFixedAgent(), episodes=2, method='knn_fixed')
    reference = experiment.all_cells_on_report(env.world, episodes=2)
    paths = experiment.emit_curves(str(tmp_path), [learned, reference], curve=one_row_curve(),
                                   manifest={'seed': 0})
    names = sorted(os.path.basename(path) for path in paths)
    assert names == ['coverage_per_episode.csv', 'energy_table.csv',
                     'eval_reward_per_step.csv', 'manifest.json', 'reward_curve.csv']
    steps = data_utils.read_csv(str(tmp_path / 'eval_reward_per_step.csv'))
    assert list(steps.columns) == ['step', 'knn_fixed']
    assert len(steps) == 6
    manifest = data_utils.read_json(str(tmp_path / 'manifest.json'))
    assert manifest['methods'] == ['knn_fixed', 'all_cells_on']
    assert manifest['seed'] == 0
    assert manifest['reference'] == 'maddpg'


def test_emit_curves_is_repeatable(tmp_path):
    """Test that emitting the same reports twice writes byte-identical files."""
    env = utils.tiny_env()
    reports = [experiment.run_eval(env, KnnFixedAgent(), episodes=2),
               experiment.all_cells_on_report(env.world, episodes=2)]
    contents = []
    for name in ['first', 'second']:
        paths = experiment.emit_curves(str(tmp_path / name), reports, curve=one_row_curve(),
                                       manifest={'seed': 0}, reference='knn_fixed')
        documents = {}
        for path in paths:
            with open(path, 'rb') as emitted:
                documents[os.path.basename(path)] = emitted.read()
        contents.append(documents)
    assert contents[0] == contents[1]


def test_emit_curves_errors(tmp_path):
    """Test that an empty curve or an empty report list is rejected."""
    report = make_report('maddpg', 1.0, 10.0)
    with pytest.raises(ValueError):
        experiment.emit_curves(str(tmp_path), [report], curve=one_row_curve().iloc[:0])
    with pytest.raises(ValueError):
        experiment.emit_curves(str(tmp_path), [])


def test_report_rejects_mixed_configs(tmp_path):
    """Test that reports evaluated under different configs are not merged."""
    inputs = []
    for method, config_hash in [('maddpg', 'aaa'), ('knn_fixed', 'bbb')]:
        directory = tmp_path / method
        directory.mkdir()
        make_report(method, 1.0, 10.0).save(str(directory))
        data_utils.write_json(str(directory / 'manifest.json'), {'config_hash': config_hash})
        inputs.append(str(directory))
    out = str(tmp_path / 'report')
    assert cli.main(['report', '--inputs'] + inputs + ['--out', out]) == 1
    assert cli.main(['report', '--inputs', inputs[0], '--out', out]) == 0
    assert data_utils.read_json(os.path.join(out, 'manifest.json'))['config_hash'] == 'aaa'


def test_cli_end_to_end(tmp_path):
    """Test train, eval and report through the command line entry point."""
    config_path = write_config(tmp_path)
    train_dir = str(tmp_path / 'train')
    assert cli.main(['train', '--config', config_path, '--seed', '3', '--out', train_dir]) == 0
    curve = data_utils.read_csv(os.path.join(train_dir, 'reward_curve.csv'))
    assert len(curve) == 2
    manifest = data_utils.read_json(os.path.join(train_dir, 'manifest.json'))
    assert manifest['seed'] == 3
    assert manifest['steps'] == 10
    assert os.path.isfile(os.path.join(train_dir, 'uavlab.log'))

    eval_dirs = []
    for policy in ['maddpg', 'knn', 'allon']:
        out = str(tmp_path / 'eval_{}'.format(policy))
        argv = ['eval', '--config', config_path, '--policy', policy, '--episodes', '2',
                '--out', out]
        if policy == 'maddpg':
            argv += ['--checkpoint', os.path.join(train_dir, 'checkpoint')]
        assert cli.main(argv) == 0
        assert os.path.isfile(os.path.join(out, 'report.json'))
        eval_dirs.append(out)
    assert os.path.isfile(os.path.join(eval_dirs[0], 'trace.jsonl'))

    report_dir = str(tmp_path / 'report')
    argv = ['report', '--inputs'] + eval_dirs + [
        '--curve', os.path.join(train_dir, 'reward_curve.csv'), '--out', report_dir]
    assert cli.main(argv) == 0
    table = data_utils.read_csv(os.path.join(report_dir, 'energy_table.csv'))
    assert list(table['method']) == ['maddpg', 'knn_fixed', 'all_cells_on']
    assert os.path.isfile(os.path.join(report_dir, 'reward_curve.csv'))
    manifest = data_utils.read_json(os.path.join(report_dir, 'manifest.json'))
    assert manifest['config_hash'] == experiment.load_config(config_path).config_hash()
    assert manifest['reference'] == 'maddpg'

    knn_dir = str(tmp_path / 'report_knn')
    argv = ['report', '--inputs'] + eval_dirs + ['--reference', 'knn_fixed', '--out', knn_dir]
    assert cli.main(argv) == 0
    table = data_utils.read_csv(os.path.join(knn_dir, 'energy_table.csv')).set_index('method')
    assert table.loc['knn_fixed', 'saving_vs_knn_fixed_percent'] == 0.0
    assert 'saving_vs_maddpg_percent' not in table.columns
    assert data_utils.read_json(os.path.join(knn_dir, 'manifest.json'))['reference'] == 'knn_fixed'


def test_cli_errors(tmp_path):
    """Test that invalid requests exit with status 1."""
    out = str(tmp_path / 'out')
    assert cli.main(['eval', '--policy', 'maddpg', '--out', out]) == 1
    assert cli.main(['eval', '--policy', 'maddpg', '--checkpoint', str(tmp_path / 'none'),
                     '--out', out]) == 1
    assert cli.main(['report', '--inputs', str(tmp_path / 'none'), '--out', out]) == 1
    with pytest.raises(SystemExit):
        cli.main(['eval', '--policy', 'greedy', '--out', out])


def test_cli_mocks_training(tmp_path, mocker):
    """Test that command line overrides reach the training settings."""
    train = mocker.patch('uavlab.agents.maddpg.Maddpg.train', autospec=True)
    train.return_value = mocker.Mock(curve=one_row_curve(), evaluations=pd.DataFrame(), steps=0)
    out = str(tmp_path / 'train')
    assert cli.main(['train', '--config', write_config(tmp_path), '--episodes', '7',
                     '--out', out]) == 0
    model = train.call_args[0][0]
    assert model.config.episodes == 7
    assert model.config.hidden_sizes == (8,)
