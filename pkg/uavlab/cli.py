"""Command line interface: train, eval and report subcommands."""
import argparse
import dataclasses
import logging
import os

from . import data_utils
from . import experiment
from .agents import agent as agent_lib
from .agents.maddpg import Maddpg

logger = logging.getLogger(__name__)

MANIFEST_FILE = 'manifest.json'


def build_parser():
    """Create the argument parser of the uavlab command."""
    parser = argparse.ArgumentParser(prog='uavlab',
                                     description='Train and evaluate UAV coverage policies.')
    parser.add_argument('--log-level', default='INFO',
                        choices=('DEBUG', 'INFO', 'WARNING', 'ERROR'))
    subparsers = parser.add_subparsers(dest='command', required=True)

    train = subparsers.add_parser('train', help='Train MADDPG agents.')
    train.add_argument('--config', help='YAML experiment config. Defaults are used if omitted.')
    train.add_argument('--seed', type=int, help='Overrides the train.seed config entry.')
    train.add_argument('--episodes', type=int, help='Overrides the train.episodes config entry.')
    train.add_argument('--out', required=True, help='Output directory.')

    evaluate = subparsers.add_parser('eval', help='Evaluate one policy.')
    evaluate.add_argument('--config', help='YAML experiment config. Defaults are used if omitted.')
    evaluate.add_argument('--policy', required=True, choices=sorted(agent_lib.CLI_POLICY_TAGS))
    evaluate.add_argument('--checkpoint', help='Checkpoint directory of a maddpg policy.')
    evaluate.add_argument('--fixed-power', type=float, help='Transmit power of the knn policy.')
    evaluate.add_argument('--k', type=int, default=6, help='Neighbors of the knn policy.')
    evaluate.add_argument('--episodes', type=int, default=15)
    evaluate.add_argument('--seed', type=int, default=0, help='The first evaluation seed.')
    evaluate.add_argument('--out', required=True, help='Output directory.')

    report = subparsers.add_parser('report', help='Merge evaluation reports into tables.')
    report.add_argument('--inputs', nargs='+', required=True,
                        help='Directories or files holding report.json documents.')
    report.add_argument('--curve', help='A reward_curve.csv written by train.')
    report.add_argument('--reference', default=experiment.REFERENCE_METHOD)
    report.add_argument('--out', required=True, help='Output directory.')
    return parser


def train(args):
    """Train agents and write the checkpoint and the reward curve."""
    config = experiment.load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides['seed'] = args.seed
    if args.episodes is not None:
        overrides['episodes'] = args.episodes
    train_config = dataclasses.replace(config.train, **overrides)
    env = config.build_env()
    model = Maddpg(env.num_agents, env.observation_size, env.state_size, env.action_size,
                   train_config)
    logger.info('Training %d agents for %d episodes on world %s.',
                env.num_agents, train_config.episodes, env.world.world_hash()[:12])
    result = model.train(env, out_dir=args.out)
    data_utils.write_csv(os.path.join(args.out, 'reward_curve.csv'), result.curve)
    if not result.evaluations.empty:
        data_utils.write_csv(os.path.join(args.out, 'greedy_evaluations.csv'),
                             result.evaluations)
    data_utils.write_json(os.path.join(args.out, MANIFEST_FILE), {
        'config': config.to_dict(),
        'config_hash': config.config_hash(),
        'seed': train_config.seed,
        'episodes': train_config.episodes,
        'steps': result.steps,
        'world_hash': env.world.world_hash(),
    })


def evaluate(args):
    """Evaluate one policy and write its report."""
    config = experiment.load_config(args.config)
    env = config.build_env()
    policy = experiment.policy_from_cli(args.policy, checkpoint=args.checkpoint,
                                        fixed_power=args.fixed_power, k=args.k, seed=args.seed)
    data_utils.ensure_dir(args.out)
    report = experiment.evaluate_policy(env, policy, args.episodes, args.seed,
                                        trace_path=os.path.join(args.out, 'trace.jsonl'))
    report.save(os.path.join(args.out, experiment.REPORT_FILE))
    experiment.emit_curves(args.out, [report], manifest={'config_hash': config.config_hash(),
                                                         'seed': args.seed})
    logger.info('%s: mean coverage %.4f, served %.2f%%, E_UAV %s Wh, E_cell %.2f Wh.',
                report.method, report.mean_coverage, report.mean_served_percent,
                'n/a' if report.e_uav is None else '{:.2f}'.format(report.e_uav),
                report.e_network)


def input_config_hashes(paths):
    """Return the config hashes recorded in the manifests next to report inputs."""
    hashes = set()
    for path in paths:
        directory = path if os.path.isdir(path) else os.path.dirname(path)
        manifest_path = os.path.join(directory, MANIFEST_FILE)
        if os.path.isfile(manifest_path):
            config_hash = data_utils.read_json(manifest_path).get('config_hash')
            if config_hash is not None:
                hashes.add(config_hash)
    return hashes


def report(args):
    """Merge evaluation reports into the energy table and plot-ready files."""
    reports = [experiment.EvalReport.load(path) for path in args.inputs]
    hashes = input_config_hashes(args.inputs)
    if len(hashes) > 1:
        raise ValueError('The inputs were evaluated under different configs: {}'.format(
            sorted(hashes)))
    manifest = {}
    if hashes:
        manifest['config_hash'] = hashes.pop()
    curve = None
    if args.curve is not None:
        curve = data_utils.read_csv(args.curve)
    experiment.emit_curves(args.out, reports, curve=curve, manifest=manifest,
                           reference=args.reference)
    table = experiment.energy_table(reports, reference=args.reference)
    logger.info('Energy comparison:\n%s', experiment.format_energy_table(table))
    by_method = {item.method: item for item in reports}
    reference = by_method.get(args.reference)
    if reference is not None:
        for item in reports:
            if item.method in (args.reference, experiment.ALL_CELLS_ON):
                continue
            statistic, p_value = experiment.paired_test(reference, item)
            logger.info('Coverage %s > %s: t = %.3f, one-sided p = %.4g.',
                        args.reference, item.method, statistic, p_value)


COMMANDS = {'train': train, 'eval': evaluate, 'report': report}


def main(argv=None):
    """Run the command line interface and return the exit status."""
    args = build_parser().parse_args(argv)
    log_file = None
    if getattr(args, 'out', None) is not None:
        data_utils.ensure_dir(args.out)
        log_file = os.path.join(args.out, 'uavlab.log')
    data_utils.setup_logger(log_file, getattr(logging, args.log_level))
    try:
        COMMANDS[args.command](args)
    except (ValueError, IndexError, RuntimeError, OSError) as error:
        logger.error('%s', error)
        return 1
    return 0
