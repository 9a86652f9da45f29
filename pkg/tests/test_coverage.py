"""Tests for the UAV coverage environment."""
import numpy as np
import pytest

from uavlab import data_utils
from uavlab.environments import channel
from uavlab.environments import coverage
from uavlab.environments import make
from . import utils


def los_env(schedule, user_positions, demands, **kwargs):
    """Create an environment with a deterministic channel over a hand-built world."""
    scenario = utils.hand_world(schedule, user_positions, demands, **kwargs)
    return coverage.UavCoverage(scenario, channel_params=channel.ChannelParams(rician_G=np.inf))


def test_action_mapping():
    """Test the raw to physical mapping and its inverse."""
    raw = np.array([[1.0, -0.5, -1.0], [0.0, 0.25, 1.0]])
    physical = coverage.to_physical(raw, v_max=20.0, p_max=2.0)
    np.testing.assert_allclose(physical, [[20.0, -10.0, 0.0], [0.0, 5.0, 2.0]])
    np.testing.assert_allclose(coverage.to_raw(physical, v_max=20.0, p_max=2.0), raw)


def test_enforce_speed_and_power():
    """Test that long moves are shortened radially and excess fleet power is rescaled."""
    v_max, p_max = 20.0, 2.0
    actions = np.array([[2 * v_max, 0.0, 0.8 * p_max], [0.0, 0.0, 0.8 * p_max]])
    feasible = coverage.enforce_constraints(actions, v_max, p_max)
    np.testing.assert_allclose(feasible[0, :2], [v_max, 0.0])
    np.testing.assert_allclose(feasible[:, 2], [0.5 * p_max, 0.5 * p_max])

    diagonal = coverage.enforce_constraints([[30.0, 40.0, -1.0]], v_max, p_max)
    np.testing.assert_allclose(diagonal, [[12.0, 16.0, 0.0]])


def test_feasible_actions_unchanged():
    """Test that feasible actions pass through enforcement untouched."""
    actions = np.array([[3.0, 4.0, 0.5], [-10.0, 0.0, 0.5]])
    feasible = coverage.enforce_constraints(actions, 20.0, 2.0, fleet_power_max=1.0)
    np.testing.assert_array_equal(feasible, actions)


def test_reward_oracle():
    """Test the reward of a UAV serving one of two UAV-needed users."""
    report = channel.SinrReport(gains=np.ones((1, 3)), sinr=np.ones((1, 3)),
                                rates=np.ones((1, 3)), assoc=np.array([0, 0, -1]),
                                served_mask=np.array([True, False, False]))
    uav_needed = np.array([True, True, False])
    weights = coverage.RewardWeights(omega1=0.8, omega2=0.2)
    rewards = coverage.agent_rewards(report, uav_needed, np.array([25.0]), 100.0, weights)
    np.testing.assert_allclose(rewards, [0.55])


def test_reward_without_needy_users():
    """Test that coverage counts as full when no user needs a UAV."""
    report = channel.SinrReport(gains=np.ones((2, 1)), sinr=np.ones((2, 1)),
                                rates=np.ones((2, 1)), assoc=np.array([-1]),
                                served_mask=np.array([False]))
    rewards = coverage.agent_rewards(report, np.array([False]), np.array([0.0, 100.0]), 100.0,
                                     coverage.RewardWeights())
    np.testing.assert_allclose(rewards, [1.0, 0.8])


def test_episode_objective():
    """Test the throughput-minus-energy objective."""
    objective = coverage.episode_objective([10.0, 20.0], [[1.0, 2.0], [3.0, 4.0]], lam=0.5)
    assert objective == pytest.approx(25.0)


def test_reset_shapes():
    """Test the observation and state sizes."""
    env = utils.tiny_env()
    observations, state = env.reset()
    num_cells = env.world.num_cells
    assert env.observation_size == 3 * 2 + 6 * 4 + num_cells
    assert env.state_size == 3 * 2 + 3 * 8 + num_cells
    assert observations.shape == (2, env.observation_size)
    assert state.shape == (env.state_size,)
    np.testing.assert_allclose(env.uav_positions, np.zeros((2, 2)))
    np.testing.assert_allclose(env.uav_powers, 0.0)


def test_step_serves_needy_user():
    """Test one step of a UAV hovering over a user of a sleeping cell."""
    env = los_env(schedule=[[0, 0], [1, 1], [1, 1]],
                  user_positions=[[125, 200], [-250, 0]],
                  demands=[[1e3, 1e3], [1e3, 1e3]])
    env.reset()
    outcome = env.step(np.array([[0.0, 0.0, 1.0]]))
    np.testing.assert_array_equal(outcome.report.assoc, [0, -1])
    assert outcome.info['coverage'] == 1.0
    assert outcome.info['num_uav_needed'] == 1
    assert outcome.info['num_gbs_served'] == 1
    assert outcome.info['num_served'] == 2
    e_max = env.e_max
    assert e_max == pytest.approx(2.0 + 0.5 * 400 + 5.0 * 20)
    np.testing.assert_allclose(outcome.rewards, [0.8 + 0.2 * (1 - 2.0 / e_max)])
    assert not outcome.done
    assert env.timestep == 1


def test_step_moves_uav():
    """Test that a UAV moves by the enforced displacement."""
    env = los_env(schedule=[[0, 0, 0], [1, 1, 1], [1, 1, 1]],
                  user_positions=[[125, 200]],
                  demands=[[1e3, 1e3, 1e3]], v_max=20.0)
    env.reset()
    outcome = env.step(np.array([[1.0, 1.0, 0.0]]))
    step = 20.0 / np.sqrt(2)
    np.testing.assert_allclose(env.uav_positions, [[step, step]])
    np.testing.assert_allclose(outcome.ledger.uav_prop[0, 0], 0.5 * 400 + 5.0 * 20)
    np.testing.assert_allclose(env.trace[0]['displacements'], [[step, step]])


def test_step_errors():
    """Test the step preconditions."""
    env = los_env(schedule=[[0], [1], [1]], user_positions=[[125, 200]], demands=[[1e3]])
    with pytest.raises(RuntimeError):
        env.step(np.zeros((1, 3)))
    env.reset()
    with pytest.raises(ValueError):
        env.step(np.zeros((2, 3)))
    outcome = env.step(np.zeros((1, 3)))
    assert outcome.done
    with pytest.raises(RuntimeError):
        env.step(np.zeros((1, 3)))


def test_full_episode_is_feasible(tmp_path):
    """Test that random joint actions never break the constraints."""
    env = utils.tiny_env(seed=4)
    random = np.random.RandomState(0)
    env.reset(episode_seed=3)
    done = False
    while not done:
        outcome = env.step(random.uniform(-2, 2, size=(env.num_agents, env.action_size)))
        done = outcome.done
        assert np.all(np.linalg.norm(env.trace[-1]['displacements'], axis=1) <= 20.0 + 1e-9)
        assert env.uav_powers.sum() <= env.fleet_power_max + 1e-9
    audit = coverage.audit_trace(env.trace, 20.0, 2.0)
    assert audit == {'steps': 6, 'speed_violations': 0, 'power_violations': 0,
                     'fleet_power_violations': 0}
    ledger = env.ledger()
    assert ledger.num_steps == 6
    assert np.isfinite(env.objective())

    path = str(tmp_path / 'trace.jsonl')
    coverage.write_trace(path, env.trace)
    records = data_utils.read_jsonl(path)
    assert len(records) == 6
    assert records[-1]['t'] == 5


def test_audit_detects_violations():
    """Test that the audit counts infeasible records."""
    records = [{'displacements': [[30.0, 0.0]], 'powers': [1.0]},
               {'displacements': [[0.0, 0.0]], 'powers': [3.0]},
               {'displacements': [[0.0, 0.0], [0.0, 0.0]], 'powers': [1.5, 1.5]}]
    audit = coverage.audit_trace(records, v_max=20.0, p_max=2.0)
    assert audit == {'steps': 3, 'speed_violations': 1, 'power_violations': 1,
                     'fleet_power_violations': 2}


def test_same_episode_seed_same_rollout():
    """Test that an episode is reproducible from its seed."""
    env = utils.tiny_env(seed=2)
    actions = np.tile([[0.3, -0.2, 0.0]], (env.num_agents, 1))
    rewards = []
    for _ in range(2):
        env.reset(episode_seed=11)
        rewards.append([env.step(actions).rewards for _ in range(3)])
    np.testing.assert_array_equal(rewards[0], rewards[1])


def test_observation_sees_nearest_needy_users():
    """Test the user slots of a local observation."""
    env = los_env(schedule=[[0], [0], [1]],
                  user_positions=[[125, 200], [-250, 0], [-200, 30], [125, -200]],
                  demands=[[1e6], [1e6], [1e6], [1e6]])
    observations, _ = env.reset()
    slots = observations[0, 3:3 + 24].reshape(6, 4)
    # Three users need a UAV; the nearest to the origin comes first.
    np.testing.assert_allclose(slots[:, 3], [1, 1, 1, 0, 0, 0])
    np.testing.assert_allclose(slots[0, :2], np.array([-200, 30]) / (2 * utils.CELL_RADIUS))
    np.testing.assert_allclose(observations[0, -3:], [0, 0, 1])


def test_make():
    """Test the named environments and argument overrides."""
    env = make('nes-desk-v1')
    assert env.num_agents == 2
    assert env.world.num_cells == 9
    assert env.world.num_users == 30
    assert env.world.episode_length == 100
    assert env.name == 'uav-coverage'

    env = make('nes-tiny-v1', num_uavs=2, alpha1=1.0, omega1=0.5, fleet_power_max=3.0)
    assert env.num_agents == 2
    assert env.energy_params.alpha1 == 1.0
    assert env.reward_weights.omega1 == 0.5
    assert env.fleet_power_max == 3.0

    with pytest.raises(ValueError):
        make('nes-huge-v1')
    with pytest.raises(ValueError):
        make('nes-tiny-v1', not_a_parameter=1)


def test_seed_sets_default_episode():
    """Test that a seeded reset replays the same fading as an explicit episode seed."""
    actions = np.array([[0.5, -0.5, 0.4], [-0.2, 0.1, 0.6]])
    with utils.tiny_env(seed=1) as env:
        env.reset(episode_seed=4)
        expected = env.step(actions).rewards
        env.seed(4)
        env.reset()
        np.testing.assert_array_equal(env.step(actions).rewards, expected)


def test_enforce_is_idempotent():
    """Test that enforcing feasible actions a second time changes nothing."""
    random = np.random.RandomState(6)
    for _ in range(200):
        num_uavs = random.randint(1, 5)
        actions = random.uniform(-60, 60, size=(num_uavs, 3))
        fleet_power_max = random.uniform(0.5, 4.0)
        once = coverage.enforce_constraints(actions, 20.0, 2.0, fleet_power_max)
        twice = coverage.enforce_constraints(once, 20.0, 2.0, fleet_power_max)
        np.testing.assert_array_equal(twice, once)
        assert np.all(np.linalg.norm(once[:, :2], axis=1) <= 20.0 * (1 + 1e-12))
        assert once[:, 2].sum() <= fleet_power_max * (1 + 1e-12)


def test_observation_ignores_users_beyond_nearest_six():
    """Test that adding a needy user farther than the six nearest leaves the observation alone."""
    near = [[50, 0], [0, 100], [-150, 0], [0, -200], [250, 0], [0, 300], [-350, 0]]
    observations = []
    for extra in ([], [[400, 10]]):
        users = near + extra
        env = los_env(schedule=[[0], [0], [0]], user_positions=users,
                      demands=[[1e6]] * len(users))
        observations.append(env.reset()[0])
    np.testing.assert_array_equal(observations[1], observations[0])
    slots = observations[0][0, 3:3 + 24].reshape(6, 4)
    np.testing.assert_allclose(slots[:, 3], 1.0)
    assert np.all(np.abs(slots[:, :2]) <= 1.0)


def test_on_cell_demands_do_not_change_coverage():
    """Test that the demands of users served by active cells do not enter coverage or reward."""
    outcomes = []
    for on_demand in (1e3, 4e6):
        env = los_env(schedule=[[0], [1], [1]],
                      user_positions=[[125, 200], [60, 150], [-250, 0], [-200, -50]],
                      demands=[[1e3], [5e7], [on_demand], [on_demand]])
        env.reset()
        outcomes.append(env.step(np.array([[0.3, 0.2, 0.5]])))
    assert outcomes[0].info['coverage'] == outcomes[1].info['coverage']
    assert outcomes[0].info['coverage'] == 0.5
    np.testing.assert_array_equal(outcomes[0].rewards, outcomes[1].rewards)
    np.testing.assert_array_equal(outcomes[0].report.served_mask[:2],
                                  outcomes[1].report.served_mask[:2])
