import math

import numpy as np
import pytest

from scn_lab.envs import ENV_REGISTRY, ObsNormalizer, make_env
from scn_lab.envs.merge import CRASH_PENALTY, GOAL_REWARD, MERGE_POS
from scn_lab.envs.pendulum import wrap_angle
from scn_lab.errors import ConfigError, UsageError

ALL_ENVS = sorted(ENV_REGISTRY)


def rollout_rewards(env, actions, seed=0):
    env.reset(seed)
    out = []
    for a in actions:
        out.append(env.step(a).reward)
        if env.done:
            break
    return out


class TestContract:
    @pytest.mark.parametrize("name", ALL_ENVS)
    def test_reset_deterministic(self, name):
        a = make_env(name).reset(123)
        b = make_env(name).reset(123)
        assert np.array_equal(a, b)

    @pytest.mark.parametrize("name", ALL_ENVS)
    def test_transition_sequence_bit_identical(self, name):
        env1, env2 = make_env(name), make_env(name)
        env1.reset(7)
        env2.reset(7)
        rng = np.random.default_rng(0)
        for _ in range(50):
            a = rng.uniform(env1.spec.action_low, env1.spec.action_high)
            t1, t2 = env1.step(a), env2.step(a)
            assert np.array_equal(t1.next_state, t2.next_state)
            assert t1.reward == t2.reward
            assert t1.done == t2.done
            if env1.done:
                break

    @pytest.mark.parametrize("name", ALL_ENVS)
    def test_step_after_done_raises(self, name):
        env = make_env(name)
        env.reset(0)
        while not env.done:
            env.step(np.zeros(env.spec.action_dim))
        with pytest.raises(UsageError):
            env.step(np.zeros(env.spec.action_dim))

    @pytest.mark.parametrize("name", ALL_ENVS)
    def test_non_finite_action_rejected(self, name):
        env = make_env(name)
        env.reset(0)
        with pytest.raises(ConfigError):
            env.step(np.full(env.spec.action_dim, np.nan))

    @pytest.mark.parametrize("name", ALL_ENVS)
    def test_clock_and_truncation(self, name):
        env = make_env(name)
        env.reset(3)
        assert env.t == 0.0
        tr = env.step(np.zeros(env.spec.action_dim))
        assert env.t == pytest.approx(env.spec.dt)
        steps = 1
        while not env.done:
            tr = env.step(np.zeros(env.spec.action_dim))
            steps += 1
        assert steps <= env.spec.max_steps
        if steps == env.spec.max_steps and not tr.info.get("crash") and not tr.info.get("goal"):
            assert tr.info["truncated"]

    @pytest.mark.parametrize("name", ALL_ENVS)
    def test_reward_within_documented_range(self, name):
        bounds = {
            "pendulum": (-16.28, 0.0),
            "point_mass": (-4400.0, 0.0),
            "rhythm": (-25.0, 0.0),
            "merge": (-201.1, 200.03),
        }
        lo, hi = bounds[name]
        rng = np.random.default_rng(1)
        for seed in range(20):
            env = make_env(name)
            env.reset(seed)
            while not env.done:
                a = rng.uniform(env.spec.action_low, env.spec.action_high)
                r = env.step(a).reward
                assert lo <= r <= hi

    def test_unknown_env_rejected(self):
        with pytest.raises(ConfigError):
            make_env("mountain_car")

    def test_unknown_override_rejected(self):
        with pytest.raises(ConfigError):
            make_env("pendulum", {"gravity": 3.0})

    def test_max_steps_override(self):
        env = make_env("pendulum", {"max_steps": 7})
        env.reset(0)
        n = 0
        while not env.done:
            env.step([0.0])
            n += 1
        assert n == 7


class TestPendulum:
    def test_upright_equilibrium_persists(self):
        env = make_env("pendulum")
        env.reset(0)
        env.theta, env.theta_dot = 0.0, 0.0
        env.step([0.0])
        assert abs(env.theta) < 1e-6

    def test_reset_ranges(self):
        for seed in range(1000):
            env = make_env("pendulum")
            env.reset(seed)
            assert -math.pi <= env.theta < math.pi
            assert -1.0 <= env.theta_dot <= 1.0

    def test_energy_conservation_at_zero_torque(self):
        worst = 0.0
        for seed in range(100):
            env = make_env("pendulum")
            env.reset(seed)
            e0 = env.energy()
            for _ in range(200):
                env.step([0.0])
                worst = max(worst, abs(env.energy() - e0))
        # scale: full potential range is 2 * (3g/2l) = 30
        assert worst / 30.0 < 0.01

    def test_wrap_angle(self):
        assert wrap_angle(0.0) == 0.0
        assert wrap_angle(math.pi) == math.pi
        assert wrap_angle(-math.pi) == math.pi  # tie resolves to +pi
        assert wrap_angle(3 * math.pi) == pytest.approx(math.pi)
        assert wrap_angle(2 * math.pi + 0.1) == pytest.approx(0.1, abs=1e-12)
        assert wrap_angle(-0.1) == pytest.approx(-0.1, abs=1e-12)

    def test_torque_changes_energy(self):
        env = make_env("pendulum")
        env.reset(5)
        e0 = env.energy()
        for _ in range(50):
            env.step([2.0 * math.copysign(1.0, env.theta_dot) if env.theta_dot else 2.0])
        assert env.energy() > e0


class TestPointMass:
    def test_observation_layout(self):
        env = make_env("point_mass")
        obs = env.reset(0)
        assert obs.shape == (8,)
        # err blocks plus reference blocks reconstruct absolute state
        assert obs[0] + obs[4] == pytest.approx(env.px)
        assert obs[2] + obs[6] == pytest.approx(env.vx)
        # reference starts at angle 0 on the unit circle
        assert obs[4] == pytest.approx(1.0)
        assert obs[5] == pytest.approx(0.0)
        assert obs[7] == pytest.approx(1.0)

    def test_reference_controller_oracle(self):
        # hand-derived PD + centripetal feedforward must track well
        totals = []
        for seed in range(100):
            env = make_env("point_mass")
            env.reset(seed)
            total = 0.0
            while not env.done:
                total += env.step(env.reference_action()).reward
            totals.append(total)
        assert np.mean(totals) > -5.0

    def test_zero_action_drifts(self):
        env = make_env("point_mass")
        env.reset(0)
        total = 0.0
        while not env.done:
            total += env.step(np.zeros(2)).reward
        assert total < -100.0

    def test_effort_cost_at_perfect_tracking(self):
        env = make_env("point_mass")
        env.reset(0)
        env.px, env.py, env.vx, env.vy = 1.0, 0.0, 0.0, 1.0
        tr = env.step(env.reference_action())
        # on-track: reward is pure control cost of the centripetal force
        assert tr.reward == pytest.approx(-0.01, abs=1e-6)


class TestRhythm:
    def test_target_is_time_only(self):
        env = make_env("rhythm")
        env.reset(0)
        assert env.target(0.0) == 0.0
        assert env.target(math.pi / 3) == pytest.approx(math.sin(1.5 * math.pi / 3))

    def test_observation_hides_phase(self):
        env = make_env("rhythm")
        obs = env.reset(4)
        assert obs.shape == (1,)
        assert obs[0] == pytest.approx(env.v)

    def test_feedforward_oracle_tracks(self):
        total = 0.0
        env = make_env("rhythm")
        env.reset(1)
        while not env.done:
            total += env.step(env.reference_action()).reward
        # transient from the random start decays; tracking cost stays small
        assert total > -5.0

    def test_reset_range(self):
        for seed in range(200):
            env = make_env("rhythm")
            env.reset(seed)
            assert -0.5 <= env.v <= 0.5


class TestMerge:
    def test_reset_ego_speed_range(self):
        for seed in range(1000):
            env = make_env("merge")
            env.reset(seed)
            assert 5.0 <= env.v_ego <= 10.0

    def test_traffic_ordered_front_first(self):
        for seed in range(50):
            env = make_env("merge")
            env.reset(seed)
            assert all(env.x[i] > env.x[i + 1] for i in range(len(env.x) - 1))

    def test_idm_ego_reference_never_crashes(self):
        crashes = 0
        for seed in range(100):
            env = make_env("merge")
            env.reset(seed)
            while not env.done:
                tr = env.step(env.reference_action())
            crashes += bool(tr.info.get("crash"))
        assert crashes == 0

    def test_forced_gap_violation_crashes(self):
        env = make_env("merge")
        env.reset(0)
        # plant the ego just short of the merge point, a car right ahead
        env.x_ego = MERGE_POS - 0.5
        env.v_ego = 10.0
        env.x = [MERGE_POS + 2.0, 20.0, 10.0, 5.0, 0.0, -10.0]
        env.v = [10.0, 10.0, 10.0, 10.0, 10.0, 10.0]
        tr = env.step([3.0])
        assert tr.info.get("crash")
        assert tr.done
        assert tr.reward <= CRASH_PENALTY + 1.0

    def test_goal_reached_reward(self):
        env = make_env("merge")
        env.reset(0)
        env.x_ego = MERGE_POS + 99.8
        env.v_ego = 10.0
        env.x = [env.x_ego - 30.0, 60.0, 50.0, 40.0, 30.0, 20.0]
        env.v = [12.0] * 6
        tr = env.step([0.0])
        assert tr.info.get("goal")
        assert tr.done
        assert tr.reward >= GOAL_REWARD - 1.0

    def test_lag_follows_merged_ego(self):
        env = make_env("merge", {"idm_noise_std": 0.0})
        env.reset(3)
        env.x_ego = MERGE_POS + 10.0
        env.v_ego = 0.0
        # one slow car approaching the stopped ego from behind
        env.x = [env.x_ego + 200.0, env.x_ego + 190.0, env.x_ego + 180.0,
                 env.x_ego + 170.0, env.x_ego + 160.0, env.x_ego - 15.0]
        env.v = [12.0, 12.0, 12.0, 12.0, 12.0, 8.0]
        v_before = env.v[5]
        for _ in range(10):
            if env.done:
                break
            env.step([0.0])
        assert env.v[5] < v_before  # lag car braked for the ego

    def test_observation_sensor_clamps(self):
        env = make_env("merge")
        env.reset(0)
        env.x_ego = 500.0  # far beyond everything
        obs = env._observe()
        assert obs[2] == 100.0 and obs[3] == 0.0  # no lead
        assert obs[4] == 100.0  # lag far behind clamps

    def test_naive_fullspeed_sometimes_crashes(self):
        crashes = 0
        for seed in range(50):
            env = make_env("merge")
            env.reset(seed)
            while not env.done:
                tr = env.step([3.0])
            crashes += bool(tr.info.get("crash"))
        assert crashes > 0


class TestNormalizer:
    def test_identity_below_two_samples(self):
        n = ObsNormalizer(3)
        x = np.array([5.0, -1.0, 2.0])
        assert np.array_equal(n.normalize(x), x)
        n.update(x)
        assert np.array_equal(n.normalize(x), x)  # count == 1 still identity

    def test_constant_stream_maps_to_zero(self):
        n = ObsNormalizer(2)
        x = np.array([3.0, -4.0])
        for _ in range(50):
            n.update(x)
        assert np.allclose(n.normalize(x), 0.0, atol=1e-6)

    def test_monte_carlo_standardization(self):
        n = ObsNormalizer(4)
        rng = np.random.default_rng(0)
        for _ in range(100_000):
            n.update(rng.standard_normal(4))
        assert np.all(np.abs(n.mean) < 0.05)
        assert np.all(np.abs(n.var - 1.0) < 0.05)

    def test_training_flag_controls_updates(self):
        n = ObsNormalizer(1)
        rng = np.random.default_rng(1)
        for _ in range(10):
            n.normalize(rng.standard_normal(1), training=True)
        count = n.count
        n.normalize(np.array([9.9]), training=False)
        assert n.count == count

    def test_merge_matches_sequential(self):
        rng = np.random.default_rng(2)
        xs = rng.standard_normal((100, 3))
        seq = ObsNormalizer(3)
        for x in xs:
            seq.update(x)
        a, b = ObsNormalizer(3), ObsNormalizer(3)
        for x in xs[:37]:
            a.update(x)
        for x in xs[37:]:
            b.update(x)
        a.merge(b)
        assert a.count == seq.count
        assert np.allclose(a.mean, seq.mean, atol=1e-12)
        assert np.allclose(a.m2, seq.m2, atol=1e-9)

    def test_state_roundtrip(self):
        n = ObsNormalizer(2)
        rng = np.random.default_rng(3)
        for _ in range(10):
            n.update(rng.standard_normal(2))
        m = ObsNormalizer.from_state(n.state_dict())
        x = rng.standard_normal(2)
        assert np.array_equal(n.normalize(x), m.normalize(x))
