import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from risuav import ppo
from risuav.env import NetworkConfig, RisUavEnv
from risuav.errors import EmptyBatchError, LengthMismatchError, StaleBatchError
from risuav.nn import SGD, Adam, DenseNet
from risuav.ppo import (
    GaussianPolicy,
    PpoAgent,
    PpoConfig,
    TrajectoryBatch,
    advantage,
    clipped_surrogate,
    log_prob_and_sample,
    surrogate_and_gradients,
    update_policy,
)

ratios = st.floats(1e-3, 10.0)
advs = st.floats(-100.0, 100.0)
eps_values = st.floats(0.01, 0.9)


def policy(obs_dim=3, act_dim=2, std=0.3, seed=0):
    return GaussianPolicy(obs_dim, act_dim, [True, False][:act_dim] + [False] * max(0, act_dim - 2),
                          hidden=(8,), init_std=std, rng=np.random.default_rng(seed))


def toy_batch(pol, n=16, seed=0, adv=None):
    rng = np.random.default_rng(seed)
    s = rng.standard_normal((n, pol.mean_net.input_size))
    a = pol.mean(s) + pol.std * rng.standard_normal((n, pol.action_dim))
    logp = pol.log_prob(s, a)
    adv = rng.standard_normal(n) if adv is None else adv
    return TrajectoryBatch(s, a, np.zeros(n), s.copy(), logp, adv, np.zeros(n), pol.version)


class TestAdvantage:
    def test_self_consistent(self):
        assert advantage(0.0, 3.0, 3.0, 1.0) == 0.0

    def test_substitution(self):
        assert advantage(1.0, 1.0, 2.0, 0.9) == pytest.approx(1.8, abs=1e-12)

    def test_myopic(self):
        assert advantage(2.5, 1.0, 7.0, 0.0) == 1.5

    def test_zero_reward_fitted_value(self):
        v = np.zeros(10)
        np.testing.assert_array_equal(advantage(np.zeros(10), v, v, 0.9), 0.0)


class TestClippedSurrogate:
    def test_on_policy_point(self):
        for eps in (0.1, 0.2, 0.5):
            assert clipped_surrogate(1.0, -3.0, eps) == -3.0

    def test_upper_clip(self):
        assert clipped_surrogate(2.0, 1.0, 0.2) == pytest.approx(1.2)

    def test_lower_clip_negative_advantage(self):
        assert clipped_surrogate(0.5, -1.0, 0.2) == pytest.approx(-0.8)

    def test_epsilon_positive(self):
        with pytest.raises(ValueError):
            clipped_surrogate(1.0, 1.0, 0.0)

    @given(ratios, advs, eps_values)
    def test_min_dominance(self, r, a, eps):
        assert clipped_surrogate(r, a, eps) <= r * a + 1e-12

    @given(ratios, advs, advs, eps_values)
    def test_monotone_in_advantage(self, r, a1, a2, eps):
        lo, hi = sorted((a1, a2))
        assert clipped_surrogate(r, lo, eps) <= clipped_surrogate(r, hi, eps) + 1e-12

    @given(advs, eps_values)
    def test_identity_at_one(self, a, eps):
        assert clipped_surrogate(1.0, a, eps) == a


class TestGaussianPolicy:
    def test_log_prob_at_mean(self):
        pol = policy(act_dim=3, std=0.4)
        s = np.ones(3)
        mu = pol.mean(s)
        expected = -3 * math.log(0.4) - 1.5 * math.log(2 * math.pi)
        assert pol.log_prob(s, mu) == pytest.approx(expected, rel=1e-12)

    def test_small_std_limit(self):
        pol = policy(std=1e-9)
        s = np.ones(3)
        u, _ = pol.sample(s, np.random.default_rng(0))
        np.testing.assert_allclose(u, pol.mean(s), atol=1e-8)

    def test_sample_moments(self):
        pol = policy(std=0.3)
        s = np.array([0.2, -0.1, 0.5])
        rng = np.random.default_rng(1)
        u = np.array([log_prob_and_sample(pol, s, rng)[0] for _ in range(100_000)])
        mu = pol.mean(s)
        np.testing.assert_allclose(u.mean(axis=0), mu, atol=0.02 * 0.3)
        np.testing.assert_allclose(u.std(axis=0), 0.3, rtol=0.02)

    def test_sample_log_prob_consistent(self):
        pol = policy()
        s = np.ones(3)
        u, logp = pol.sample(s, np.random.default_rng(2))
        assert logp == pytest.approx(float(pol.log_prob(s, u)), rel=1e-12)

    def test_matches_scalar_gaussian(self):
        pol = policy(act_dim=1, std=0.5)
        s = np.zeros(3)
        mu = pol.mean(s)[0]
        x = mu + 0.37
        density = math.exp(-0.5 * (0.37 / 0.5) ** 2) / (0.5 * math.sqrt(2 * math.pi))
        assert pol.log_prob(s, np.array([x])) == pytest.approx(math.log(density), rel=1e-12)

    def test_invalid_std(self):
        with pytest.raises(ValueError):
            policy(std=0.0)


class TestTrajectoryBatch:
    def test_lengths(self):
        with pytest.raises(LengthMismatchError):
            TrajectoryBatch(np.zeros((2, 1)), np.zeros((2, 1)), np.zeros(3), np.zeros((2, 1)),
                            np.zeros(2), np.zeros(2), np.zeros(2), 0)

    def test_finite_advantages(self):
        with pytest.raises(ValueError):
            TrajectoryBatch(np.zeros((1, 1)), np.zeros((1, 1)), np.zeros(1), np.zeros((1, 1)),
                            np.zeros(1), np.array([np.nan]), np.zeros(1), 0)


class TestUpdatePolicy:
    def value_net(self, pol):
        return DenseNet([pol.mean_net.input_size, 8, 1], rng=np.random.default_rng(0))

    def test_on_policy_gradient(self):
        pol = policy()
        b = toy_batch(pol)
        surr, grads, ratio = surrogate_and_gradients(pol, b.states, b.actions, b.log_probs, b.advantages, 0.2)
        np.testing.assert_allclose(ratio, 1.0, rtol=1e-12)
        # plain estimator mean(A * grad log pi) by finite differences
        flat_params = pol.params
        eps = 1e-6
        for p, g in zip(flat_params, grads):
            flat, gflat = p.reshape(-1), g.reshape(-1)
            for i in range(0, flat.size, max(1, flat.size // 5)):
                orig = flat[i]
                flat[i] = orig + eps
                up = np.mean(b.advantages * pol.log_prob(b.states, b.actions))
                flat[i] = orig - eps
                down = np.mean(b.advantages * pol.log_prob(b.states, b.actions))
                flat[i] = orig
                assert gflat[i] == pytest.approx((up - down) / (2 * eps), rel=1e-5, abs=1e-9)

    def test_zero_advantages(self):
        pol = policy()
        b = toy_batch(pol, adv=np.zeros(16))
        before = [p.copy() for p in pol.params]
        update_policy(pol, self.value_net(pol), b, 0.2, 4, Adam(1e-2), Adam(1e-2))
        for p, q in zip(pol.params, before):
            np.testing.assert_array_equal(p, q)

    def test_entropy_bonus_widens_policy_only(self):
        pol = policy()
        b = toy_batch(pol, adv=np.zeros(16))
        mean_before = [p.copy() for p in pol.mean_net.params]
        std_before = pol.std.copy()
        update_policy(pol, self.value_net(pol), b, 0.2, 2, SGD(0.1), SGD(0.1), entropy_coef=0.5)
        # one full-batch step per epoch: log_std += lr * coef each time
        np.testing.assert_allclose(np.log(pol.std), np.log(std_before) + 2 * 0.1 * 0.5, rtol=1e-12)
        for p, q in zip(pol.mean_net.params, mean_before):
            np.testing.assert_array_equal(p, q)

    def test_surrogate_improves(self):
        improved = 0
        for seed in range(20):
            pol = policy(seed=seed)
            b = toy_batch(pol, seed=seed)
            before, _, _ = surrogate_and_gradients(pol, b.states, b.actions, b.log_probs, b.advantages, 0.2)
            update_policy(pol, self.value_net(pol), b, 0.2, 4, Adam(1e-3), Adam(1e-3),
                          normalize_advantages=False)
            after, _, _ = surrogate_and_gradients(pol, b.states, b.actions, b.log_probs, b.advantages, 0.2)
            improved += after >= before
        assert improved >= 18

    def test_value_regression(self):
        pol = policy()
        vnet = self.value_net(pol)
        b = toy_batch(pol)
        b.value_targets[:] = 1.0
        err_before = np.mean((vnet.forward(b.states)[:, 0] - 1.0) ** 2)
        for _ in range(50):
            b.policy_version = pol.version
            info = update_policy(pol, vnet, b, 0.2, 1, SGD(1e-6), SGD(0.05))
            assert info["value_loss"] > 0
        assert np.mean((vnet.forward(b.states)[:, 0] - 1.0) ** 2) < err_before

    def test_stale_batch(self):
        pol = policy()
        b = toy_batch(pol)
        update_policy(pol, self.value_net(pol), b, 0.2, 1, Adam(1e-3), Adam(1e-3))
        with pytest.raises(StaleBatchError):
            update_policy(pol, self.value_net(pol), b, 0.2, 1, Adam(1e-3), Adam(1e-3))

    def test_empty(self):
        pol = policy()
        b = toy_batch(pol, n=0, adv=np.zeros(0))
        with pytest.raises(EmptyBatchError):
            update_policy(pol, self.value_net(pol), b, 0.2, 1, Adam(1e-3), Adam(1e-3))


class TestAgent:
    def env(self, **kw):
        return RisUavEnv(NetworkConfig(device_count=2, episode_length=10, **kw).with_elements(2), 1)

    def test_build_batch_targets(self):
        env = self.env()
        ag = PpoAgent(env.obs_dim, env.action_dim, env.squash_mask, PpoConfig(hidden=(8,), reward_scale=2.0))
        obs = env.observe(env.reset())
        for _ in range(5):
            u, logp = ag.select_action(obs)
            out = env.step(env.action_from_vector(u))
            nxt = env.observe(out.next_state)
            ag.store(obs, u, out.reward, nxt, logp)
            obs = nxt
        b = ag.build_batch()
        v = ag.value_net.forward(b.states)[:, 0]
        v2 = ag.value_net.forward(b.next_states)[:, 0]
        np.testing.assert_allclose(b.value_targets, 2.0 * b.rewards + 0.9 * v2, rtol=1e-12)
        np.testing.assert_allclose(b.advantages, 2.0 * b.rewards + 0.9 * v2 - v, rtol=1e-12)

    def test_empty_rollout(self):
        ag = PpoAgent(3, 2, [True, False], PpoConfig(hidden=(4,)))
        with pytest.raises(EmptyBatchError):
            ag.build_batch()

    def test_train_log_and_updates(self):
        env = self.env()
        ag = PpoAgent(env.obs_dim, env.action_dim, env.squash_mask, PpoConfig(hidden=(8,), rollout_length=8))
        log = ppo.train(ag, env, episodes=4, steps=10)
        assert len(log) == 4 and [r["episode"] for r in log] == [0, 1, 2, 3]
        assert ag.policy.version == 5

    def test_deterministic_given_seed(self):
        logs = []
        for _ in range(2):
            env = self.env()
            ag = PpoAgent(env.obs_dim, env.action_dim, env.squash_mask, PpoConfig(hidden=(8,), rollout_length=8), seed=2)
            logs.append([r["mean_reward"] for r in ppo.train(ag, env, episodes=3, steps=10)])
        assert logs[0] == logs[1]

    def test_mean_policy_evaluation(self):
        env = self.env(frozen_channels=True)
        ag = PpoAgent(env.obs_dim, env.action_dim, env.squash_mask, PpoConfig(hidden=(8,)))
        assert ppo.evaluate(ag, env, 2, 5) == ppo.evaluate(ag, env, 2, 5)
