"""Proximal policy optimization with the clipped surrogate objective.

The policy is a diagonal Gaussian over the pre-mapping action space with a
state-independent learned log-std. Environments clip and wrap samples into
the feasible set (:meth:`risuav.env.RisUavEnv.action_from_vector`); that map
is the same for the collecting and the updated policy, so probability ratios
are computed on the pre-mapping densities and no Jacobian correction enters.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import EmptyBatchError, LengthMismatchError, StaleBatchError
from .nn import DenseNet, apply_gradients, make_optimizer

LOG_2PI = math.log(2.0 * math.pi)


def advantage(reward, value_s, value_next, discount: float):
    """One-step TD advantage ``r + discount * V(s') - V(s)``."""
    return reward + discount * value_next - value_s


def clipped_surrogate(ratio, adv, epsilon: float):
    """``min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A)``, elementwise."""
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    return np.minimum(ratio * adv, np.clip(ratio, 1.0 - epsilon, 1.0 + epsilon) * adv)


class GaussianPolicy:
    def __init__(self, obs_dim: int, action_dim: int, squash_mask, hidden=(128, 128),
                 hidden_activation: str = "tanh", init_std: float = 0.3, rng=None):
        if not init_std > 0:
            raise ValueError("init_std must be > 0")
        self.mean_net = DenseNet(
            [obs_dim, *hidden, action_dim], hidden_activation, "sigmoid", squash_mask,
            rng=rng, final_init_scale=3e-3,
        )
        self.log_std = np.full(action_dim, math.log(init_std))
        self.version = 0

    @property
    def action_dim(self) -> int:
        return self.log_std.shape[0]

    @property
    def params(self) -> list[np.ndarray]:
        return self.mean_net.params + [self.log_std]

    @property
    def std(self) -> np.ndarray:
        return np.exp(self.log_std)

    def mean(self, obs) -> np.ndarray:
        return self.mean_net.forward(obs)

    def log_prob_at(self, mean, actions) -> np.ndarray:
        z = (np.asarray(actions) - mean) / self.std
        return -0.5 * np.sum(z * z, axis=-1) - np.sum(self.log_std) - 0.5 * self.action_dim * LOG_2PI

    def log_prob(self, obs, actions) -> np.ndarray:
        return self.log_prob_at(self.mean(obs), actions)

    def sample(self, obs, rng: np.random.Generator) -> tuple[np.ndarray, float]:
        """Draw a pre-mapping action and return it with its log-density."""
        mu = self.mean(obs)
        u = mu + self.std * rng.standard_normal(mu.shape)
        return u, float(self.log_prob_at(mu, u))


log_prob_and_sample = GaussianPolicy.sample


@dataclass
class TrajectoryBatch:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    log_probs: np.ndarray
    advantages: np.ndarray
    value_targets: np.ndarray
    policy_version: int

    def __post_init__(self):
        n = len(self.rewards)
        for name in ("states", "actions", "next_states", "log_probs", "advantages", "value_targets"):
            if len(getattr(self, name)) != n:
                raise LengthMismatchError(f"{name} has length {len(getattr(self, name))}, expected {n}")
        if not np.all(np.isfinite(self.advantages)):
            raise ValueError("non-finite advantages")

    def __len__(self) -> int:
        return len(self.rewards)


def surrogate_and_gradients(policy: GaussianPolicy, states, actions, old_log_probs, advs, epsilon: float):
    """Mean clipped surrogate and its gradient (for ascent) w.r.t. policy params."""
    mu, cache = policy.mean_net.forward_cache(states)
    std = policy.std
    diff = actions - mu
    logp = policy.log_prob_at(mu, actions)
    ratio = np.exp(logp - old_log_probs)
    surr = clipped_surrogate(ratio, advs, epsilon)
    # d surr / d logp is ratio*A where the unclipped branch is selected, else 0
    active = ((advs >= 0) & (ratio < 1.0 + epsilon)) | ((advs < 0) & (ratio > 1.0 - epsilon))
    coef = np.where(active, ratio * advs, 0.0) / len(advs)
    g_mu = coef[:, None] * diff / std**2
    g_logstd = (coef[:, None] * ((diff / std) ** 2 - 1.0)).sum(axis=0)
    grads, _ = policy.mean_net.backward_cache(cache, g_mu)
    return float(np.mean(surr)), grads + [g_logstd], ratio


def update_policy(policy: GaussianPolicy, value_net: DenseNet, batch: TrajectoryBatch, epsilon: float,
                  epochs: int, policy_opt, value_opt, minibatch_size: Optional[int] = None,
                  rng: Optional[np.random.Generator] = None, normalize_advantages: bool = True,
                  entropy_coef: float = 0.0) -> dict:
    """Mini-batch ascent on the clipped surrogate (plus ``entropy_coef`` times the
    policy entropy) and regression of the value net onto the batch targets."""
    if len(batch) == 0:
        raise EmptyBatchError("empty trajectory batch")
    if batch.policy_version != policy.version:
        raise StaleBatchError(
            f"batch collected by policy version {batch.policy_version}, policy is at {policy.version}"
        )
    rng = rng if rng is not None else np.random.default_rng(0)
    n = len(batch)
    mb = n if minibatch_size is None else min(minibatch_size, n)
    advs = batch.advantages
    if normalize_advantages and n > 1:
        sd = advs.std()
        advs = (advs - advs.mean()) / (sd if sd > 1e-12 else 1.0)
    surrogates, value_losses = [], []
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, mb):
            idx = order[start : start + mb]
            surr, grads, _ = surrogate_and_gradients(
                policy, batch.states[idx], batch.actions[idx], batch.log_probs[idx], advs[idx], epsilon
            )
            if entropy_coef:
                # Gaussian entropy is sum(log_std) + const
                grads[-1] = grads[-1] + entropy_coef
            apply_gradients_list(policy.params, [-g for g in grads], policy_opt)
            v, vcache = value_net.forward_cache(batch.states[idx])
            err = batch.value_targets[idx] - v[:, 0]
            vgrads, _ = value_net.backward_cache(vcache, (-2.0 / len(idx) * err)[:, None])
            apply_gradients(value_net, vgrads, value_opt)
            surrogates.append(surr)
            value_losses.append(float(np.mean(err**2)))
    policy.version += 1
    return {"surrogate": float(np.mean(surrogates)), "value_loss": float(np.mean(value_losses))}


def apply_gradients_list(params: list[np.ndarray], grads: list[np.ndarray], opt) -> None:
    if len(params) != len(grads):
        raise LengthMismatchError("parameter and gradient lists differ in length")
    opt.step(params, grads)


@dataclass
class PpoConfig:
    hidden: tuple[int, ...] = (128, 128)
    hidden_activation: str = "tanh"
    policy_lr: float = 1e-4
    value_lr: float = 1e-3
    optimizer: str = "adam"
    discount: float = 0.9
    clip_epsilon: float = 0.2
    epochs: int = 4
    rollout_length: int = 32
    minibatch_size: int = 32
    init_std: float = 0.3
    normalize_advantages: bool = True
    entropy_coef: float = 0.0
    # None: fix the scale from the first rollout as 1 / mean|r|
    reward_scale: Optional[float] = None


class PpoAgent:
    def __init__(self, obs_dim: int, action_dim: int, squash_mask, config: PpoConfig = None, seed: int = 0):
        self.config = config if config is not None else PpoConfig()
        cfg = self.config
        init_rng, self.rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
        self.policy = GaussianPolicy(obs_dim, action_dim, squash_mask, cfg.hidden, cfg.hidden_activation,
                                     cfg.init_std, rng=init_rng)
        self.value_net = DenseNet([obs_dim, *cfg.hidden, 1], cfg.hidden_activation, rng=init_rng)
        self.policy_opt = make_optimizer(cfg.optimizer, cfg.policy_lr)
        self.value_opt = make_optimizer(cfg.optimizer, cfg.value_lr)
        self.reward_scale = cfg.reward_scale
        self._rollout: list[tuple] = []

    def select_action(self, obs, explore: bool = True) -> tuple[np.ndarray, float]:
        if not explore:
            mu = self.policy.mean(obs)
            return mu, float(self.policy.log_prob_at(mu, mu))
        return self.policy.sample(obs, self.rng)

    def store(self, s, a, r: float, s2, logp: float) -> None:
        self._rollout.append((s, a, r, s2, logp))

    def build_batch(self) -> TrajectoryBatch:
        if not self._rollout:
            raise EmptyBatchError("no transitions collected")
        s, a, r, s2, logp = (np.array(x) for x in zip(*self._rollout))
        if self.reward_scale is None:
            mean_abs = float(np.mean(np.abs(r)))
            self.reward_scale = 1.0 / mean_abs if mean_abs > 0 else 1.0
        r_scaled = r * self.reward_scale
        v = self.value_net.forward(s)[:, 0]
        v_next = self.value_net.forward(s2)[:, 0]
        targets = r_scaled + self.config.discount * v_next
        advs = advantage(r_scaled, v, v_next, self.config.discount)
        return TrajectoryBatch(s, a, r, s2, logp, advs, targets, self.policy.version)

    def maybe_update(self, force: bool = False) -> Optional[dict]:
        if not self._rollout or (len(self._rollout) < self.config.rollout_length and not force):
            return None
        batch = self.build_batch()
        self._rollout = []
        cfg = self.config
        return update_policy(self.policy, self.value_net, batch, cfg.clip_epsilon, cfg.epochs,
                             self.policy_opt, self.value_opt, cfg.minibatch_size, self.rng,
                             cfg.normalize_advantages, cfg.entropy_coef)


def run_episode(agent: PpoAgent, env, steps: int, explore: bool = True, learn: bool = True):
    state = env.reset()
    obs = env.observe(state)
    rewards, stats = [], []
    for _ in range(steps):
        u, logp = agent.select_action(obs, explore=explore)
        outcome = env.step(env.action_from_vector(u))
        next_obs = env.observe(outcome.next_state)
        if learn:
            agent.store(obs, u, outcome.reward, next_obs, logp)
            info = agent.maybe_update()
            if info is not None:
                stats.append(info)
        rewards.append(outcome.reward)
        obs = next_obs
    return rewards, stats


def train(agent: PpoAgent, env, episodes: int, steps: Optional[int] = None,
          callback: Optional[Callable[[dict], None]] = None) -> list[dict]:
    """Collect rollouts, estimate one-step advantages, update on the clipped surrogate."""
    steps = env.config.episode_length if steps is None else steps
    log = []
    for ep in range(episodes):
        rewards, stats = run_episode(agent, env, steps)
        rec = {
            "episode": ep,
            "mean_reward": float(np.mean(rewards)),
            "surrogate": float(np.mean([s["surrogate"] for s in stats])) if stats else float("nan"),
            "value_loss": float(np.mean([s["value_loss"] for s in stats])) if stats else float("nan"),
        }
        log.append(rec)
        if callback is not None:
            callback(rec)
    return log


def evaluate(agent: PpoAgent, env, episodes: int = 1, steps: Optional[int] = None) -> float:
    """Mean per-step reward when acting with the policy mean."""
    steps = env.config.episode_length if steps is None else steps
    return float(np.mean([np.mean(run_episode(agent, env, steps, explore=False, learn=False)[0])
                          for _ in range(episodes)]))
