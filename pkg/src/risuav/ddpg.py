"""Deep deterministic policy gradient trainer.

The actor maps observations to a pre-mapping action vector (see
:mod:`risuav.env`); squashed entries go through a sigmoid, angle entries
stay linear. The critic never sees raw angle entries: each one is encoded
as ``(cos 2*pi*u, sin 2*pi*u)`` so Q is periodic in the phases and the
wrap-around at ``2*pi`` is invisible to it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import EmptyBatchError, ShapeMismatchError
from .nn import DenseNet, apply_gradients, make_optimizer


@dataclass
class Batch:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray

    def __len__(self) -> int:
        return self.rewards.shape[0]


class ReplayBuffer:
    """Fixed-capacity ring buffer; the oldest transition is overwritten first."""

    def __init__(self, capacity: int, obs_dim: int, action_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.states = np.zeros((capacity, obs_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, obs_dim))
        self._next = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def add(self, s, a, r: float, s2) -> None:
        i = self._next
        self.states[i] = s
        self.actions[i] = a
        self.rewards[i] = r
        self.next_states[i] = s2
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, rng: np.random.Generator, batch_size: int) -> Batch:
        if self.size == 0:
            raise EmptyBatchError("cannot sample from an empty buffer")
        idx = rng.integers(0, self.size, batch_size)
        return Batch(self.states[idx], self.actions[idx], self.rewards[idx], self.next_states[idx])


class ActionEncoder:
    """Encodes angle entries as (cos, sin) pairs for the critic input."""

    def __init__(self, angle_mask):
        self.angle_mask = np.asarray(angle_mask, bool)
        self.linear_mask = ~self.angle_mask
        self.n_linear = int(self.linear_mask.sum())
        self.n_angle = int(self.angle_mask.sum())

    @property
    def size(self) -> int:
        return self.n_linear + 2 * self.n_angle

    def encode(self, u: np.ndarray) -> np.ndarray:
        ang = 2.0 * math.pi * u[:, self.angle_mask]
        return np.concatenate([u[:, self.linear_mask], np.cos(ang), np.sin(ang)], axis=1)

    def backward(self, u: np.ndarray, grad_enc: np.ndarray) -> np.ndarray:
        ang = 2.0 * math.pi * u[:, self.angle_mask]
        gu = np.zeros_like(u)
        gu[:, self.linear_mask] = grad_enc[:, : self.n_linear]
        gc = grad_enc[:, self.n_linear : self.n_linear + self.n_angle]
        gs = grad_enc[:, self.n_linear + self.n_angle :]
        gu[:, self.angle_mask] = 2.0 * math.pi * (-np.sin(ang) * gc + np.cos(ang) * gs)
        return gu


@dataclass
class DdpgConfig:
    hidden: tuple[int, ...] = (128, 128)
    hidden_activation: str = "tanh"
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    optimizer: str = "adam"
    discount: float = 0.9
    soft_rate: float = 0.01
    noise_scale: float = 0.1
    noise_decay: float = 0.999
    batch_size: int = 32
    buffer_capacity: int = 100_000
    warmup: int = 1000
    # None: fix the scale from the warm-up transitions as 1 / mean|r|
    reward_scale: Optional[float] = None

    def __post_init__(self):
        if not 0 <= self.discount < 1:
            raise ValueError("discount must lie in [0, 1)")
        if not 0 < self.soft_rate <= 1:
            raise ValueError("soft_rate must lie in (0, 1]")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


class DdpgAgent:
    def __init__(self, obs_dim: int, action_dim: int, squash_mask, config: DdpgConfig = None, seed: int = 0):
        self.config = config if config is not None else DdpgConfig()
        cfg = self.config
        squash_mask = np.asarray(squash_mask, bool)
        if squash_mask.shape != (action_dim,):
            raise ShapeMismatchError("squash_mask length differs from action_dim")
        self.obs_dim, self.action_dim = obs_dim, action_dim
        init_rng, self.rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
        self.encoder = ActionEncoder(~squash_mask)
        self.actor = DenseNet(
            [obs_dim, *cfg.hidden, action_dim],
            cfg.hidden_activation,
            "sigmoid",
            squash_mask,
            rng=init_rng,
            final_init_scale=3e-3,
        )
        self.critic = DenseNet(
            [obs_dim + self.encoder.size, *cfg.hidden, 1],
            cfg.hidden_activation,
            rng=init_rng,
            final_init_scale=3e-3,
        )
        self.target_actor = self.actor.copy()
        self.target_critic = self.critic.copy()
        self.actor_opt = make_optimizer(cfg.optimizer, cfg.actor_lr)
        self.critic_opt = make_optimizer(cfg.optimizer, cfg.critic_lr)
        self.buffer = ReplayBuffer(cfg.buffer_capacity, obs_dim, action_dim)
        self.noise_scale = cfg.noise_scale
        self.reward_scale = cfg.reward_scale
        self.updates = 0

    # -- acting ---------------------------------------------------------

    def select_action(self, obs, explore: bool = True, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        """Actor output plus ``noise_scale * N(0, 1)`` per entry when exploring (pre-mapping)."""
        u = self.actor.forward(obs)
        if explore and self.noise_scale > 0:
            rng = rng if rng is not None else self.rng
            u = u + self.noise_scale * rng.standard_normal(u.shape)
        return u

    # -- learning -------------------------------------------------------

    def q_values(self, net: DenseNet, states, actions) -> np.ndarray:
        return net.forward(np.concatenate([states, self.encoder.encode(actions)], axis=1))[:, 0]

    def scaled_rewards(self, rewards: np.ndarray) -> np.ndarray:
        return rewards * (1.0 if self.reward_scale is None else self.reward_scale)

    def critic_targets(self, batch: Batch) -> np.ndarray:
        if len(batch) == 0:
            raise EmptyBatchError("empty batch")
        next_actions = self.target_actor.forward(batch.next_states)
        q_next = self.q_values(self.target_critic, batch.next_states, next_actions)
        return self.scaled_rewards(batch.rewards) + self.config.discount * q_next

    def update_critic(self, batch: Batch) -> float:
        """One optimizer step on the critic; returns the pre-step mean squared TD error."""
        y = self.critic_targets(batch)
        x = np.concatenate([batch.states, self.encoder.encode(batch.actions)], axis=1)
        q, cache = self.critic.forward_cache(x)
        err = y - q[:, 0]
        loss = float(np.mean(err**2))
        grads, _ = self.critic.backward_cache(cache, (-2.0 / len(batch) * err)[:, None])
        apply_gradients(self.critic, grads, self.critic_opt)
        return loss

    def actor_gradients(self, batch: Batch) -> tuple[list[np.ndarray], float]:
        """Gradients of ``-mean Q(s, mu(s))`` w.r.t. the actor parameters."""
        if len(batch) == 0:
            raise EmptyBatchError("empty batch")
        a, actor_cache = self.actor.forward_cache(batch.states)
        x = np.concatenate([batch.states, self.encoder.encode(a)], axis=1)
        q, critic_cache = self.critic.forward_cache(x)
        upstream = np.full((len(batch), 1), -1.0 / len(batch))
        _, gx = self.critic.backward_cache(critic_cache, upstream)
        ga = self.encoder.backward(a, gx[:, self.obs_dim :])
        grads, _ = self.actor.backward_cache(actor_cache, ga)
        return grads, float(np.mean(q))

    def update_actor(self, batch: Batch) -> float:
        grads, mean_q = self.actor_gradients(batch)
        apply_gradients(self.actor, grads, self.actor_opt)
        return mean_q

    def soft_update(self, rate: Optional[float] = None) -> None:
        rate = self.config.soft_rate if rate is None else rate
        self.target_actor.soft_update_from(self.actor, rate)
        self.target_critic.soft_update_from(self.critic, rate)

    def store(self, s, a, r: float, s2) -> None:
        self.buffer.add(s, a, r, s2)

    @property
    def ready(self) -> bool:
        return len(self.buffer) >= max(self.config.warmup, self.config.batch_size)

    def learn(self) -> Optional[float]:
        """One critic + actor + target update if the buffer is warm, else ``None``."""
        if not self.ready:
            return None
        if self.reward_scale is None:
            mean_abs = float(np.mean(np.abs(self.buffer.rewards[: len(self.buffer)])))
            self.reward_scale = 1.0 / mean_abs if mean_abs > 0 else 1.0
        batch = self.buffer.sample(self.rng, self.config.batch_size)
        loss = self.update_critic(batch)
        self.update_actor(batch)
        self.soft_update()
        self.updates += 1
        return loss


def run_episode(agent: DdpgAgent, env, steps: int, explore: bool = True, learn: bool = True):
    """Roll out one episode; returns (per-step rewards, critic losses)."""
    state = env.reset()
    obs = env.observe(state)
    rewards, losses = [], []
    for _ in range(steps):
        u = agent.select_action(obs, explore=explore)
        outcome = env.step(env.action_from_vector(u))
        next_obs = env.observe(outcome.next_state)
        if learn:
            agent.store(obs, env.vector_from_action(outcome.action), outcome.reward, next_obs)
            loss = agent.learn()
            if loss is not None:
                losses.append(loss)
        rewards.append(outcome.reward)
        obs = next_obs
    return rewards, losses


def train(
    agent: DdpgAgent,
    env,
    episodes: int,
    steps: Optional[int] = None,
    callback: Optional[Callable[[dict], None]] = None,
) -> list[dict]:
    """Act, store, sample, update critic, update actor, soft-update targets; every step."""
    steps = env.config.episode_length if steps is None else steps
    log = []
    for ep in range(episodes):
        rewards, losses = run_episode(agent, env, steps)
        rec = {
            "episode": ep,
            "mean_reward": float(np.mean(rewards)),
            "critic_loss": float(np.mean(losses)) if losses else float("nan"),
            "noise_scale": agent.noise_scale,
        }
        log.append(rec)
        if callback is not None:
            callback(rec)
        agent.noise_scale *= agent.config.noise_decay
    return log


def evaluate(agent: DdpgAgent, env, episodes: int = 1, steps: Optional[int] = None) -> float:
    """Mean per-step reward of the greedy (noise-free) policy."""
    steps = env.config.episode_length if steps is None else steps
    total = [np.mean(run_episode(agent, env, steps, explore=False, learn=False)[0]) for _ in range(episodes)]
    return float(np.mean(total))
