"""Reference schemes and the brute-force grid oracle."""
from __future__ import annotations

import enum
import itertools
from typing import Optional

import numpy as np

from .channel import TWO_PI, ChannelSet, effective_gain, wrap_phases
from .env import Action, NetworkConfig, RisUavEnv, log2_1p
from .errors import IntractableGridError, LengthMismatchError

TAU_MARGIN = 1e-3
GRID_BUDGET = 10**7


class SchemeId(str, enum.Enum):
    H_DDPG = "H-DDPG"
    H_PPO = "H-PPO"
    F_DDPG = "F-DDPG"
    F_PPO = "F-PPO"
    RSS_HDDPG = "RSS-HDDPG"
    REH_DDPG = "REH-DDPG"
    REH_PPO = "REH-PPO"
    WITHOUT_RIS_HDDPG = "WithoutRIS-HDDPG"
    WITHOUT_RIS_HPPO = "WithoutRIS-HPPO"
    ORACLE_GRID = "ORACLE-GRID"

    def __str__(self) -> str:
        return self.value

    @property
    def algorithm(self) -> str:
        if self is SchemeId.ORACLE_GRID:
            return "oracle"
        return "ppo" if "PPO" in self.value else "ddpg"

    @property
    def mobile(self) -> bool:
        return self in (SchemeId.F_DDPG, SchemeId.F_PPO, SchemeId.REH_DDPG, SchemeId.REH_PPO)

    @property
    def uses_ris(self) -> bool:
        return self not in (SchemeId.WITHOUT_RIS_HDDPG, SchemeId.WITHOUT_RIS_HPPO)

    @property
    def randomized(self) -> Optional[str]:
        """Which action part is drawn at random instead of learned."""
        if self is SchemeId.RSS_HDDPG:
            return "phases"
        if self in (SchemeId.REH_DDPG, SchemeId.REH_PPO):
            return "tau"
        return None


def random_phase_policy(rng: np.random.Generator, k: int) -> np.ndarray:
    if k < 1:
        raise ValueError("K must be >= 1")
    return rng.uniform(0.0, TWO_PI, k)


def random_tau_policy(rng: np.random.Generator) -> float:
    return float(np.clip(rng.uniform(0.0, 1.0), TAU_MARGIN, 1.0 - TAU_MARGIN))


class WithoutRisEnv(RisUavEnv):
    """Same network with the RIS removed: only the direct link carries signal."""

    def _postprocess(self, channels: ChannelSet) -> ChannelSet:
        return ChannelSet(channels.direct, np.zeros_like(channels.uav_ris), channels.ris_iot)


def without_ris_env(config: NetworkConfig, seed: int = 0) -> WithoutRisEnv:
    return WithoutRisEnv(config, seed)


class PartialControlEnv:
    """Wraps an environment so that part of the action is random, not learned.

    ``randomize="phases"`` gives the RSS scheme (agent controls only tau and,
    when mobile, the motion); ``randomize="tau"`` gives the REH scheme. The
    random part is redrawn every step, or once per episode with
    ``per_episode=True``.
    """

    def __init__(self, env: RisUavEnv, randomize: str, seed: int = 0, per_episode: bool = False):
        if randomize not in ("phases", "tau"):
            raise ValueError(f"cannot randomize {randomize!r}")
        self.env = env
        self.randomize = randomize
        self.per_episode = per_episode
        self.rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(5)[4])
        names = env.action_names
        if randomize == "tau":
            self._keep = np.array([n != "tau" for n in names])
        else:
            self._keep = np.array([not n.startswith("theta_") for n in names])
        self._episode_draw: Optional[np.ndarray] = None

    def __getattr__(self, name):
        return getattr(self.env, name)

    @property
    def action_names(self) -> list[str]:
        return [n for n, k in zip(self.env.action_names, self._keep) if k]

    @property
    def action_dim(self) -> int:
        return int(self._keep.sum())

    @property
    def squash_mask(self) -> np.ndarray:
        return self.env.squash_mask[self._keep]

    def _draw(self) -> np.ndarray:
        if self.randomize == "tau":
            return np.array([random_tau_policy(self.rng)])
        return random_phase_policy(self.rng, self.env.n_elements) / TWO_PI

    def reset(self):
        self._episode_draw = self._draw() if self.per_episode else None
        return self.env.reset()

    def action_from_vector(self, u) -> Action:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.action_dim,):
            raise LengthMismatchError(f"expected action vector of length {self.action_dim}")
        full = np.empty(self.env.action_dim)
        full[self._keep] = u
        full[~self._keep] = self._episode_draw if self._episode_draw is not None else self._draw()
        return self.env.action_from_vector(full)

    def vector_from_action(self, action: Action) -> np.ndarray:
        return self.env.vector_from_action(action)[self._keep]

    def step(self, action: Action):
        return self.env.step(action)


def phase_grid_size_for(k: int, tau_grid_size: int, preferred: int = 64) -> int:
    """Largest phase resolution <= ``preferred`` keeping the grid within budget."""
    p = preferred
    while p > 1 and p**k * tau_grid_size > GRID_BUDGET:
        p //= 2
    return p


def tau_grid(size: int) -> np.ndarray:
    """Cell-centred grid on (0, 1)."""
    return (np.arange(size) + 0.5) / size


def grid_oracle(
    env: RisUavEnv,
    channels: Optional[ChannelSet] = None,
    tau_grid_size: int = 100,
    phase_grid_size: Optional[int] = None,
    chunk: int = 65536,
) -> tuple[Action, float]:
    """Exhaustive search of (tau, phases) on one frozen channel realization.

    Phases take values ``2*pi*i/P``; tau takes the cell centres of a uniform
    grid on (0, 1). Returns the best action and its reward.
    """
    if channels is None:
        channels = env.sample_channels(env.config.hover_point)
    k = channels.element_count
    if phase_grid_size is None:
        phase_grid_size = phase_grid_size_for(k, tau_grid_size)
    if k > 4 or phase_grid_size**k * tau_grid_size > GRID_BUDGET:
        raise IntractableGridError(
            f"grid of {phase_grid_size}^{k} phases x {tau_grid_size} tau exceeds the budget"
        )
    cfg = env.config
    taus = tau_grid(tau_grid_size)
    levels = TWO_PI * np.arange(phase_grid_size) / phase_grid_size
    cascade = channels.uav_ris[None, :] * channels.ris_iot  # (N, K)
    best = (-np.inf, None, None)
    combos = itertools.product(range(phase_grid_size), repeat=k)
    while True:
        block = np.array(list(itertools.islice(combos, chunk)), dtype=int)
        if block.size == 0:
            break
        theta = levels[block]  # (C, K)
        gains = channels.direct[None, :] + np.exp(1j * theta) @ cascade.T  # (C, N)
        g2 = np.abs(gains) ** 2
        for tau in taus:
            p = tau * cfg.eh_efficiency * cfg.tx_power * g2
            rx = p * g2
            s = rx / (rx.sum(axis=1, keepdims=True) - rx + cfg.pathloss.noise_power)
            rate = (1.0 - tau) * cfg.bandwidth * log2_1p(s).sum(axis=1)
            i = int(np.argmax(rate))
            if rate[i] > best[0]:
                best = (float(rate[i]), float(tau), theta[i].copy())
    reward, tau, phases = best
    return Action(tau=tau, phases=wrap_phases(phases)), reward


def fine_tau_scan(env: RisUavEnv, channels: ChannelSet, phases, points: int = 100_001) -> float:
    """Maximizer of the reward over a dense tau scan at fixed phases."""
    cfg = env.config
    g2 = np.abs(effective_gain(channels.direct, channels.uav_ris, phases, channels.ris_iot)) ** 2
    taus = np.linspace(0.0, 1.0, points)[1:-1]
    p = taus[:, None] * cfg.eh_efficiency * cfg.tx_power * g2[None, :]
    rx = p * g2[None, :]
    s = rx / (rx.sum(axis=1, keepdims=True) - rx + cfg.pathloss.noise_power)
    rate = (1.0 - taus) * log2_1p(s).sum(axis=1)
    return float(taus[int(np.argmax(rate))])


def circular_distance(a, b) -> np.ndarray:
    d = np.abs(wrap_phases(np.asarray(a) - np.asarray(b)))
    return np.minimum(d, TWO_PI - d)

