"""Harvest-then-transmit environment for the RIS-assisted UAV network.

Each step is one normalized time slot. During the first ``tau`` fraction the
UAV charges the devices (downlink power transfer); in the remaining
``1 - tau`` every device spends all harvested energy on its uplink to the UAV.
The RIS holds one phase vector for the whole slot and channels are
reciprocal within a slot, so the same composite gain enters both phases.

Two scenarios share the class: a hovering UAV that controls ``(tau, phases)``
and a mobile UAV that additionally controls speed and heading.

Agents work in a *pre-mapping* action space (one float per action entry) and
:meth:`RisUavEnv.action_from_vector` maps it onto the feasible set:

==========  ==================================  ==================
entry       mapping                             squashed by actor
==========  ==================================  ==================
velocity    ``v_max * clip(u, 0, 1)``           yes
heading     ``2*pi*u`` wrapped                  no
tau         ``clip(u, margin, 1 - margin)``     yes
theta_k     ``2*pi*u`` wrapped                  no
==========  ==================================  ==================
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .channel import (
    TWO_PI,
    ChannelSampler,
    ChannelSet,
    PathLossParams,
    RisGeometry,
    Vec3,
    effective_gain,
    wrap_phases,
)
from .errors import (
    ConfigError,
    IndexOutOfRangeError,
    LengthMismatchError,
    TauOutOfRangeError,
    VelocityExceedsMaxError,
)

Bounds = tuple[tuple[float, float], tuple[float, float], tuple[float, float]]


@dataclass(frozen=True)
class NetworkConfig:
    device_count: int = 10
    device_positions: Optional[tuple[Vec3, ...]] = None
    device_region_radius: float = 100.0
    cluster_center: tuple[float, float] = (0.0, 0.0)
    uav_initial: Vec3 = Vec3(0.0, 0.0, 200.0)
    uav_altitude: float = 200.0
    ris: RisGeometry = RisGeometry(Vec3(200.0, 0.0, 50.0), 20, 0.5)
    pathloss: PathLossParams = field(default_factory=PathLossParams)
    tx_power: float = 5.0
    eh_efficiency: float = 0.5
    bandwidth: float = 1e6
    flight_bounds: Bounds = ((-500.0, 500.0), (-500.0, 500.0), (50.0, 300.0))
    v_max: float = 20.0
    motion_noise_std: float = 0.0
    episode_length: int = 100
    mobile: bool = False
    frozen_channels: bool = False
    tau_margin: float = 1e-3

    def __post_init__(self):
        if self.device_count < 1:
            raise ConfigError("device_count must be >= 1")
        if not 0 < self.eh_efficiency <= 1:
            raise ConfigError("eh_efficiency must lie in (0, 1]")
        if not self.v_max > 0:
            raise ConfigError("v_max must be > 0")
        if self.motion_noise_std < 0:
            raise ConfigError("motion_noise_std must be >= 0")
        if self.episode_length < 1:
            raise ConfigError("episode_length must be >= 1")
        if not 0 < self.tau_margin < 0.5:
            raise ConfigError("tau_margin must lie in (0, 0.5)")
        if not inside_bounds(self.uav_initial, self.flight_bounds):
            raise ConfigError(f"uav_initial {self.uav_initial} outside flight bounds")
        if self.device_positions is not None and len(self.device_positions) != self.device_count:
            raise ConfigError("device_positions length differs from device_count")
        if self.mobile and self.frozen_channels:
            raise ConfigError("frozen channels are only defined for the hovering UAV")

    @property
    def element_count(self) -> int:
        return self.ris.element_count

    def with_elements(self, k: int) -> "NetworkConfig":
        return replace(self, ris=replace(self.ris, element_count=k))

    @property
    def hover_point(self) -> Vec3:
        return Vec3(self.cluster_center[0], self.cluster_center[1], self.uav_altitude)


@dataclass(frozen=True)
class Action:
    tau: float
    phases: np.ndarray
    velocity: float = 0.0
    heading: float = 0.0


@dataclass(frozen=True)
class EnvState:
    features: np.ndarray
    uav_position: Vec3
    step_index: int


@dataclass(frozen=True)
class StepOutcome:
    reward: float
    next_state: EnvState
    per_device_sinr: np.ndarray
    per_device_harvested_power: np.ndarray
    action: Action
    constraint_violation: Optional[str] = None


def inside_bounds(p: Vec3, bounds: Bounds) -> bool:
    return all(lo <= c <= hi for c, (lo, hi) in zip((p.x, p.y, p.z), bounds))


def _check_tau(tau: float) -> None:
    if not 0.0 < tau < 1.0:
        raise TauOutOfRangeError(f"tau must lie in (0, 1), got {tau}")


def harvested_power(tau: float, config: NetworkConfig, gain):
    """Energy harvested during the downlink slot, spent as uplink power."""
    _check_tau(tau)
    return tau * config.eh_efficiency * config.tx_power * np.abs(gain) ** 2


def sinr_all(powers, gains, noise_power: float) -> np.ndarray:
    rx = np.asarray(powers, dtype=float) * np.abs(np.asarray(gains)) ** 2
    return rx / (rx.sum() - rx + noise_power)


def sinr(n: int, powers: Sequence[float], gains: Sequence[complex], noise_power: float) -> float:
    """Uplink SINR of device ``n`` with every other device as interference."""
    powers = np.asarray(powers, dtype=float)
    gains = np.asarray(gains)
    if len(powers) != len(gains):
        raise LengthMismatchError("powers and gains differ in length")
    if not 0 <= n < len(powers):
        raise IndexOutOfRangeError(f"device index {n} out of range for N={len(powers)}")
    rx = powers * np.abs(gains) ** 2
    interference = float(np.sum(np.delete(rx, n)))
    return float(rx[n] / (interference + noise_power))


def log2_1p(x):
    """``log2(1 + x)`` accurate for the tiny SINRs of far-field power transfer."""
    return np.log1p(x) / math.log(2.0)


def sum_rate(tau: float, sinrs, bandwidth: float = 1.0) -> float:
    _check_tau(tau)
    return float(np.sum((1.0 - tau) * bandwidth * log2_1p(np.asarray(sinrs, dtype=float))))


def clamp_to_bounds(p: np.ndarray, bounds: Bounds) -> np.ndarray:
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    return np.minimum(np.maximum(p, lo), hi)


def apply_motion(
    uav: Vec3, velocity: float, heading: float, rng: np.random.Generator, config: NetworkConfig
) -> Vec3:
    """Move the UAV one step; altitude changes only through environmental noise."""
    if velocity > config.v_max or velocity < 0:
        raise VelocityExceedsMaxError(f"velocity {velocity} outside [0, {config.v_max}]")
    # always draw so the noise stream stays aligned whatever the std is
    noise = rng.normal(0.0, 1.0, 3) * config.motion_noise_std
    p = uav.as_array() + np.array(
        [velocity * math.cos(heading), velocity * math.sin(heading), 0.0]
    ) + noise
    return Vec3.from_array(clamp_to_bounds(p, config.flight_bounds))


def build_state(channels: ChannelSet, phases, uav: Vec3, step: int) -> EnvState:
    gains = effective_gain(channels.direct, channels.uav_ris, phases, channels.ris_iot)
    features = np.empty(2 * gains.shape[0])
    features[0::2] = gains.real
    features[1::2] = gains.imag
    return EnvState(features=features, uav_position=uav, step_index=step)


def place_devices(rng: np.random.Generator, config: NetworkConfig) -> tuple[Vec3, ...]:
    """Uniform positions in a disc around the cluster centre, on the ground."""
    n = config.device_count
    r = config.device_region_radius * np.sqrt(rng.uniform(0.0, 1.0, n))
    phi = rng.uniform(0.0, TWO_PI, n)
    cx, cy = config.cluster_center
    return tuple(Vec3(cx + ri * math.cos(p), cy + ri * math.sin(p), 0.0) for ri, p in zip(r, phi))


class RisUavEnv:
    """Episodic environment; owns its random streams.

    ``seed`` fixes the device placement (when not given explicitly) and every
    fading and motion draw, so trajectories are reproducible functions of
    ``(config, seed, actions)``.
    """

    def __init__(self, config: NetworkConfig, seed: int = 0):
        self.config = config
        self.seed = seed
        placement, direct, ris, motion = (
            np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(4)
        )
        self.devices = (
            tuple(config.device_positions)
            if config.device_positions is not None
            else place_devices(placement, config)
        )
        self.motion_rng = motion
        self.sampler = ChannelSampler(self.devices, config.ris, config.pathloss, direct, ris)
        self._frozen: Optional[ChannelSet] = (
            self._postprocess(self.sampler.sample(config.hover_point)) if config.frozen_channels else None
        )
        self.state: Optional[EnvState] = None
        self.channels: Optional[ChannelSet] = None
        pl = config.pathloss
        self.feature_scale = math.sqrt(pl.beta0 * config.uav_altitude ** (-pl.kappa1))

    # -- action space ---------------------------------------------------

    @property
    def n_devices(self) -> int:
        return len(self.devices)

    @property
    def n_elements(self) -> int:
        return self.config.element_count

    @property
    def action_names(self) -> list[str]:
        head = ["velocity", "heading", "tau"] if self.config.mobile else ["tau"]
        return head + [f"theta_{k + 1}" for k in range(self.n_elements)]

    @property
    def action_dim(self) -> int:
        return len(self.action_names)

    @property
    def squash_mask(self) -> np.ndarray:
        """True for entries the actor should squash into [0, 1]; False for angles."""
        return np.array([n in ("velocity", "tau") for n in self.action_names])

    @property
    def obs_dim(self) -> int:
        return 2 * self.n_devices + (2 if self.config.mobile else 0)

    def action_from_vector(self, u) -> Action:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.action_dim,):
            raise LengthMismatchError(f"expected action vector of length {self.action_dim}")
        m = self.config.tau_margin
        if self.config.mobile:
            velocity = self.config.v_max * float(np.clip(u[0], 0.0, 1.0))
            heading = float(wrap_phases(TWO_PI * u[1]))
            tau_u, theta_u = u[2], u[3:]
        else:
            velocity, heading = 0.0, 0.0
            tau_u, theta_u = u[0], u[1:]
        return Action(
            tau=float(np.clip(tau_u, m, 1.0 - m)),
            phases=wrap_phases(TWO_PI * theta_u),
            velocity=velocity,
            heading=heading,
        )

    def vector_from_action(self, action: Action) -> np.ndarray:
        theta_u = np.asarray(action.phases, dtype=float) / TWO_PI
        if self.config.mobile:
            head = [action.velocity / self.config.v_max, action.heading / TWO_PI, action.tau]
        else:
            head = [action.tau]
        return np.concatenate([head, theta_u])

    def observe(self, state: EnvState) -> np.ndarray:
        """Normalized observation vector fed to the agents."""
        obs = state.features / self.feature_scale
        if not self.config.mobile:
            return obs
        (xlo, xhi), (ylo, yhi), _ = self.config.flight_bounds
        p = state.uav_position
        pos = [2.0 * (p.x - xlo) / (xhi - xlo) - 1.0, 2.0 * (p.y - ylo) / (yhi - ylo) - 1.0]
        return np.concatenate([obs, pos])

    # -- dynamics -------------------------------------------------------

    def _postprocess(self, channels: ChannelSet) -> ChannelSet:
        """Hook for scheme variants that alter the sampled channels."""
        return channels

    def sample_channels(self, uav: Vec3) -> ChannelSet:
        if self._frozen is not None:
            return self._frozen
        return self._postprocess(self.sampler.sample(uav))

    def evaluate(self, channels: ChannelSet, tau: float, phases) -> tuple[float, np.ndarray, np.ndarray]:
        """Reward, per-device SINR and harvested power for one slot."""
        gains = effective_gain(channels.direct, channels.uav_ris, phases, channels.ris_iot)
        powers = harvested_power(tau, self.config, gains)
        sinrs = sinr_all(powers, gains, self.config.pathloss.noise_power)
        return sum_rate(tau, sinrs, self.config.bandwidth), sinrs, powers

    def reset(self) -> EnvState:
        pos = self.config.uav_initial if self.config.mobile else self.config.hover_point
        self.channels = self.sample_channels(pos)
        self.state = build_state(self.channels, np.zeros(self.n_elements), pos, 0)
        return self.state

    def _repair(self, action: Action) -> tuple[Action, Optional[str]]:
        """Project an infeasible action onto the feasible set and name what was violated."""
        violations = []
        tau = action.tau
        m = self.config.tau_margin
        if not (0.0 < tau < 1.0) or not math.isfinite(tau):
            violations.append("tau_out_of_range")
            tau = float(np.clip(np.nan_to_num(tau, nan=0.5), m, 1.0 - m))
        phases = np.asarray(action.phases, dtype=float)
        if phases.shape != (self.n_elements,):
            raise LengthMismatchError(f"expected {self.n_elements} phases, got {phases.shape}")
        if not np.all(np.isfinite(phases)):
            violations.append("phase_not_finite")
            phases = np.nan_to_num(phases, nan=0.0, posinf=0.0, neginf=0.0)
        if np.any((phases < 0) | (phases > TWO_PI)):
            violations.append("phase_out_of_range")
        phases = wrap_phases(phases)
        velocity = action.velocity
        if self.config.mobile and not 0.0 <= velocity <= self.config.v_max:
            violations.append("velocity_exceeds_max")
            velocity = float(np.clip(velocity, 0.0, self.config.v_max))
        repaired = Action(tau=tau, phases=phases, velocity=velocity, heading=float(wrap_phases(action.heading)))
        return repaired, (",".join(violations) or None)

    def step(self, action: Action) -> StepOutcome:
        if self.state is None:
            raise RuntimeError("call reset() before step()")
        action, violation = self._repair(action)
        pos = self.state.uav_position
        if self.config.mobile:
            pos = apply_motion(pos, action.velocity, action.heading, self.motion_rng, self.config)
        self.channels = self.sample_channels(pos)
        reward, sinrs, powers = self.evaluate(self.channels, action.tau, action.phases)
        self.state = build_state(self.channels, action.phases, pos, self.state.step_index + 1)
        return StepOutcome(
            reward=reward,
            next_state=self.state,
            per_device_sinr=sinrs,
            per_device_harvested_power=powers,
            action=action,
            constraint_violation=violation,
        )

    @property
    def done(self) -> bool:
        return self.state is not None and self.state.step_index >= self.config.episode_length
