"""Self-checks exposed on the command line: oracle equivalence and gradient integrity."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .baselines import circular_distance, fine_tau_scan, grid_oracle, phase_grid_size_for
from .channel import TWO_PI, ChannelSet, aligned_phases
from .env import NetworkConfig, RisUavEnv
from .nn import DenseNet, gradient_check


@dataclass
class OracleInstance:
    k: int
    seed: int
    phase_error_cells: float
    tau_error_cells: float
    zero_direct_phase_error_cells: float

    @property
    def ok(self) -> bool:
        return max(self.phase_error_cells, self.tau_error_cells, self.zero_direct_phase_error_cells) <= 1.0


def oracle_instance(k: int, seed: int, base: Optional[NetworkConfig] = None,
                    tau_grid_size: int = 100) -> OracleInstance:
    """Compare the grid oracle with analytic phase alignment and a fine tau scan.

    Errors are reported in grid cells. The second phase comparison removes
    the direct link, where the aligned phases are ``-arg(H_k g_k)`` up to a
    common rotation.
    """
    base = base if base is not None else NetworkConfig()
    cfg = NetworkConfig(**{**base.__dict__, "device_count": 1, "device_positions": None,
                           "frozen_channels": True, "mobile": False}).with_elements(k)
    env = RisUavEnv(cfg, seed)
    ch = env.sample_channels(cfg.hover_point)
    p = phase_grid_size_for(k, tau_grid_size)
    cell = TWO_PI / p

    action, _ = grid_oracle(env, ch, tau_grid_size, p)
    ref = aligned_phases(ch.direct[0], ch.uav_ris, ch.ris_iot[0])
    phase_err = float(np.max(circular_distance(action.phases, ref)) / cell)
    tau_star = fine_tau_scan(env, ch, ref)
    tau_err = abs(action.tau - tau_star) * tau_grid_size

    no_direct = ChannelSet(np.zeros(1, complex), ch.uav_ris, ch.ris_iot)
    action0, _ = grid_oracle(env, no_direct, tau_grid_size, p)
    ref0 = np.mod(-np.angle(ch.uav_ris * ch.ris_iot[0]), TWO_PI)
    # without a direct link only relative phases matter; factor out the best common rotation
    shifts = np.linspace(0.0, TWO_PI, 4096, endpoint=False)
    dev = circular_distance(action0.phases[None, :], ref0[None, :] + shifts[:, None]).max(axis=1)
    phase_err0 = float(dev.min() / cell)
    return OracleInstance(k, seed, phase_err, tau_err, phase_err0)


def oracle_check(k_values=(1, 2, 3), instances: int = 50, seed: int = 0,
                 base: Optional[NetworkConfig] = None) -> list[OracleInstance]:
    return [oracle_instance(k, seed + i, base) for k in k_values for i in range(instances)]


def random_net(seed: int) -> tuple[DenseNet, np.ndarray]:
    """A random 3-layer tanh network with a small input batch."""
    rng = np.random.default_rng(seed)
    sizes = [int(rng.integers(2, 7)) for _ in range(4)]
    out_act = "sigmoid" if seed % 2 else "identity"
    mask = rng.random(sizes[-1]) < 0.5 if out_act == "sigmoid" else None
    net = DenseNet(sizes, "tanh", out_act, mask, rng=rng)
    x = rng.standard_normal((3, sizes[0]))
    return net, x


def grad_check(seeds: int = 20, step: float = 1e-5) -> list[float]:
    """Worst relative backprop error per random network."""
    out = []
    for s in range(seeds):
        net, x = random_net(s)
        out.append(gradient_check(net, x, step=step, rng=np.random.default_rng(1000 + s)))
    return out

