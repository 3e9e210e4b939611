"""Experiment matrix execution, result files and summaries.

Result files are UTF-8 CSV. They open with ``#`` comment lines recording the
format version, the scheme list and every configuration value, followed by
the columns::

    scheme,n_devices,k_elements,seed,episode,mean_reward,wall_time

``mean_reward`` is the per-step sum-rate averaged over the episode and
divided by the bandwidth (bits/s/Hz). ``wall_time`` is seconds since the
cell started and is the only non-deterministic column.
"""
from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import numpy as np

from . import ddpg, ppo
from .baselines import PartialControlEnv, SchemeId, grid_oracle, without_ris_env
from .config import DEFAULTS, ddpg_config, format_value, network_config, ppo_config
from .env import RisUavEnv
from .errors import ConfigError, EmptyInputError

RESULT_VERSION = 1
COLUMNS = ["scheme", "n_devices", "k_elements", "seed", "episode", "mean_reward", "wall_time"]
SUMMARY_COLUMNS = ["scheme", "n_devices", "k_elements", "mean", "std", "n_seeds", "tail_episodes"]


@dataclass
class ExperimentSpec:
    schemes: Sequence[SchemeId]
    n_values: Sequence[int]
    k_values: Sequence[int]
    seeds: Sequence[int]
    episodes: int
    steps: int
    out: Path
    config: dict[str, Any] = field(default_factory=lambda: dict(DEFAULTS))
    jobs: int = 1

    def __post_init__(self):
        self.schemes = [SchemeId(s) for s in self.schemes]
        if not self.schemes:
            raise ConfigError("at least one scheme is required")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if any(v < 1 for v in (*self.n_values, *self.k_values)) or not self.n_values or not self.k_values:
            raise ConfigError("N and K sweep values must be positive")
        if self.episodes < 1 or self.steps < 1:
            raise ConfigError("episodes and steps must be >= 1")
        self.out = Path(self.out)

    def cells(self) -> list[tuple[SchemeId, int, int, int]]:
        return [
            (s, n, k, seed)
            for s in self.schemes
            for n in self.n_values
            for k in self.k_values
            for seed in self.seeds
        ]


def make_env(scheme: SchemeId, cfg: dict[str, Any], n: int, k: int, seed: int):
    """Environment as seen by the scheme's agent (wrapped for RSS/REH)."""
    net = network_config(cfg, n, k, scheme.mobile)
    env = RisUavEnv(net, seed) if scheme.uses_ris else without_ris_env(net, seed)
    if scheme.randomized is not None:
        env = PartialControlEnv(env, scheme.randomized, seed, per_episode=cfg["rss_per_episode"])
    return env


def make_agent(scheme: SchemeId, cfg: dict[str, Any], env, seed: int):
    if scheme.algorithm == "ddpg":
        return ddpg.DdpgAgent(env.obs_dim, env.action_dim, env.squash_mask, ddpg_config(cfg), seed=seed)
    if scheme.algorithm == "ppo":
        return ppo.PpoAgent(env.obs_dim, env.action_dim, env.squash_mask, ppo_config(cfg), seed=seed)
    raise ConfigError(f"scheme {scheme} has no learning agent")


def _oracle_rewards(env: RisUavEnv, cfg: dict[str, Any], episodes: int, steps: int) -> list[float]:
    """Per-episode mean reward of the grid oracle acting on every fresh realization."""
    out = []
    for _ in range(episodes):
        state = env.reset()
        rewards = []
        for _ in range(steps):
            channels = env.sample_channels(state.uav_position)
            _, r = grid_oracle(env, channels, cfg["oracle_tau_grid"], cfg["oracle_phase_grid"])
            rewards.append(r)
        out.append(float(np.mean(rewards)))
    return out


def run_cell(scheme: SchemeId, cfg: dict[str, Any], n: int, k: int, seed: int,
             episodes: int, steps: int) -> list[tuple]:
    """Train one (scheme, N, K, seed) cell; one row per episode."""
    start = time.perf_counter()
    env = make_env(scheme, cfg, n, k, seed)
    bandwidth = env.config.bandwidth
    rows = []

    def record(ep: int, reward: float) -> None:
        rows.append((str(scheme), n, k, seed, ep, reward / bandwidth, time.perf_counter() - start))

    if scheme.algorithm == "oracle":
        for ep, r in enumerate(_oracle_rewards(env, cfg, episodes, steps)):
            record(ep, r)
        return rows
    agent = make_agent(scheme, cfg, env, seed)
    trainer = ddpg.train if scheme.algorithm == "ddpg" else ppo.train
    trainer(agent, env, episodes, steps, callback=lambda rec: record(rec["episode"], rec["mean_reward"]))
    return rows


def _run_cell_args(args):
    return run_cell(*args)


def format_row(row: tuple) -> str:
    scheme, n, k, seed, ep, reward, wall = row
    return f"{scheme},{n},{k},{seed},{ep},{reward!r},{wall:.3f}\n"


def result_header(spec: ExperimentSpec) -> str:
    lines = [f"# risuav results v{RESULT_VERSION}\n", f"# schemes={'|'.join(map(str, spec.schemes))}\n"]
    lines.append(f"# n_values={','.join(map(str, spec.n_values))}\n")
    lines.append(f"# k_values={','.join(map(str, spec.k_values))}\n")
    lines.append(f"# seeds={','.join(map(str, spec.seeds))}\n")
    lines.append(f"# episodes={spec.episodes}\n# steps={spec.steps}\n")
    lines += [f"# {k}={format_value(spec.config[k])}\n" for k in DEFAULTS]
    lines.append(",".join(COLUMNS) + "\n")
    return "".join(lines)


def run(spec: ExperimentSpec, progress=None) -> Path:
    """Execute every cell of the matrix and write the result file.

    Cells run concurrently when ``spec.jobs > 1``; rows are always written
    in cell order, so the file content only depends on the spec.
    """
    cfg = dict(spec.config)
    cfg["steps"] = spec.steps
    cells = spec.cells()
    args = [(s, cfg, n, k, seed, spec.episodes, spec.steps) for s, n, k, seed in cells]
    spec.out.parent.mkdir(parents=True, exist_ok=True)
    with open(spec.out, "w", encoding="utf-8", newline="") as fh:
        fh.write(result_header(spec))
        if spec.jobs > 1:
            with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
                results = pool.map(_run_cell_args, args)
                for cell, rows in zip(cells, results):
                    fh.writelines(format_row(r) for r in rows)
                    fh.flush()
                    if progress:
                        progress(cell, rows)
        else:
            for cell, a in zip(cells, args):
                rows = run_cell(*a)
                fh.writelines(format_row(r) for r in rows)
                fh.flush()
                if progress:
                    progress(cell, rows)
    return spec.out


def read_results(paths: Iterable[str | Path]) -> list[dict[str, Any]]:
    records = []
    for path in paths:
        with open(path, encoding="utf-8") as fh:
            lines = [ln for ln in fh if not ln.startswith("#")]
        for row in csv.DictReader(io.StringIO("".join(lines))):
            records.append({
                "scheme": row["scheme"],
                "n_devices": int(row["n_devices"]),
                "k_elements": int(row["k_elements"]),
                "seed": int(row["seed"]),
                "episode": int(row["episode"]),
                "mean_reward": float(row["mean_reward"]),
                "wall_time": float(row["wall_time"]),
            })
    return records


def tail_means(records: list[dict[str, Any]], tail_fraction: float = 0.2) -> dict[tuple, dict[int, float]]:
    """Per (scheme, N, K): seed -> mean reward over the final ``tail_fraction`` of episodes."""
    series: dict[tuple, dict[int, list[tuple[int, float]]]] = {}
    for r in records:
        key = (r["scheme"], r["n_devices"], r["k_elements"])
        series.setdefault(key, {}).setdefault(r["seed"], []).append((r["episode"], r["mean_reward"]))
    out = {}
    for key, by_seed in series.items():
        out[key] = {}
        for seed, pts in by_seed.items():
            pts.sort()
            n_tail = max(1, math.ceil(tail_fraction * len(pts)))
            out[key][seed] = float(np.mean([v for _, v in pts[-n_tail:]]))
    return out


@dataclass
class SummaryRow:
    scheme: str
    n_devices: int
    k_elements: int
    mean: float
    std: float
    n_seeds: int
    tail_episodes: int


def summarize_records(records: list[dict[str, Any]], tail_fraction: float = 0.2) -> list[SummaryRow]:
    if not records:
        raise EmptyInputError("no result records to summarize")
    episodes: dict[tuple, set] = {}
    for r in records:
        episodes.setdefault((r["scheme"], r["n_devices"], r["k_elements"]), set()).add(r["episode"])
    rows = []
    for key, by_seed in sorted(tail_means(records, tail_fraction).items()):
        vals = np.array(list(by_seed.values()))
        n_tail = max(1, math.ceil(tail_fraction * len(episodes[key])))
        rows.append(SummaryRow(*key, float(vals.mean()), float(vals.std()), len(vals), n_tail))
    return rows


def write_summary(rows: list[SummaryRow], path: Path) -> Path:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(SUMMARY_COLUMNS) + "\n")
        for r in rows:
            fh.write(f"{r.scheme},{r.n_devices},{r.k_elements},{r.mean!r},{r.std!r},{r.n_seeds},{r.tail_episodes}\n")
    return path


def summarize(paths: Sequence[str | Path], out_dir: Optional[str | Path] = None,
              tail_fraction: float = 0.2, figures: bool = True, fmt: str = "svg") -> tuple[list[SummaryRow], list[Path]]:
    """Aggregate result files; optionally write summary CSV, series CSVs and figures."""
    if not paths:
        raise EmptyInputError("no result files given")
    records = read_results(paths)
    rows = summarize_records(records, tail_fraction)
    written: list[Path] = []
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        written.append(write_summary(rows, out_dir / "summary.csv"))
        written += write_series(records, out_dir)
        if figures:
            from .plotting import plot_learning_curves, plot_sweeps

            written += plot_sweeps(rows, out_dir, fmt)
            written += plot_learning_curves(records, out_dir, fmt)
    return rows, written


def learning_curves(records: list[dict[str, Any]]) -> dict[tuple, tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Per (scheme, N, K): episodes, mean and std over seeds of the episode reward."""
    acc: dict[tuple, dict[int, list[float]]] = {}
    for r in records:
        acc.setdefault((r["scheme"], r["n_devices"], r["k_elements"]), {}).setdefault(r["episode"], []).append(
            r["mean_reward"]
        )
    out = {}
    for key, by_ep in acc.items():
        eps = np.array(sorted(by_ep))
        vals = [by_ep[e] for e in eps]
        out[key] = (eps, np.array([np.mean(v) for v in vals]), np.array([np.std(v) for v in vals]))
    return out


def write_series(records: list[dict[str, Any]], out_dir: Path) -> list[Path]:
    path = out_dir / "learning_curves.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("scheme,n_devices,k_elements,episode,mean,std\n")
        for (scheme, n, k), (eps, mu, sd) in sorted(learning_curves(records).items()):
            for e, m, s in zip(eps, mu, sd):
                fh.write(f"{scheme},{n},{k},{e},{m!r},{s!r}\n")
    return [path]
