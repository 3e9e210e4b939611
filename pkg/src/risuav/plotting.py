"""Matplotlib figures for summaries: sum-rate sweeps and learning curves."""
from __future__ import annotations

from pathlib import Path
from typing import Any

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
    "lines.markersize": 4,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "risuav",
}
MARKERS = "osD^v<>ph*"


def _new_figure(width: float = 4.0, height: float = 2.8):
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(width, height))
    return fig, ax


def _save(fig, path: Path) -> Path:
    with plt.rc_context(RC):
        fig.tight_layout()
        fig.savefig(path, metadata={"Date": None} if path.suffix == ".svg" else None)
    plt.close(fig)
    return path


def plot_sweeps(rows, out_dir: Path, fmt: str = "svg") -> list[Path]:
    """Sum-rate versus K (one figure per N) and versus N (one figure per K)."""
    written = []
    schemes = sorted({r.scheme for r in rows})
    for axis, fixed in (("k_elements", "n_devices"), ("n_devices", "k_elements")):
        for fixed_val in sorted({getattr(r, fixed) for r in rows}):
            sel = [r for r in rows if getattr(r, fixed) == fixed_val]
            if len({getattr(r, axis) for r in sel}) < 2:
                continue
            with plt.rc_context(RC):
                fig, ax = _new_figure()
                for i, scheme in enumerate(schemes):
                    pts = sorted((getattr(r, axis), r.mean, r.std) for r in sel if r.scheme == scheme)
                    if not pts:
                        continue
                    x, m, s = zip(*pts)
                    ax.errorbar(x, m, yerr=s, marker=MARKERS[i % len(MARKERS)], capsize=2, label=scheme)
                ax.set_xlabel("Number of RIS elements, K" if axis == "k_elements" else "Number of IoT devices, N")
                ax.set_ylabel("Sum-rate (bits/s/Hz)")
                ax.legend(loc="best")
                tag = "K" if axis == "k_elements" else "N"
                other = "N" if tag == "K" else "K"
                written.append(_save(fig, out_dir / f"sumrate_vs_{tag}_{other}{fixed_val}.{fmt}"))
    return written


def plot_learning_curves(records: list[dict[str, Any]], out_dir: Path, fmt: str = "svg", window: int = 10) -> list[Path]:
    from .runner import learning_curves
    import numpy as np

    curves = learning_curves(records)
    written = []
    for n, k in sorted({(key[1], key[2]) for key in curves}):
        with plt.rc_context(RC):
            fig, ax = _new_figure()
            for i, key in enumerate(sorted(kk for kk in curves if kk[1:] == (n, k))):
                eps, mu, _ = curves[key]
                w = min(window, len(mu))
                smooth = np.convolve(mu, np.ones(w) / w, mode="valid")
                ax.plot(eps[w - 1 :], smooth, label=key[0])
            ax.set_xlabel("Episode")
            ax.set_ylabel("Sum-rate (bits/s/Hz)")
            ax.legend(loc="best")
            written.append(_save(fig, out_dir / f"learning_N{n}_K{k}.{fmt}"))
    return written
