"""Command line entry point: ``risuav run|summarize|oracle-check|grad-check``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .baselines import SchemeId
from .checks import grad_check, oracle_check
from .config import load_config
from .errors import RisUavError
from .runner import ExperimentSpec, run, summarize


def int_list(text: str) -> list[int]:
    """Parse ``"0,1,5-7"`` into ``[0, 1, 5, 6, 7]``."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def scheme_list(text: str) -> list[SchemeId]:
    try:
        return [SchemeId(s.strip()) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        valid = ", ".join(s.value for s in SchemeId)
        raise argparse.ArgumentTypeError(f"{exc}; valid schemes: {valid}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="risuav", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="train schemes over an (N, K, seed) matrix and write a result CSV")
    r.add_argument("--scheme", type=scheme_list, required=True, help="comma separated scheme ids")
    r.add_argument("--n-devices", type=int_list, default=None)
    r.add_argument("--k-elements", type=int_list, default=None)
    r.add_argument("--seeds", type=int_list, default=None)
    r.add_argument("--episodes", type=int, default=None)
    r.add_argument("--steps", type=int, default=None)
    r.add_argument("--config", default=None, help="flat key = value config file")
    r.add_argument("--out", required=True, help="result CSV path")
    r.add_argument("--jobs", type=int, default=1, help="cells to run in parallel")
    r.add_argument("--quiet", action="store_true")

    s = sub.add_parser("summarize", help="aggregate result files into a table, series CSVs and figures")
    s.add_argument("files", nargs="+")
    s.add_argument("--out", default=None, help="directory for summary.csv and figures")
    s.add_argument("--tail-fraction", type=float, default=0.2)
    s.add_argument("--no-figures", action="store_true")
    s.add_argument("--format", default="svg", choices=("svg", "png", "pdf"))

    o = sub.add_parser("oracle-check", help="grid oracle versus analytic phase alignment and tau scan")
    o.add_argument("--k-elements", type=int_list, default=[1, 2, 3])
    o.add_argument("--instances", type=int, default=50)
    o.add_argument("--seeds", type=int, default=0, help="first instance seed")
    o.add_argument("--config", default=None)

    g = sub.add_parser("grad-check", help="backprop versus central finite differences")
    g.add_argument("--seeds", type=int, default=20)
    g.add_argument("--tolerance", type=float, default=1e-4)
    return p


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    spec = ExperimentSpec(
        schemes=args.scheme,
        n_values=args.n_devices or [cfg["n_devices"]],
        k_values=args.k_elements or [cfg["k_elements"]],
        seeds=args.seeds if args.seeds is not None else list(cfg["seeds"]),
        episodes=args.episodes or cfg["episodes"],
        steps=args.steps or cfg["steps"],
        out=Path(args.out),
        config=cfg,
        jobs=args.jobs,
    )

    def progress(cell, rows):
        if not args.quiet:
            scheme, n, k, seed = cell
            print(f"{scheme} N={n} K={k} seed={seed}: final episode {rows[-1][5]:.6g} bits/s/Hz", file=sys.stderr)

    out = run(spec, progress)
    print(out)
    return 0


def cmd_summarize(args) -> int:
    rows, written = summarize(args.files, args.out, args.tail_fraction, not args.no_figures, args.format)
    print("scheme,n_devices,k_elements,mean,std,n_seeds")
    for r in rows:
        print(f"{r.scheme},{r.n_devices},{r.k_elements},{r.mean:.6g},{r.std:.3g},{r.n_seeds}")
    for path in written:
        print(f"wrote {path}", file=sys.stderr)
    return 0


def cmd_oracle_check(args) -> int:
    from .config import network_config

    cfg = load_config(args.config)
    base = network_config(cfg, 1, 1, mobile=False)
    results = oracle_check(args.k_elements, args.instances, args.seeds, base)
    failed = 0
    for k in args.k_elements:
        sel = [r for r in results if r.k == k]
        bad = [r for r in sel if not r.ok]
        failed += len(bad)
        worst_p = max(r.phase_error_cells for r in sel)
        worst_t = max(r.tau_error_cells for r in sel)
        print(f"K={k}: {len(sel) - len(bad)}/{len(sel)} match; worst phase error {worst_p:.3f} cells, "
              f"worst tau error {worst_t:.3f} cells  [{'PASS' if not bad else 'FAIL'}]")
    return 1 if failed else 0


def cmd_grad_check(args) -> int:
    errs = grad_check(args.seeds)
    worst = max(errs)
    ok = worst < args.tolerance
    print(f"{len(errs)} random networks; worst relative error {worst:.3e}  [{'PASS' if ok else 'FAIL'}]")
    return 0 if ok else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "run": cmd_run,
        "summarize": cmd_summarize,
        "oracle-check": cmd_oracle_check,
        "grad-check": cmd_grad_check,
    }
    try:
        return handlers[args.command](args)
    except RisUavError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
