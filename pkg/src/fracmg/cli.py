"""Command line interface.

Subcommands: rate-table, lemma-rate, solve-compare run a configured
experiment and write CSV/JSON/plot-data/figures into the output directory;
check runs the seed-pinned property suite.  Exit codes: 0 success, 1
invalid configuration, 2 one or more cases failed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, build_config
from .experiments import run_experiment, write_csv, write_json
from .plotting import emit_plot_data, render_figures
from .properties import run_property_checks

__all__ = ["main"]

_KIND_FOR = {"rate-table": "rate_table", "lemma-rate": "lemma_rate",
             "solve-compare": "solve_compare"}


def _add_experiment_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="INI config file")
    sub.add_argument("--dim", type=int, choices=(1, 2))
    sub.add_argument("--s", type=float, nargs="+", dest="s_values",
                     help="fractional orders in (0,1)")
    sub.add_argument("--beta", type=float, nargs="+", dest="beta_values",
                     help="regularization weights")
    sub.add_argument("--jmin", type=int, dest="j_min")
    sub.add_argument("--jbase", type=int, dest="j_base")
    sub.add_argument("--jmax", type=int, dest="j_max")
    sub.add_argument("--cq", type=float, dest="c_q",
                     help="quadrature spacing constant in m = c_q/ln(1/h)")
    sub.add_argument("--tol", type=float, help="relative CG tolerance")
    sub.add_argument("--max-iter", type=int, dest="max_iter")
    sub.add_argument("--quad-mode", dest="quad_mode",
                     choices=("per_level", "fine_level"))
    sub.add_argument("--target-modes", type=int, nargs="+",
                     dest="target_modes",
                     help="sine mode indices of the analytic target")
    sub.add_argument("--target-csv", dest="target_csv",
                     help="nodal target data file (solve-compare only)")
    sub.add_argument("--out", dest="out_dir", help="output directory")
    sub.add_argument("--seed", type=int)
    sub.add_argument("--workers", type=int)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracmg",
        description="Multigrid-preconditioned solvers and preconditioner "
                    "quality measurements for fractional-PDE constrained "
                    "control problems.")
    subs = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
            ("rate-table", "spectral distance d(H, G) per level (1D)"),
            ("lemma-rate", "decay of the two-level solve-operator gap (1D)"),
            ("solve-compare", "CG vs multigrid-preconditioned CG runs")):
        sub = subs.add_parser(name, help=help_text)
        _add_experiment_flags(sub)
    check = subs.add_parser("check", help="run the property suite")
    check.add_argument("--seed", type=int, default=0)
    return parser


_CONFIG_KEYS = ("dim", "s_values", "beta_values", "j_min", "j_base", "j_max",
                "c_q", "tol", "max_iter", "quad_mode", "target_modes",
                "target_csv", "out_dir", "seed", "workers")


def _run_check(seed: int) -> int:
    results = run_property_checks(seed=seed)
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        print(f"{status} {res.name}: {res.detail}")
    n_fail = sum(not r.passed for r in results)
    print(f"{len(results) - n_fail}/{len(results)} checks passed")
    return 0 if n_fail == 0 else 2


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "check":
        return _run_check(args.seed)

    kind = _KIND_FOR[args.command]
    cli_values = {k: getattr(args, k) for k in _CONFIG_KEYS}
    try:
        cfg = build_config(kind, file_path=args.config, cli_values=cli_values)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1

    record = run_experiment(cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = write_csv(record, out / f"{cfg.kind}.csv")
    json_path = write_json(record, out / f"{cfg.kind}.json")
    paths = [csv_path, json_path]
    paths += emit_plot_data(record, out)
    paths += render_figures(record, out)

    for case in record.cases:
        label = ", ".join(f"{k}={v}" for k, v in case.params.items())
        if case.status == "ok":
            print(f"ok     {label} ({len(case.rows)} rows, "
                  f"setup {case.setup_time_s:.2f}s)")
        else:
            print(f"failed {label}: {case.error}")
    print(f"wrote {len(paths)} files to {out}")
    return 2 if record.failed else 0


if __name__ == "__main__":
    sys.exit(main())
