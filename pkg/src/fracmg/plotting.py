"""Plot-data emission and figure rendering for experiment records.

Every report run gets whitespace-delimited .dat files (one per case,
"NA" for missing values) plus rendered PNG figures in the same output
directory, so results can be re-plotted externally or inspected directly.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .experiments import NA, RunRecord

__all__ = ["emit_plot_data", "render_figures"]


def _slug(params: dict) -> str:
    return "_".join(f"{k}{v:g}" if isinstance(v, float) else f"{k}{v}"
                    for k, v in params.items())


def _fmt(value) -> str:
    if value is None:
        return NA
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def _write_dat(path: Path, header: list[str], rows: list[list]) -> Path:
    with open(path, "w") as fh:
        fh.write("# " + " ".join(header) + "\n")
        for row in rows:
            fh.write(" ".join(_fmt(v) for v in row) + "\n")
    return path


def emit_plot_data(record: RunRecord, out_dir: str | Path) -> list[Path]:
    """Write per-case .dat files keyed on mesh size."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for case in record.cases:
        if not case.rows:
            continue
        slug = _slug(case.params)
        if record.kind == "solve_compare":
            written.append(_write_dat(
                out / f"{slug}_iters.dat", ["h", "cg_iters", "mgcg_iters"],
                [[r["h"], r["cg_iters"], r["mgcg_iters"]] for r in case.rows]))
            written.append(_write_dat(
                out / f"{slug}_times.dat", ["h", "cg_time_s", "mgcg_time_s"],
                [[r["h"], r["cg_time_s"], r["mgcg_time_s"]]
                 for r in case.rows]))
        elif record.kind == "rate_table":
            written.append(_write_dat(
                out / f"{slug}_dist.dat", ["N", "d"],
                [[r["N"], r["d"]] for r in case.rows]))
        else:
            written.append(_write_dat(
                out / f"{slug}_norm.dat", ["N", "norm"],
                [[r["N"], r["norm"]] for r in case.rows]))
    return written


def render_figures(record: RunRecord, out_dir: str | Path) -> list[Path]:
    """Render summary PNG figures next to the delimited output."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if record.kind == "solve_compare":
        return [
            _solve_figure(record, out / "iterations.png",
                          "cg_iters", "mgcg_iters", "iterations"),
            _solve_figure(record, out / "times.png",
                          "cg_time_s", "mgcg_time_s", "solve time [s]"),
        ]
    key, label, name = (("d", "spectral distance", "distances.png")
                        if record.kind == "rate_table"
                        else ("norm", "operator norm", "norms.png"))
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for case in record.cases:
        if not case.rows:
            continue
        ax.loglog([r["N"] for r in case.rows], [r[key] for r in case.rows],
                  "o-", label=_slug(case.params))
    ax.set_xlabel("N")
    ax.set_ylabel(label)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = out / name
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return [path]


def _solve_figure(record: RunRecord, path: Path, cg_key: str, mg_key: str,
                  ylabel: str) -> Path:
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for case in record.cases:
        rows = [r for r in case.rows if r.get(cg_key) is not None
                or r.get(mg_key) is not None]
        if not rows:
            continue
        slug = _slug(case.params)
        hs = [r["h"] for r in rows]
        cg = [r[cg_key] for r in rows]
        mg = [r[mg_key] for r in rows]
        if any(v is not None for v in cg):
            ax.plot(hs, cg, "o--", label=f"{slug} cg")
        if any(v is not None for v in mg):
            ax.plot(hs, mg, "s-", label=f"{slug} mgcg")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.invert_xaxis()
    ax.set_xlabel("h")
    ax.set_ylabel(ylabel)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
