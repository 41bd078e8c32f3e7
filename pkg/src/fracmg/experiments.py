"""Experiment orchestration: run configured cases and serialize results.

A run walks the cartesian product of the configured s and beta values.
Each case is measured independently; a failing case is recorded with its
error message and the remaining cases still run.  Solve timings cover the
Krylov iteration only, with setup (assembly, factorization, preconditioner
construction) reported separately per case.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import product
from pathlib import Path

from .config import ExperimentConfig
from .control import (ControlProblem, HessianOp, analytic_target, assemble_rhs,
                      cg_solve, load_target_csv)
from .meshfem import MeshHierarchy, build_hierarchy
from .precond import build_mg, mgcg_solve
from .specdist import lemma_rate, rate_table

__all__ = ["CaseResult", "RunRecord", "run_experiment",
           "write_csv", "write_json", "COLUMNS"]

COLUMNS = {
    "rate_table": ["s", "beta", "N", "d", "log2_ratio"],
    "lemma_rate": ["s", "N", "norm", "log2_ratio"],
    "solve_compare": ["s", "beta", "grid", "cg_iters", "cg_time_s",
                      "mgcg_iters", "mgcg_time_s"],
}

NA = "NA"


@dataclass
class CaseResult:
    params: dict
    status: str = "ok"
    error: str | None = None
    rows: list[dict] = field(default_factory=list)
    setup_time_s: float = 0.0


@dataclass
class RunRecord:
    kind: str
    config: dict
    columns: list[str]
    cases: list[CaseResult]
    assembly_time_s: float

    @property
    def failed(self) -> bool:
        return any(c.status != "ok" for c in self.cases)

    def all_rows(self) -> list[dict]:
        return [row for case in self.cases for row in case.rows]


def run_experiment(cfg: ExperimentConfig) -> RunRecord:
    """Run all cases of one configured experiment."""
    t0 = time.perf_counter()
    j_lo = cfg.j_base if cfg.kind == "solve_compare" else cfg.j_min - 1
    hier = build_hierarchy(cfg.dim, j_lo, cfg.j_max)
    assembly_time = time.perf_counter() - t0

    if cfg.kind == "rate_table":
        params = [{"s": s, "beta": b}
                  for s, b in product(cfg.s_values, cfg.beta_values)]
        runner = _run_rate_case
    elif cfg.kind == "lemma_rate":
        params = [{"s": s} for s in cfg.s_values]
        runner = _run_lemma_case
    else:
        params = [{"s": s, "beta": b}
                  for s, b in product(cfg.s_values, cfg.beta_values)]
        runner = _run_solve_case

    def one(p: dict) -> CaseResult:
        case = CaseResult(params=p)
        t = time.perf_counter()
        try:
            runner(cfg, hier, p, case)
        except Exception as exc:
            case.status = "failed"
            case.error = f"{type(exc).__name__}: {exc}"
        if case.setup_time_s == 0.0:
            case.setup_time_s = time.perf_counter() - t
        return case

    if cfg.workers > 1 and len(params) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            cases = list(pool.map(one, params))
    else:
        cases = [one(p) for p in params]
    return RunRecord(kind=cfg.kind, config=cfg.to_dict(),
                     columns=COLUMNS[cfg.kind], cases=cases,
                     assembly_time_s=assembly_time)


def _run_rate_case(cfg: ExperimentConfig, hier: MeshHierarchy, p: dict,
                   case: CaseResult) -> None:
    rep = rate_table(p["s"], p["beta"], cfg.j_min, cfg.j_max, cfg.c_q,
                     hierarchy=hier)
    for idx, (j, d) in enumerate(rep.entries):
        ratio = rep.ratios[idx] if idx < len(rep.ratios) else None
        case.rows.append({"s": p["s"], "beta": p["beta"], "N": 2**j,
                          "d": d, "log2_ratio": ratio})


def _run_lemma_case(cfg: ExperimentConfig, hier: MeshHierarchy, p: dict,
                    case: CaseResult) -> None:
    rep = lemma_rate(p["s"], cfg.j_min, cfg.j_max, cfg.c_q, hierarchy=hier)
    for idx, (j, v) in enumerate(rep.entries):
        ratio = rep.ratios[idx] if idx < len(rep.ratios) else None
        case.rows.append({"s": p["s"], "N": 2**j, "norm": v,
                          "log2_ratio": ratio})


def _target_for(cfg: ExperimentConfig, level):
    if cfg.target_csv is not None:
        return load_target_csv(cfg.target_csv, level)
    return analytic_target(level, cfg.modes())


def _run_solve_case(cfg: ExperimentConfig, hier: MeshHierarchy, p: dict,
                    case: CaseResult) -> None:
    s, beta = p["s"], p["beta"]
    setup_total = 0.0
    errors = []
    for j in range(cfg.j_min, cfg.j_max + 1):
        level = hier.level(j)
        n = 2**j
        grid = f"{n}x{n}" if cfg.dim == 2 else f"{n}"

        t = time.perf_counter()
        mg = build_mg(hier, s, beta, j_base=cfg.j_base, j_fine=j,
                      c_q=cfg.c_q, quad_mode=cfg.quad_mode,
                      probe_seed=cfg.seed)
        for H in mg.hessians.values():
            H.problem.K.prepare()
        H_fine = mg.hessians[j]
        H_fine.problem.u_d = _target_for(cfg, level)
        rhs = assemble_rhs(H_fine.problem)
        setup_total += time.perf_counter() - t

        _, rep_cg = cg_solve(H_fine, rhs, tol=cfg.tol, max_iter=cfg.max_iter)
        _, rep_mg = mgcg_solve(H_fine, mg, rhs, tol=cfg.tol,
                               max_iter=cfg.max_iter)
        case.rows.append({
            "s": s, "beta": beta, "grid": grid, "j": j, "h": level.mesh.h,
            "cg_iters": rep_cg.iterations,
            "cg_time_s": rep_cg.wall_time if rep_cg.converged else None,
            "mgcg_iters": rep_mg.iterations,
            "mgcg_time_s": rep_mg.wall_time if rep_mg.converged else None,
        })
        if not rep_cg.converged:
            errors.append(f"CG did not converge on {grid}")
        if not rep_mg.converged:
            errors.append(f"MGCG did not converge on {grid}")
        for H in mg.hessians.values():
            H.problem.K.clear()
        del mg
    case.setup_time_s = setup_total
    if errors:
        case.status = "failed"
        case.error = "; ".join(errors)


def _fmt(value) -> str:
    if value is None:
        return NA
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def write_csv(record: RunRecord, path: str | Path) -> Path:
    """Write all case rows as a single delimited table."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(record.columns)
        for row in record.all_rows():
            writer.writerow([_fmt(row.get(col)) for col in record.columns])
    return path


def write_json(record: RunRecord, path: str | Path) -> Path:
    """Write the full run record (config echo, cases, timings) as JSON."""
    path = Path(path)
    payload = {
        "kind": record.kind,
        "config": record.config,
        "columns": record.columns,
        "assembly_time_s": record.assembly_time_s,
        "failed": record.failed,
        "cases": [asdict(c) for c in record.cases],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    return path
