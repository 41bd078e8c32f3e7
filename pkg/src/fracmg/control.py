"""Reduced optimal control problem: Hessian application, targets, and CG.

The reduced Hessian acts on control coefficients as

    H z = M^{-1} K^T_gram z + beta z,   <H z, w> = (K z)^T M0 (K w) + beta z^T M w,

and conjugate gradients runs in the mass-weighted (L2) inner product so
that the operator matches the L2 formulation exactly.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .fracop import FractionalSolveOp
from .meshfem import Level

__all__ = [
    "ControlProblem",
    "HessianOp",
    "SolveReport",
    "analytic_target",
    "load_target_csv",
    "save_target_csv",
    "assemble_rhs",
    "cg_solve",
    "pcg",
]


def analytic_target(level: Level, modes: Sequence[int],
                    project: bool = False) -> np.ndarray:
    """Nodal data for a product of sin(k_i pi x_i) factors.

    `modes` holds one positive integer per space dimension.  By default the
    function is interpolated at the nodes; with ``project=True`` it is
    L2-projected onto V_h instead (mass solve against the exact load of the
    nodal interpolant on a once-refined evaluation, kept simple here by
    projecting the interpolant itself).
    """
    mesh = level.mesh
    if len(modes) != mesh.dim:
        raise ValueError(f"need {mesh.dim} mode indices, got {len(modes)}")
    coords = mesh.coordinates()
    vals = np.ones(mesh.n_nodes)
    for axis, k in enumerate(modes):
        vals *= np.sin(k * math.pi * coords[:, axis])
    if project:
        vals = level.ops.mass_solve(level.ops.M @ vals)
    return vals


def save_target_csv(path: str | Path, level: Level, values: np.ndarray) -> None:
    """Write nodal target data, one value per line, lexicographic order."""
    mesh = level.mesh
    with open(path, "w") as fh:
        fh.write(f"# dim {mesh.dim} j {mesh.j} n_nodes {mesh.n_nodes}\n")
        for v in values:
            fh.write(f"{float(v):.17g}\n")


def load_target_csv(path: str | Path, level: Level) -> np.ndarray:
    """Read nodal target data written by :func:`save_target_csv`."""
    with open(path) as fh:
        header = fh.readline().strip()
        values = np.array([float(line) for line in fh if line.strip()])
    tokens = header.lstrip("#").split()
    meta = dict(zip(tokens[::2], tokens[1::2]))
    mesh = level.mesh
    if int(meta.get("dim", -1)) != mesh.dim or int(meta.get("j", -1)) != mesh.j:
        raise ValueError(f"target file {path} is for a different level")
    if values.size != mesh.n_nodes:
        raise ValueError(
            f"target file has {values.size} values, expected {mesh.n_nodes}")
    return values


@dataclass
class ControlProblem:
    """Data of one reduced problem instance on the finest level."""

    s: float
    beta: float
    level: Level
    K: FractionalSolveOp
    u_d: np.ndarray

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.u_d.shape[0] != self.level.mesh.n_nodes:
            raise ValueError("target data dimension mismatch")


class HessianOp:
    """Reduced Hessian (K* K + beta I) as an applicable operator on V_h."""

    def __init__(self, problem: ControlProblem):
        self.problem = problem

    @property
    def level(self) -> Level:
        return self.problem.level

    @property
    def beta(self) -> float:
        return self.problem.beta

    def apply(self, z: np.ndarray) -> np.ndarray:
        p = self.problem
        y = p.K.apply(z)
        return p.level.ops.mass_solve(p.K.apply_adjoint_load(y)) + p.beta * z

    def gram_inner(self, z: np.ndarray, w: np.ndarray) -> float:
        """<H z, w> in L2, evaluated without a mass solve."""
        p = self.problem
        ops = p.level.ops
        return ops.inner0(p.K.apply(z), p.K.apply(w)) + p.beta * ops.inner(z, w)

    def gram_matrix(self) -> np.ndarray:
        """Dense Gram matrix K^T M0 K + beta M (equals M @ H)."""
        p = self.problem
        Kmat = p.K.matrix()
        return Kmat.T @ (p.level.ops.M0 @ Kmat) + p.beta * p.level.ops.M.toarray()


def assemble_rhs(problem: ControlProblem) -> np.ndarray:
    """Right-hand side K* u_d as a V_h coefficient vector."""
    ops = problem.level.ops
    load = problem.K._quad_sum_solve(ops.B @ problem.u_d)
    return ops.mass_solve(ops.B.T @ load)


@dataclass
class SolveReport:
    iterations: int
    residual_history: list[float]
    wall_time: float
    converged: bool


def pcg(apply_H: Callable[[np.ndarray], np.ndarray],
        rhs: np.ndarray,
        level: Level,
        tol: float,
        max_iter: int,
        precond: Callable[[np.ndarray], np.ndarray] | None = None,
        ) -> tuple[np.ndarray, SolveReport]:
    """Conjugate gradients in the M-weighted inner product.

    Convergence is declared when ||rhs - H z||_M / ||rhs||_M <= tol.  With a
    preconditioner it must be L2-self-adjoint and positive definite.
    """
    if not 0.0 < tol < 1.0:
        raise ValueError("tol must lie in (0,1)")
    ops = level.ops
    t0 = time.perf_counter()
    x = np.zeros_like(rhs)
    r = rhs.copy()
    rnorm0 = ops.norm(rhs)
    if rnorm0 == 0.0:
        return x, SolveReport(0, [0.0], time.perf_counter() - t0, True)
    history = [1.0]
    z = precond(r) if precond is not None else r
    p = z.copy()
    rho = ops.inner(r, z)
    it = 0
    converged = False
    while it < max_iter:
        q = apply_H(p)
        pq = ops.inner(p, q)
        if pq <= 0.0:
            raise RuntimeError(
                "loss of positivity in CG (p^T H p <= 0); operator or "
                "preconditioner is not SPD in the L2 inner product")
        alpha = rho / pq
        x += alpha * p
        r -= alpha * q
        it += 1
        rel = ops.norm(r) / rnorm0
        history.append(rel)
        if rel <= tol:
            converged = True
            break
        z = precond(r) if precond is not None else r
        rho_new = ops.inner(r, z)
        p = z + (rho_new / rho) * p
        rho = rho_new
    return x, SolveReport(it, history, time.perf_counter() - t0, converged)


def cg_solve(H: HessianOp, rhs: np.ndarray, tol: float = 1e-6,
             max_iter: int = 500) -> tuple[np.ndarray, SolveReport]:
    """Unpreconditioned CG on the reduced Hessian."""
    return pcg(H.apply, rhs, H.level, tol, max_iter)
