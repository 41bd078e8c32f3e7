"""Seed-pinned property suite behind the `check` CLI subcommand.

Each check returns a CheckResult; the suite passes only with zero failures.
The checks exercise the invariants that conjugate gradients and the
preconditioner analysis rely on: L2 self-adjointness, coercivity, the
exact two-grid inverse, projection/embedding consistency, the eigenvalue
sandwich of the spectral distance, and agreement of the multigrid solver
with a dense direct solve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .control import ControlProblem, HessianOp, analytic_target, assemble_rhs
from .fracop import FractionalSolveOp, quad_params
from .meshfem import MeshHierarchy, build_hierarchy
from .precond import build_mg, build_two_grid, mgcg_solve
from .specdist import GramMatrix, spectral_distance

__all__ = ["CheckResult", "run_property_checks"]


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _hessian(hier: MeshHierarchy, j: int, s: float, beta: float) -> HessianOp:
    level = hier.level(j)
    K = FractionalSolveOp(level, quad_params(s, level.mesh.h))
    u_d = analytic_target(level, (2,) * hier.dim)
    return HessianOp(ControlProblem(s=s, beta=beta, level=level, K=K, u_d=u_d))


def _check_gram_symmetry(hier, rng) -> CheckResult:
    worst = 0.0
    for j in (5, 6):
        ops = hier.level(j).ops
        H = _hessian(hier, j, 0.5, 0.05)
        pc = build_two_grid(hier, j, 0.5, 0.05)
        K = H.problem.K
        n = hier.level(j).mesh.n_nodes
        for _ in range(10):
            z, w = rng.standard_normal((2, n))
            scale = np.linalg.norm(z) * np.linalg.norm(w)
            worst = max(
                worst,
                abs(K.apply(z) @ (ops.B @ w) - K.apply(w) @ (ops.B @ z)) / scale,
                abs(H.gram_inner(z, w) - H.gram_inner(w, z)) / scale,
                abs(pc.gram_inner(z, w) - pc.gram_inner(w, z)) / scale)
    return CheckResult("gram-symmetry K/H/G", worst <= 1e-11,
                       f"max scaled asymmetry {worst:.3e} (tol 1e-11)")


def _check_coercivity(hier, rng) -> CheckResult:
    beta = 0.02
    H = _hessian(hier, 6, 0.3, beta)
    ops = hier.level(6).ops
    worst = np.inf
    for _ in range(20):
        z = rng.standard_normal(hier.level(6).mesh.n_nodes)
        worst = min(worst, H.gram_inner(z, z) - beta * ops.inner(z, z))
    return CheckResult("hessian-coercivity", worst >= -1e-14,
                       f"min <Hz,z> - beta||z||^2 = {worst:.3e}")


def _check_round_trip(hier, rng) -> CheckResult:
    worst = 0.0
    for j in (5, 6):
        pc = build_two_grid(hier, j, 0.5, 0.1)
        n = hier.level(j).mesh.n_nodes
        for _ in range(20):
            r = rng.standard_normal(n)
            worst = max(
                worst,
                np.linalg.norm(pc.apply(pc.apply_inverse(r)) - r)
                / np.linalg.norm(r))
    return CheckResult("two-grid-round-trip", worst <= 1e-10,
                       f"max relative ||G G^-1 r - r|| = {worst:.3e} (tol 1e-10)")


def _check_projection_identity(hier, rng) -> CheckResult:
    worst = 0.0
    for j in (5, 6, 7):
        nc = hier.level(j - 1).mesh.n_nodes
        for _ in range(10):
            w = rng.standard_normal(nc)
            back = hier.l2_project_coarse(j, hier.embed(j, w))
            worst = max(worst, np.linalg.norm(back - w) / np.linalg.norm(w))
    return CheckResult("projection-of-embedding-is-identity", worst <= 1e-11,
                       f"max relative deviation {worst:.3e} (tol 1e-11)")


def _check_eigen_sandwich(hier, rng) -> CheckResult:
    s, beta, j = 0.4, 0.5, 5
    H = _hessian(hier, j, s, beta)
    pc = build_two_grid(hier, j, s, beta)
    d, lo, hi = spectral_distance(GramMatrix(H.gram_matrix(), j, "H"),
                                  GramMatrix(pc.gram_matrix(), j, "G"),
                                  return_extremes=True)
    ok = np.exp(-d) * (1 - 1e-12) <= lo and hi <= np.exp(d) * (1 + 1e-12)
    return CheckResult(
        "eigenvalue-sandwich", ok,
        f"d={d:.3e}, lambda in [{lo:.6f}, {hi:.6f}]")


def _check_mgcg_vs_dense(hier, rng) -> CheckResult:
    s, beta, j = 0.5, 1e-2, 7
    H = _hessian(hier, j, s, beta)
    rhs = assemble_rhs(H.problem)
    mg = build_mg(hier, s, beta, j_base=4, j_fine=j)
    x, rep = mgcg_solve(H, mg, rhs, tol=1e-10, max_iter=200)
    dense = la.solve(H.gram_matrix(), hier.level(j).ops.M @ rhs,
                     assume_a="pos")
    rel = np.linalg.norm(x - dense) / np.linalg.norm(dense)
    return CheckResult("mgcg-vs-dense-direct", rep.converged and rel <= 1e-6,
                       f"relative error {rel:.3e} in {rep.iterations} iterations")


def run_property_checks(seed: int = 0) -> list[CheckResult]:
    """Run the full suite on a 1D hierarchy up to j=7."""
    rng = np.random.default_rng(seed)
    hier = build_hierarchy(1, 4, 7)
    return [
        _check_gram_symmetry(hier, rng),
        _check_coercivity(hier, rng),
        _check_round_trip(hier, rng),
        _check_projection_identity(hier, rng),
        _check_eigen_sandwich(hier, rng),
        _check_mgcg_vs_dense(hier, rng),
    ]
