"""Two-grid and W-cycle multigrid preconditioners for the reduced Hessian.

The two-grid preconditioner splits V_h into the embedded coarse space and
its L2-orthogonal complement:

    G z = beta (z - E pi z) + E H_2h (pi z),
    G^{-1} r = beta^{-1} (r - E pi r) + E H_2h^{-1} (pi r),

where E is the natural embedding and pi the L2 projection.  The multigrid
version replaces the exact coarse Hessian inverse with the symmetric
two-step approximation 2 G_2h^{-1} - G_2h^{-1} H_2h G_2h^{-1}, recursing
down to a densely factorized Hessian on the base level; the two coarse
preconditioner applications per level give the W-shaped call tree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .control import ControlProblem, HessianOp, SolveReport, pcg
from .fracop import FractionalSolveOp, QuadratureRule, quad_params
from .meshfem import MeshHierarchy

__all__ = [
    "TwoGridPrecond",
    "DirectCoarseSolver",
    "WStepCoarseSolver",
    "MultigridPrecond",
    "build_two_grid",
    "build_mg",
    "mgcg_solve",
]

DENSE_HESSIAN_CAP = 4356  # full node count of the 2D j=6 grid


class DirectCoarseSolver:
    """Exact coarse Hessian inverse from a dense Cholesky of its Gram form."""

    def __init__(self, H_coarse: HessianOp, cap: int = DENSE_HESSIAN_CAP):
        n = H_coarse.level.mesh.n_nodes
        if n > cap:
            raise ValueError(
                f"coarse Hessian has {n} unknowns, over the dense cap {cap}")
        self.level = H_coarse.level
        self._cho = la.cho_factor(H_coarse.gram_matrix())

    def solve(self, r: np.ndarray) -> np.ndarray:
        # H^{-1} r = Hgram^{-1} (M r) since Hgram = M H
        return la.cho_solve(self._cho, self.level.ops.M @ r)


class WStepCoarseSolver:
    """Approximate coarse inverse 2 G^{-1} - G^{-1} H G^{-1}."""

    def __init__(self, pc_coarse: "TwoGridPrecond", H_coarse: HessianOp):
        self.pc = pc_coarse
        self.H = H_coarse

    def solve(self, r: np.ndarray) -> np.ndarray:
        g = self.pc.apply_inverse(r)
        return 2.0 * g - self.pc.apply_inverse(self.H.apply(g))


class TwoGridPrecond:
    """The two-grid preconditioner G on one fine level."""

    def __init__(self, hierarchy: MeshHierarchy, j_fine: int,
                 H_coarse: HessianOp, coarse_solver, beta: float):
        self.hierarchy = hierarchy
        self.j = j_fine
        self.H_coarse = H_coarse
        self.coarse_solver = coarse_solver
        self.beta = beta
        self.level = hierarchy.level(j_fine)

    def project(self, z: np.ndarray) -> np.ndarray:
        return self.hierarchy.l2_project_coarse(self.j, z)

    def embed(self, w: np.ndarray) -> np.ndarray:
        return self.hierarchy.embed(self.j, w)

    def apply(self, z: np.ndarray) -> np.ndarray:
        pz = self.project(z)
        return self.beta * (z - self.embed(pz)) + self.embed(self.H_coarse.apply(pz))

    def apply_inverse(self, r: np.ndarray) -> np.ndarray:
        pr = self.project(r)
        return (r - self.embed(pr)) / self.beta + self.embed(self.coarse_solver.solve(pr))

    def gram_inner(self, z: np.ndarray, w: np.ndarray) -> float:
        return self.level.ops.inner(self.apply(z), w)

    def gram_matrix(self) -> np.ndarray:
        """Dense Gram matrix of G via the orthogonal-splitting formula."""
        ops = self.level.ops
        coarse_ops = self.H_coarse.level.ops
        P = self.hierarchy.prolongation(self.j).P.toarray()
        R = P.T @ ops.M.toarray()                      # n_c x n_f
        McinvR = la.solve(coarse_ops.M.toarray(), R, assume_a="pos")
        Hc = self.H_coarse.gram_matrix()
        G = self.beta * (ops.M.toarray() - R.T @ McinvR) \
            + McinvR.T @ Hc @ McinvR
        return 0.5 * (G + G.T)


@dataclass
class MultigridPrecond:
    """Recursive W-cycle preconditioner over levels j_base..j_fine."""

    hierarchy: MeshHierarchy
    s: float
    beta: float
    j_base: int
    j_fine: int
    finest: TwoGridPrecond
    per_level: dict[int, TwoGridPrecond]
    hessians: dict[int, HessianOp]

    def apply(self, z: np.ndarray) -> np.ndarray:
        return self.finest.apply(z)

    def apply_inverse(self, r: np.ndarray) -> np.ndarray:
        return self.finest.apply_inverse(r)


def _hessian_for_level(hierarchy: MeshHierarchy, j: int, s: float, beta: float,
                       rule: QuadratureRule) -> HessianOp:
    level = hierarchy.level(j)
    K = FractionalSolveOp(level, rule)
    # target data is irrelevant to the Hessian; a zero vector keeps the
    # ControlProblem container honest
    problem = ControlProblem(s=s, beta=beta, level=level, K=K,
                             u_d=np.zeros(level.mesh.n_nodes))
    return HessianOp(problem)


def build_two_grid(hierarchy: MeshHierarchy, j_fine: int, s: float, beta: float,
                   c_q: float = 1.0,
                   rule: QuadratureRule | None = None) -> TwoGridPrecond:
    """Two-grid preconditioner with a direct (dense) coarse Hessian solve."""
    coarse_rule = rule or quad_params(s, hierarchy.level(j_fine - 1).mesh.h, c_q)
    H_coarse = _hessian_for_level(hierarchy, j_fine - 1, s, beta, coarse_rule)
    solver = DirectCoarseSolver(H_coarse)
    return TwoGridPrecond(hierarchy, j_fine, H_coarse, solver, beta)


def build_mg(hierarchy: MeshHierarchy, s: float, beta: float, j_base: int,
             j_fine: int | None = None, c_q: float = 1.0,
             quad_mode: str = "per_level",
             hessians: dict[int, HessianOp] | None = None,
             probe_seed: int = 0, n_probe: int = 10) -> MultigridPrecond:
    """Build the recursive preconditioner bottoming out at j_base.

    quad_mode selects the sinc spacing per level: "per_level" ties m to each
    level's own mesh size, "fine_level" reuses the finest level's rule
    everywhere (same rational approximation on every level; cheaper on
    memory-bound fine grids without degrading the coarse-grid match).
    """
    j_fine = hierarchy.j_max if j_fine is None else j_fine
    if j_base < hierarchy.j_min or j_base >= j_fine:
        raise ValueError("need j_min <= j_base < j_fine")
    if quad_mode not in ("per_level", "fine_level"):
        raise ValueError(f"unknown quad_mode {quad_mode!r}")
    fine_rule = quad_params(s, hierarchy.level(j_fine).mesh.h, c_q)

    hessians = dict(hessians or {})
    for j in range(j_base, j_fine + 1):
        if j not in hessians:
            rule = fine_rule if quad_mode == "fine_level" \
                else quad_params(s, hierarchy.level(j).mesh.h, c_q)
            hessians[j] = _hessian_for_level(hierarchy, j, s, beta, rule)

    per_level: dict[int, TwoGridPrecond] = {}
    solver = DirectCoarseSolver(hessians[j_base])
    for j in range(j_base + 1, j_fine + 1):
        per_level[j] = TwoGridPrecond(hierarchy, j, hessians[j - 1], solver, beta)
        solver = WStepCoarseSolver(per_level[j], hessians[j])

    _probe_spd(per_level, hessians, j_base, j_fine, probe_seed, n_probe)
    return MultigridPrecond(hierarchy=hierarchy, s=s, beta=beta, j_base=j_base,
                            j_fine=j_fine, finest=per_level[j_fine],
                            per_level=per_level, hessians=hessians)


def _probe_spd(per_level, hessians, j_base, j_fine, seed, n_probe) -> None:
    """Rayleigh-quotient probe of sigma(G^{-1} H) subset (0, 2).

    The W-step approximating H_j^{-1} by 2G_j^{-1} - G_j^{-1}H_jG_j^{-1}
    stays SPD only under this spectral condition; probing is the runtime
    substitute for the uncheckable smallness hypothesis of the theory.
    """
    rng = np.random.default_rng(seed)
    for j in range(j_base + 1, j_fine):  # levels whose G backs a W-step
        pc = per_level[j]
        H = hessians[j]
        n = pc.level.mesh.n_nodes
        for _ in range(n_probe):
            z = rng.standard_normal(n)
            rho = H.gram_inner(z, z) / pc.gram_inner(z, z)
            if not 0.0 < rho < 2.0:
                raise RuntimeError(
                    f"spectral safety check failed at level {j}: probe "
                    f"Rayleigh quotient {rho:.3g} outside (0,2); use a finer "
                    "base level")


def mgcg_solve(H: HessianOp, pc: MultigridPrecond | TwoGridPrecond,
               rhs: np.ndarray, tol: float = 1e-6,
               max_iter: int = 500) -> tuple[np.ndarray, SolveReport]:
    """Preconditioned CG in the L2 inner product."""
    return pcg(H.apply, rhs, H.level, tol, max_iter, precond=pc.apply_inverse)
