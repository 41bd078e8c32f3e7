"""Dense Gram materialization, spectral distance, and rate measurements.

The spectral distance of two SPD operators is d(A,B) = max |ln lambda| over
the generalized spectrum sigma(A,B).  All eigenproblems here are symmetric
definite pencils solved by Cholesky congruence (scipy.linalg.eigh); sizes
are limited to the one-dimensional case by a dense cap, matching the
measurement protocol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as la

from .fracop import FractionalSolveOp, quad_params
from .meshfem import Level, MeshHierarchy, build_hierarchy

__all__ = [
    "GramMatrix",
    "SpectralDistanceReport",
    "LemmaRateReport",
    "materialize",
    "spectral_distance",
    "rate_table",
    "lemma_rate",
]

DENSE_CAP = 4097


@dataclass
class GramMatrix:
    """Dense symmetric matrix of L2 pairings <A phi_j, phi_i>."""

    matrix: np.ndarray
    j: int
    tag: str
    asymmetry: float = 0.0


def materialize(apply_op: Callable[[np.ndarray], np.ndarray], level: Level,
                tag: str = "", cap: int = DENSE_CAP) -> GramMatrix:
    """Materialize an operator on V_h as a symmetrized Gram matrix.

    Column k is M (op e_k); the result is symmetrized and the relative
    asymmetry recorded.  Intended for oracle checks at moderate sizes.
    """
    n = level.mesh.n_nodes
    if n > cap:
        raise ValueError(f"n_nodes={n} exceeds the dense cap {cap}")
    M = level.ops.M
    cols = np.empty((n, n))
    e = np.zeros(n)
    for k in range(n):
        e[k] = 1.0
        cols[:, k] = M @ apply_op(e)
        e[k] = 0.0
    scale = np.max(np.abs(cols)) or 1.0
    asym = float(np.max(np.abs(cols - cols.T)) / scale)
    return GramMatrix(matrix=0.5 * (cols + cols.T), j=level.mesh.j,
                      tag=tag, asymmetry=asym)


def spectral_distance(A: GramMatrix, B: GramMatrix,
                      return_extremes: bool = False):
    """d(A,B) = max |ln lambda| over the pencil A u = lambda B u."""
    if A.j != B.j:
        raise ValueError("operands live on different levels")
    try:
        lam = la.eigh(A.matrix, B.matrix, eigvals_only=True)
    except la.LinAlgError as exc:
        raise la.LinAlgError(
            f"pencil ({A.tag},{B.tag}) at level {A.j}: B side is not "
            "positive definite") from exc
    if lam[0] <= 0:
        raise la.LinAlgError(
            f"pencil ({A.tag},{B.tag}) at level {A.j} has a non-positive "
            "generalized eigenvalue")
    d = max(abs(math.log(lam[0])), abs(math.log(lam[-1])))
    if return_extremes:
        return d, float(lam[0]), float(lam[-1])
    return d


@dataclass
class SpectralDistanceReport:
    """Per-level spectral distances d_j and their dyadic decay ratios."""

    s: float
    beta: float
    c_q: float
    entries: list[tuple[int, float]]  # (j, d_j), increasing j
    ratios: list[float] = field(default_factory=list)  # log2(d_j / d_{j+1})

    def __post_init__(self):
        if not self.ratios:
            ds = [d for _, d in self.entries]
            self.ratios = [math.log2(ds[i] / ds[i + 1])
                           for i in range(len(ds) - 1)]


@dataclass
class LemmaRateReport:
    """Per-level norms of K_h - E K_2h pi_2h and their decay ratios."""

    s: float
    c_q: float
    entries: list[tuple[int, float]]
    ratios: list[float] = field(default_factory=list)

    def __post_init__(self):
        if not self.ratios:
            ns = [v for _, v in self.entries]
            self.ratios = [math.log2(ns[i] / ns[i + 1])
                           for i in range(len(ns) - 1)]


def _hessian_gram(hierarchy: MeshHierarchy, j: int, s: float, beta: float,
                  c_q: float) -> tuple[np.ndarray, np.ndarray]:
    """Dense (K matrix, Hessian Gram) pair at level j."""
    level = hierarchy.level(j)
    K = FractionalSolveOp(level, quad_params(s, level.mesh.h, c_q))
    Kmat = K.matrix()
    K.clear()
    H = Kmat.T @ (level.ops.M0 @ Kmat) + beta * level.ops.M.toarray()
    return Kmat, 0.5 * (H + H.T)


def rate_table(s: float, beta: float, j_min: int, j_max: int,
               c_q: float = 1.0, cap: int = DENSE_CAP,
               hierarchy: MeshHierarchy | None = None) -> SpectralDistanceReport:
    """Spectral distances d(H_j, G_j) for j = j_min..j_max, 1D only.

    G_j is the two-grid preconditioner with exact coarse Hessian, so its
    Gram form follows from the level-(j-1) Hessian by the splitting formula.
    """
    if j_max - j_min < 2:
        raise ValueError("need j_max - j_min >= 2 for meaningful ratios")
    if hierarchy is None:
        hierarchy = build_hierarchy(1, j_min - 1, j_max)
    if hierarchy.dim != 1:
        raise ValueError("dense spectral-distance tables are 1D only")
    if hierarchy.level(j_max).mesh.n_nodes > cap:
        raise ValueError(f"finest level exceeds the dense cap {cap}")

    grams: dict[int, np.ndarray] = {}
    for j in range(j_min - 1, j_max + 1):
        _, grams[j] = _hessian_gram(hierarchy, j, s, beta, c_q)

    entries = []
    for j in range(j_min, j_max + 1):
        ops = hierarchy.level(j).ops
        coarse_ops = hierarchy.level(j - 1).ops
        P = hierarchy.prolongation(j).P.toarray()
        R = P.T @ ops.M.toarray()
        McinvR = la.solve(coarse_ops.M.toarray(), R, assume_a="pos")
        Ggram = beta * (ops.M.toarray() - R.T @ McinvR) \
            + McinvR.T @ grams[j - 1] @ McinvR
        Ggram = 0.5 * (Ggram + Ggram.T)
        d = spectral_distance(GramMatrix(grams[j], j, "H"),
                              GramMatrix(Ggram, j, "G"))
        entries.append((j, d))
    return SpectralDistanceReport(s=s, beta=beta, c_q=c_q, entries=entries)


def lemma_rate(s: float, j_min: int, j_max: int, c_q: float = 1.0,
               cap: int = DENSE_CAP,
               hierarchy: MeshHierarchy | None = None) -> LemmaRateReport:
    """M-weighted L2 operator norms of D_j = K_j - E K_{j-1} pi, 1D only."""
    if hierarchy is None:
        hierarchy = build_hierarchy(1, j_min - 1, j_max)
    if hierarchy.dim != 1:
        raise ValueError("lemma-rate measurement is 1D only")
    if hierarchy.level(j_max).mesh.n_nodes > cap:
        raise ValueError(f"finest level exceeds the dense cap {cap}")

    kmats: dict[int, np.ndarray] = {}
    for j in range(j_min - 1, j_max + 1):
        kmats[j], _ = _hessian_gram(hierarchy, j, s, 1.0, c_q)

    entries = []
    for j in range(j_min, j_max + 1):
        level = hierarchy.level(j)
        coarse_ops = hierarchy.level(j - 1).ops
        pr = hierarchy.prolongation(j)
        Mf = level.ops.M.toarray()
        pi = la.solve(coarse_ops.M.toarray(), pr.P.T.toarray() @ Mf,
                      assume_a="pos")
        D = kmats[j] - pr.P0.toarray() @ (kmats[j - 1] @ pi)
        # ||D||^2 = lambda_max of the pencil (D^T M0 D, M)
        quad = D.T @ (level.ops.M0.toarray() @ D)
        lam = la.eigh(0.5 * (quad + quad.T), Mf, eigvals_only=True)
        entries.append((j, math.sqrt(max(lam[-1], 0.0))))
    return LemmaRateReport(s=s, c_q=c_q, entries=entries)
