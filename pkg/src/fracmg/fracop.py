"""Discrete fractional solve operator via sinc quadrature of Kato's formula.

The inverse fractional Laplacian applied to a control z in V_h is the
weighted sum of shifted solves

    K z = sum_l w_l (e^{y_l} M0 + A0)^{-1} (B z),    y_l = m*l,

with weights w_l = sin(s*pi)/pi * m * exp((1-s)*y_l).  Each shifted system
is SPD, factorized once and reused; a dense generalized eigensystem of
(A0, M0) provides an independent oracle on small levels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse.linalg as spla

from .meshfem import FEOperators, Level

__all__ = [
    "QuadratureRule",
    "quad_params",
    "quad_rule_for_spacing",
    "scalar_quadrature",
    "FractionalSolveOp",
    "DiscreteEigensystem",
    "compute_eigensystem",
    "apply_K_exact",
    "exact_solve_matrix",
]

# SuperLU settings for SPD systems: symmetric ordering roughly halves fill.
_SPD_OPTIONS = {"SymmetricMode": True, "ColPerm": "MMD_AT_PLUS_A",
                "DiagPivotThresh": 0.0}

DENSE_EIG_CAP = 1024


@dataclass(frozen=True)
class QuadratureRule:
    """Sinc quadrature nodes and weights for a fractional order s."""

    s: float
    m: float
    n_minus: int
    n_plus: int
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        expect_plus = math.ceil(math.pi**2 / (4 * self.s * self.m**2))
        expect_minus = math.ceil(math.pi**2 / (4 * (1 - self.s) * self.m**2))
        if (self.n_plus, self.n_minus) != (expect_plus, expect_minus):
            raise ValueError("node-range integers inconsistent with (s, m)")


def _check_s(s: float) -> None:
    if not 0.0 < s < 1.0:
        raise ValueError(f"fractional order s must lie in (0,1), got {s}")


def quad_rule_for_spacing(s: float, m: float) -> QuadratureRule:
    """Build the rule for an explicitly chosen node spacing m."""
    _check_s(s)
    if m <= 0:
        raise ValueError("node spacing m must be positive")
    n_plus = math.ceil(math.pi**2 / (4 * s * m**2))
    n_minus = math.ceil(math.pi**2 / (4 * (1 - s) * m**2))
    ell = np.arange(-n_minus, n_plus + 1)
    nodes = m * ell
    weights = (math.sin(s * math.pi) / math.pi) * m * np.exp((1 - s) * nodes)
    return QuadratureRule(s=s, m=m, n_minus=n_minus, n_plus=n_plus,
                          nodes=nodes, weights=weights)


def quad_params(s: float, h: float, c_q: float = 1.0) -> QuadratureRule:
    """Rule with the mesh-tied spacing m = c_q / ln(1/h)."""
    _check_s(s)
    if not 0.0 < h < 1.0:
        raise ValueError("mesh size h must lie in (0,1)")
    if c_q <= 0:
        raise ValueError("c_q must be positive")
    return quad_rule_for_spacing(s, c_q / math.log(1.0 / h))


def scalar_quadrature(rule: QuadratureRule, lam: float | np.ndarray):
    """Quadrature approximation of lam**(-s); exact as m -> 0."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise ValueError("lambda must be positive")
    vals = np.sum(rule.weights[:, None] / (np.exp(rule.nodes)[:, None] +
                                           lam.reshape(1, -1)), axis=0)
    return vals.reshape(lam.shape) if lam.shape else float(vals[0])


class FractionalSolveOp:
    """Control-to-state map K_h^s with prefactored shifted solves.

    Maps V_h coefficients (full space, n_nodes) to V_h^0 coefficients
    (interior, n_interior).  Factorizations are built lazily per shift
    index and shared across repeated applications; `clear()` frees them.
    Immutable after construction apart from the factor cache.
    """

    def __init__(self, level: Level, rule: QuadratureRule):
        self.level = level
        self.rule = rule
        self._factors: dict[int, spla.SuperLU] = {}

    @property
    def ops(self) -> FEOperators:
        return self.level.ops

    def _factor(self, i: int) -> spla.SuperLU:
        f = self._factors.get(i)
        if f is None:
            shift = math.exp(self.rule.nodes[i])
            S = (shift * self.ops.M0 + self.ops.A0).tocsc()
            try:
                f = spla.splu(S, options=dict(_SPD_OPTIONS))
            except RuntimeError as exc:  # pragma: no cover
                raise RuntimeError(
                    f"factorization of shifted system {i} failed; "
                    "assembled operators are not SPD") from exc
            self._factors[i] = f
        return f

    def clear(self) -> None:
        """Drop all cached factorizations."""
        self._factors.clear()

    def prepare(self) -> None:
        """Factorize every shifted system up front (for timing fairness)."""
        for i in range(len(self.rule.weights)):
            self._factor(i)

    def _quad_sum_solve(self, rhs: np.ndarray) -> np.ndarray:
        out = np.zeros_like(rhs, dtype=float)
        for i, w in enumerate(self.rule.weights):
            out += w * self._factor(i).solve(rhs)
        return out

    def apply(self, z: np.ndarray) -> np.ndarray:
        """K z: control coefficients in V_h -> state coefficients in V_h^0."""
        z = np.asarray(z, dtype=float)
        if z.shape[0] != self.level.mesh.n_nodes:
            raise ValueError("control vector dimension mismatch")
        return self._quad_sum_solve(self.ops.B @ z)

    def apply_adjoint_load(self, v: np.ndarray) -> np.ndarray:
        """L2 load of K* v in V_h, i.e. B^T sum_l w_l S_l^{-1} (M0 v)."""
        v = np.asarray(v, dtype=float)
        if v.shape[0] != self.level.mesh.n_interior:
            raise ValueError("state vector dimension mismatch")
        return self.ops.B.T @ self._quad_sum_solve(self.ops.M0 @ v)

    def matrix(self) -> np.ndarray:
        """Dense coefficient matrix of K (n_interior x n_nodes)."""
        rhs = self.ops.B.toarray()
        out = np.zeros_like(rhs)
        for i, w in enumerate(self.rule.weights):
            out += w * self._factor(i).solve(rhs)
        return out


@dataclass
class DiscreteEigensystem:
    """Eigenpairs of A0 phi = lambda M0 phi, M0-orthonormal."""

    level: Level
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns, n_interior x n_interior


def compute_eigensystem(level: Level, cap: int = DENSE_EIG_CAP) -> DiscreteEigensystem:
    """Dense generalized eigensolve of (A0, M0); small levels only."""
    n = level.mesh.n_interior
    if n > cap:
        raise ValueError(
            f"n_interior={n} over the dense-eigensolve cap of {cap}")
    lam, phi = la.eigh(level.ops.A0.toarray(), level.ops.M0.toarray())
    return DiscreteEigensystem(level=level, eigenvalues=lam, eigenvectors=phi)


def apply_K_exact(eig: DiscreteEigensystem, s: float, z: np.ndarray) -> np.ndarray:
    """Spectral oracle: sum_k lambda_k^{-s} <z, phi_k> phi_k.

    Accepts s in (0, 1]; s=1 reproduces the plain Dirichlet solve
    A0 u = B z and is useful for cross-checks.
    """
    if not 0.0 < s <= 1.0:
        raise ValueError("s must lie in (0,1]")
    z = np.asarray(z, dtype=float)
    coeffs = eig.eigenvectors.T @ (eig.level.ops.B @ z)
    return eig.eigenvectors @ (eig.eigenvalues ** (-s) * coeffs)


def exact_solve_matrix(eig: DiscreteEigensystem, s: float) -> np.ndarray:
    """Dense coefficient matrix of the spectral oracle operator."""
    if not 0.0 < s <= 1.0:
        raise ValueError("s must lie in (0,1]")
    phi = eig.eigenvectors
    return (phi * eig.eigenvalues ** (-s)) @ (phi.T @ eig.level.ops.B.toarray())
