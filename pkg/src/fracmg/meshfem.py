"""Nested uniform meshes on (0,1) and (0,1)^2 with P1 finite element operators.

The unit square is triangulated by splitting every grid square along the
diagonal from its lower-left to its upper-right corner, so that each level
is an exact (red) refinement of the previous one and every coarse node is a
fine node.  All mass matrices are consistent; lumping would change the L2
inner product that the spectral-distance measurements depend on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "MeshLevel",
    "FEOperators",
    "Prolongation",
    "Level",
    "MeshHierarchy",
    "build_hierarchy",
    "assemble_operators",
    "build_prolongation",
]

DEFAULT_MAX_NODES = 1 << 19


@dataclass(frozen=True)
class MeshLevel:
    """Geometry of one uniform dyadic grid level (h = 2**-j)."""

    dim: int
    j: int
    n_nodes: int
    n_interior: int
    interior_map: np.ndarray  # interior index -> global node index

    @property
    def h(self) -> float:
        return 2.0 ** (-self.j)

    def coordinates(self) -> np.ndarray:
        """Node coordinates, lexicographic order (x fastest in 2D)."""
        n = 2**self.j
        x = np.linspace(0.0, 1.0, n + 1)
        if self.dim == 1:
            return x[:, None]
        X, Y = np.meshgrid(x, x, indexing="xy")
        return np.column_stack([X.ravel(), Y.ravel()])


@dataclass
class FEOperators:
    """Assembled P1 matrices on one level.

    M  : full mass matrix on V_h
    M0 : interior (Dirichlet) mass matrix on V_h^0
    A0 : interior stiffness matrix
    B  : cross-mass, interior rows of M (n_interior x n_nodes)
    """

    M: sp.csc_matrix
    M0: sp.csc_matrix
    A0: sp.csc_matrix
    B: sp.csr_matrix
    _mass_factor: spla.SuperLU | None = field(default=None, repr=False)
    _interior_mass_factor: spla.SuperLU | None = field(default=None, repr=False)

    def mass_solve(self, b: np.ndarray) -> np.ndarray:
        """Solve M x = b (prefactored)."""
        if self._mass_factor is None:
            self._mass_factor = spla.splu(self.M)
        return self._mass_factor.solve(b)

    def interior_mass_solve(self, b: np.ndarray) -> np.ndarray:
        """Solve M0 x = b (prefactored)."""
        if self._interior_mass_factor is None:
            self._interior_mass_factor = spla.splu(self.M0)
        return self._interior_mass_factor.solve(b)

    def inner(self, a: np.ndarray, b: np.ndarray) -> float:
        """L2 inner product of two V_h coefficient vectors."""
        return float(a @ (self.M @ b))

    def inner0(self, a: np.ndarray, b: np.ndarray) -> float:
        """L2 inner product of two V_h^0 coefficient vectors."""
        return float(a @ (self.M0 @ b))

    def norm(self, a: np.ndarray) -> float:
        return float(np.sqrt(max(self.inner(a, a), 0.0)))


@dataclass
class Prolongation:
    """Natural embedding of a coarse level into the next finer one.

    P  : n_fine x n_coarse on full spaces
    P0 : interior-to-interior restriction of P
    """

    P: sp.csr_matrix
    P0: sp.csr_matrix


@dataclass
class Level:
    """One hierarchy level: geometry plus assembled operators."""

    mesh: MeshLevel
    ops: FEOperators

    @property
    def j(self) -> int:
        return self.mesh.j


class MeshHierarchy:
    """Nested levels j_min..j_max with prolongations between neighbours."""

    def __init__(self, levels: list[Level], prolongations: list[Prolongation]):
        if len(prolongations) != len(levels) - 1:
            raise ValueError("need one prolongation per consecutive level pair")
        self.levels = levels
        self.prolongations = prolongations
        self._by_j = {lv.j: i for i, lv in enumerate(levels)}

    @property
    def dim(self) -> int:
        return self.levels[0].mesh.dim

    @property
    def j_min(self) -> int:
        return self.levels[0].j

    @property
    def j_max(self) -> int:
        return self.levels[-1].j

    def level(self, j: int) -> Level:
        return self.levels[self._by_j[j]]

    def prolongation(self, j_fine: int) -> Prolongation:
        """Prolongation from level j_fine-1 to level j_fine."""
        return self.prolongations[self._by_j[j_fine] - 1]

    def embed(self, j_fine: int, z_coarse: np.ndarray) -> np.ndarray:
        """Embed coefficients from level j_fine-1 into level j_fine."""
        return self.prolongation(j_fine).P @ z_coarse

    def l2_project_coarse(self, j_fine: int, z_fine: np.ndarray) -> np.ndarray:
        """L2-orthogonal projection onto level j_fine-1.

        Realizes pi_2h z = M_2h^{-1} P^T M_h z with a prefactored coarse
        mass solve, so orthogonality holds to solver tolerance.
        """
        pr = self.prolongation(j_fine)
        fine = self.level(j_fine).ops
        coarse = self.level(j_fine - 1).ops
        return coarse.mass_solve(pr.P.T @ (fine.M @ z_fine))


def _mesh_level(dim: int, j: int) -> MeshLevel:
    n = 2**j
    if dim == 1:
        n_nodes = n + 1
        idx = np.arange(n_nodes)
        interior = idx[(idx > 0) & (idx < n)]
    else:
        npts = n + 1
        n_nodes = npts * npts
        idx = np.arange(n_nodes)
        ix = idx % npts
        iy = idx // npts
        interior = idx[(ix > 0) & (ix < n) & (iy > 0) & (iy < n)]
    return MeshLevel(dim=dim, j=j, n_nodes=n_nodes,
                     n_interior=interior.size, interior_map=interior)


def _assemble_1d(level: MeshLevel) -> FEOperators:
    n = 2**level.j
    h = level.h
    main = np.full(n + 1, 2 * h / 3)
    main[0] = main[-1] = h / 3
    off = np.full(n, h / 6)
    M = sp.diags([off, main, off], [-1, 0, 1]).tocsc()
    A = sp.diags([np.full(n, -1 / h), np.full(n + 1, 2 / h),
                  np.full(n, -1 / h)], [-1, 0, 1]).tocsc()
    return _restrict(level, M, A)


def _assemble_2d(level: MeshLevel) -> FEOperators:
    n = 2**level.j
    h = level.h
    npts = n + 1
    ix, iy = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    v00 = (iy * npts + ix).ravel()
    v10 = v00 + 1
    v01 = v00 + npts
    v11 = v01 + 1
    # two triangles per square, diagonal (i,j)-(i+1,j+1)
    tris = np.vstack([np.stack([v00, v10, v11], axis=1),
                      np.stack([v00, v11, v01], axis=1)])
    coords = np.column_stack([(np.arange(npts * npts) % npts) * h,
                              (np.arange(npts * npts) // npts) * h])
    x = coords[tris]
    d1 = x[:, 1] - x[:, 0]
    d2 = x[:, 2] - x[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    area = 0.5 * np.abs(det)
    g1 = np.stack([x[:, 1, 1] - x[:, 2, 1], x[:, 2, 0] - x[:, 1, 0]], 1) / det[:, None]
    g2 = np.stack([x[:, 2, 1] - x[:, 0, 1], x[:, 0, 0] - x[:, 2, 0]], 1) / det[:, None]
    g3 = np.stack([x[:, 0, 1] - x[:, 1, 1], x[:, 1, 0] - x[:, 0, 0]], 1) / det[:, None]
    grads = np.stack([g1, g2, g3], axis=1)
    k_loc = np.einsum("tad,tbd->tab", grads, grads) * area[:, None, None]
    m_loc = (np.ones((3, 3)) + np.eye(3))[None] * (area / 12.0)[:, None, None]
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    shape = (npts * npts, npts * npts)
    A = sp.coo_matrix((k_loc.ravel(), (rows, cols)), shape=shape).tocsc()
    M = sp.coo_matrix((m_loc.ravel(), (rows, cols)), shape=shape).tocsc()
    return _restrict(level, M, A)


def _restrict(level: MeshLevel, M: sp.csc_matrix, A: sp.csc_matrix) -> FEOperators:
    interior = level.interior_map
    Mcsr = M.tocsr()
    B = Mcsr[interior]
    M0 = B[:, interior].tocsc()
    A0 = A.tocsr()[interior][:, interior].tocsc()
    return FEOperators(M=M, M0=M0, A0=A0, B=B.tocsr())


def assemble_operators(level: MeshLevel) -> FEOperators:
    """Assemble the full set of P1 operators on one level."""
    if level.dim == 1:
        return _assemble_1d(level)
    return _assemble_2d(level)


def _prolongation_1d(j_fine: int) -> sp.csr_matrix:
    nc = 2 ** (j_fine - 1)
    nf = 2 * nc
    rows, cols, vals = [], [], []
    coarse = np.arange(nc + 1)
    rows.append(2 * coarse)
    cols.append(coarse)
    vals.append(np.ones(nc + 1))
    mids = np.arange(nc)
    for shift in (0, 1):
        rows.append(2 * mids + 1)
        cols.append(mids + shift)
        vals.append(np.full(nc, 0.5))
    return sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nf + 1, nc + 1)).tocsr()


def _prolongation_2d(j_fine: int) -> sp.csr_matrix:
    # Tensor indices: fine node (fx,fy); coarse node (cx,cy).  Values follow
    # P1 interpolation on the coarse triangulation: edge midpoints average
    # the two edge endpoints; square centers lie on the coarse diagonal.
    nc = 2 ** (j_fine - 1)
    nf = 2 * nc
    npc, npf = nc + 1, nf + 1

    def fid(fx, fy):
        return fy * npf + fx

    def cid(cx, cy):
        return cy * npc + cx

    rows, cols, vals = [], [], []
    cx, cy = np.meshgrid(np.arange(npc), np.arange(npc), indexing="xy")
    cx, cy = cx.ravel(), cy.ravel()
    rows.append(fid(2 * cx, 2 * cy)); cols.append(cid(cx, cy))
    vals.append(np.ones(cx.size))
    # horizontal edge midpoints
    ex, ey = np.meshgrid(np.arange(nc), np.arange(npc), indexing="xy")
    ex, ey = ex.ravel(), ey.ravel()
    for shift in (0, 1):
        rows.append(fid(2 * ex + 1, 2 * ey)); cols.append(cid(ex + shift, ey))
        vals.append(np.full(ex.size, 0.5))
    # vertical edge midpoints
    ex, ey = np.meshgrid(np.arange(npc), np.arange(nc), indexing="xy")
    ex, ey = ex.ravel(), ey.ravel()
    for shift in (0, 1):
        rows.append(fid(2 * ex, 2 * ey + 1)); cols.append(cid(ex, ey + shift))
        vals.append(np.full(ex.size, 0.5))
    # square centers: midpoint of the (cx,cy)-(cx+1,cy+1) diagonal
    sx, sy = np.meshgrid(np.arange(nc), np.arange(nc), indexing="xy")
    sx, sy = sx.ravel(), sy.ravel()
    for shift in (0, 1):
        rows.append(fid(2 * sx + 1, 2 * sy + 1))
        cols.append(cid(sx + shift, sy + shift))
        vals.append(np.full(sx.size, 0.5))
    return sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(npf * npf, npc * npc)).tocsr()


def build_prolongation(coarse: MeshLevel, fine: MeshLevel) -> Prolongation:
    """Embedding matrix of V_2h into V_h plus its interior restriction."""
    if fine.j != coarse.j + 1 or fine.dim != coarse.dim:
        raise ValueError("levels must be consecutive refinements")
    if fine.dim == 1:
        P = _prolongation_1d(fine.j)
    else:
        P = _prolongation_2d(fine.j)
    P0 = P[fine.interior_map][:, coarse.interior_map].tocsr()
    return Prolongation(P=P, P0=P0)


def build_hierarchy(dim: int, j_min: int, j_max: int,
                    max_nodes: int = DEFAULT_MAX_NODES) -> MeshHierarchy:
    """Build a fully assembled nested hierarchy of uniform dyadic levels."""
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim}")
    if j_min < 2:
        raise ValueError("j_min < 2: coarsest grid carries too few interior nodes")
    if j_max < j_min:
        raise ValueError("j_max must be >= j_min")
    top = (2**j_max + 1) ** dim
    if top > max_nodes:
        raise ValueError(
            f"level {j_max} needs {top} nodes, over the cap of {max_nodes}")
    levels = []
    for j in range(j_min, j_max + 1):
        mesh = _mesh_level(dim, j)
        levels.append(Level(mesh=mesh, ops=assemble_operators(mesh)))
    prolongations = [
        build_prolongation(levels[i].mesh, levels[i + 1].mesh)
        for i in range(len(levels) - 1)
    ]
    return MeshHierarchy(levels, prolongations)
