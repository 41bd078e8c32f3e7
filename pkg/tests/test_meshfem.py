import math

import numpy as np
import pytest
import scipy.linalg as la

from fracmg.meshfem import build_hierarchy, build_prolongation


@pytest.fixture(scope="module")
def hier1d():
    return build_hierarchy(1, 3, 6)


@pytest.fixture(scope="module")
def hier2d():
    return build_hierarchy(2, 3, 5)


def test_node_counts_1d():
    h = build_hierarchy(1, 4, 4)
    lv = h.level(4)
    assert lv.mesh.n_nodes == 17
    assert lv.mesh.n_interior == 15


def test_node_counts_2d():
    h = build_hierarchy(2, 5, 5)
    lv = h.level(5)
    assert lv.mesh.n_nodes == 1089
    assert lv.mesh.n_interior == 961


def test_dyadic_nesting_of_coordinates():
    h = build_hierarchy(1, 3, 5)
    coarse = set(map(float, h.level(3).mesh.coordinates()[:, 0]))
    for j in (4, 5):
        fine = set(map(float, h.level(j).mesh.coordinates()[:, 0]))
        assert coarse <= fine


def test_invalid_arguments():
    with pytest.raises(ValueError):
        build_hierarchy(3, 3, 4)
    with pytest.raises(ValueError):
        build_hierarchy(1, 1, 4)
    with pytest.raises(ValueError):
        build_hierarchy(2, 3, 12, max_nodes=10000)


def test_1d_stiffness_is_textbook():
    h = build_hierarchy(1, 2, 2)  # h = 1/4
    A0 = h.level(2).ops.A0.toarray()
    assert np.allclose(np.diag(A0), 8.0)
    assert np.allclose(np.diag(A0, 1), -4.0)


def test_mass_row_sums_partition_of_unity(hier1d, hier2d):
    for hier in (hier1d, hier2d):
        for lv in hier.levels:
            rs = np.asarray(lv.ops.M.sum(axis=1)).ravel()
            assert abs(rs.sum() - 1.0) < 1e-12  # integrates the constant 1
            interior = lv.mesh.interior_map
            if lv.mesh.dim == 1:
                assert np.allclose(rs[interior], lv.mesh.h)
            else:
                assert np.allclose(rs[interior], lv.mesh.h**2)


def test_2d_interior_stiffness_row_sums_vanish():
    # constants are locally in the kernel of the Dirichlet form: rows of A0
    # whose stencil does not touch the boundary sum to zero
    h = build_hierarchy(2, 2, 2)  # h = 1/4
    lv = h.level(2)
    n = 4
    r = lv.ops.A0 @ np.ones(lv.mesh.n_interior)
    ix = lv.mesh.interior_map % (n + 1)
    iy = lv.mesh.interior_map // (n + 1)
    fully_interior = (ix > 1) & (ix < n - 1) & (iy > 1) & (iy < n - 1)
    assert fully_interior.any()
    assert np.allclose(r[fully_interior], 0.0, atol=1e-13)


def test_operator_symmetry_and_positivity(hier1d, hier2d):
    for hier in (hier1d, hier2d):
        for lv in hier.levels:
            for mat in (lv.ops.M, lv.ops.M0, lv.ops.A0):
                dense = mat.toarray()
                assert np.allclose(dense, dense.T, atol=1e-14)
            assert la.eigh(lv.ops.M.toarray(), eigvals_only=True)[0] > 0
            assert la.eigh(lv.ops.A0.toarray(), eigvals_only=True)[0] > 0


def test_cross_mass_is_interior_rows_of_mass(hier2d):
    lv = hier2d.level(4)
    assert np.allclose(lv.ops.B.toarray(),
                       lv.ops.M.toarray()[lv.mesh.interior_map])


def test_prolongation_reproduces_constants(hier1d, hier2d):
    for hier in (hier1d, hier2d):
        for j in range(hier.j_min + 1, hier.j_max + 1):
            P = hier.prolongation(j).P
            assert np.allclose(P @ np.ones(P.shape[1]), 1.0)


def test_prolongation_identity_rows(hier2d):
    # fine nodes coinciding with coarse nodes carry a single unit entry
    j = 4
    P = hier2d.prolongation(j).P.tocsr()
    fine = hier2d.level(j).mesh
    coarse = hier2d.level(j - 1).mesh
    fc = fine.coordinates()
    cc = coarse.coordinates()
    for ci in range(0, coarse.n_nodes, 7):
        fi = np.where((fc == cc[ci]).all(axis=1))[0][0]
        row = P[fi].toarray().ravel()
        assert row[ci] == 1.0 and np.count_nonzero(row) == 1


def test_projection_restores_embedded_functions(hier1d, hier2d):
    rng = np.random.default_rng(7)
    for hier in (hier1d, hier2d):
        j = hier.j_max
        w = rng.standard_normal(hier.level(j - 1).mesh.n_nodes)
        z = hier.embed(j, w)
        assert np.allclose(hier.l2_project_coarse(j, z), w, atol=1e-11)
        ones = np.ones(hier.level(j).mesh.n_nodes)
        assert np.allclose(hier.l2_project_coarse(j, ones), 1.0, atol=1e-12)


def test_projection_orthogonality_against_dense_oracle():
    hier = build_hierarchy(1, 4, 5)
    rng = np.random.default_rng(3)
    z = rng.standard_normal(hier.level(5).mesh.n_nodes)
    w = hier.l2_project_coarse(5, z)
    # oracle: assemble the coarse Gram system densely and solve
    P = hier.prolongation(5).P.toarray()
    Mf = hier.level(5).ops.M.toarray()
    Mc = hier.level(4).ops.M.toarray()
    w_oracle = la.solve(Mc, P.T @ (Mf @ z), assume_a="pos")
    assert np.allclose(w, w_oracle, atol=1e-13)
    # orthogonality residual <z - Ew, Ev> for all coarse v
    resid = P.T @ (Mf @ (z - P @ w))
    assert np.max(np.abs(resid)) <= 1e-12 * np.linalg.norm(z)


def test_projection_idempotent_and_self_adjoint(hier2d):
    rng = np.random.default_rng(11)
    j = hier2d.j_max
    ops = hier2d.level(j).ops
    n = hier2d.level(j).mesh.n_nodes

    def epi(z):
        return hier2d.embed(j, hier2d.l2_project_coarse(j, z))

    z, w = rng.standard_normal((2, n))
    assert np.allclose(epi(epi(z)), epi(z), atol=1e-11)
    assert abs(ops.inner(epi(z), w) - ops.inner(z, epi(w))) <= 1e-12


def test_1d_dirichlet_eigenvalues_closed_form():
    # consistent-mass P1 eigenvalues: (6/h^2) (1-cos(k pi h)) / (2+cos(k pi h))
    hier = build_hierarchy(1, 5, 5)
    lv = hier.level(5)
    lam = la.eigh(lv.ops.A0.toarray(), lv.ops.M0.toarray(), eigvals_only=True)
    h = lv.mesh.h
    k = np.arange(1, lv.mesh.n_interior + 1)
    closed = (6 / h**2) * (1 - np.cos(k * math.pi * h)) / (2 + np.cos(k * math.pi * h))
    assert np.allclose(lam, np.sort(closed), rtol=1e-10)
