import math

import numpy as np
import pytest
import scipy.linalg as la
import scipy.sparse.linalg as spla

from fracmg.fracop import (apply_K_exact, compute_eigensystem,
                           exact_solve_matrix, FractionalSolveOp, quad_params,
                           quad_rule_for_spacing, scalar_quadrature)
from fracmg.meshfem import build_hierarchy


def test_node_range_integers():
    rule = quad_rule_for_spacing(0.5, 0.5)
    assert rule.n_plus == 20 and rule.n_minus == 20
    rule = quad_rule_for_spacing(0.25, 0.5)
    assert rule.n_plus == 40 and rule.n_minus == 14


@pytest.mark.parametrize("s", [0.1, 0.25, 0.4, 0.5, 0.7, 0.9])
@pytest.mark.parametrize("m", [0.15, 0.3, 0.6])
def test_node_range_symmetry_and_weight_positivity(s, m):
    rule = quad_rule_for_spacing(s, m)
    mirror = quad_rule_for_spacing(1.0 - s, m)
    assert rule.n_plus == mirror.n_minus
    assert np.all(rule.weights > 0)


def test_rejects_degenerate_order():
    for s in (0.0, 1.0, -0.2, 1.4):
        with pytest.raises(ValueError):
            quad_rule_for_spacing(s, 0.3)
    with pytest.raises(ValueError):
        quad_params(0.5, 1.5)
    with pytest.raises(ValueError):
        quad_params(0.5, 0.25, c_q=0.0)


def test_mesh_tied_spacing():
    rule = quad_params(0.5, 2.0**-6, c_q=1.0)
    assert rule.m == pytest.approx(1.0 / math.log(64.0))


def test_scalar_quadrature_values():
    rule = quad_rule_for_spacing(0.5, 0.1)
    assert scalar_quadrature(rule, 1.0) == pytest.approx(1.0, abs=1e-6)
    assert scalar_quadrature(rule, 4.0) == pytest.approx(0.5, abs=1e-6)


def test_scalar_quadrature_error_decay_tenfold():
    for s in (0.25, 0.5, 0.75):
        for lam in (2.0, 50.0, 1e4):
            e_coarse = abs(scalar_quadrature(quad_rule_for_spacing(s, 0.4), lam)
                           - lam**-s)
            e_fine = abs(scalar_quadrature(quad_rule_for_spacing(s, 0.2), lam)
                         - lam**-s)
            assert e_fine <= e_coarse / 10.0


def test_scalar_quadrature_exponential_convergence():
    hier = build_hierarchy(1, 4, 4)
    lv = hier.level(4)
    lam_min = la.eigh(lv.ops.A0.toarray(), lv.ops.M0.toarray(),
                      eigvals_only=True)[0]
    for s in (0.25, 0.5, 0.75):
        for lam in (lam_min, 10.0, 1e3, 1e6):
            errs = [abs(scalar_quadrature(quad_rule_for_spacing(s, m), lam)
                        - lam**-s) for m in (0.4, 0.2, 0.1)]
            assert errs[1] < errs[0] and errs[2] < errs[1]
            assert errs[2] < 1e-8


@pytest.fixture(scope="module")
def level1d():
    return build_hierarchy(1, 6, 6).level(6)


def test_apply_K_linearity_zero(level1d):
    K = FractionalSolveOp(level1d, quad_params(0.5, level1d.mesh.h))
    out = K.apply(np.zeros(level1d.mesh.n_nodes))
    assert np.all(out == 0.0)


def test_apply_K_matches_eigenvector_oracle(level1d):
    s = 0.5
    K = FractionalSolveOp(level1d, quad_rule_for_spacing(s, 0.05))
    eig = compute_eigensystem(level1d)
    for k in (0, 3, 10):
        z = np.zeros(level1d.mesh.n_nodes)
        z[level1d.mesh.interior_map] = eig.eigenvectors[:, k]
        out = K.apply(z)
        expect = eig.eigenvalues[k]**-s * eig.eigenvectors[:, k]
        assert np.allclose(out, expect, atol=1e-8)


def test_apply_K_self_adjoint(level1d):
    rng = np.random.default_rng(5)
    ops = level1d.ops
    K = FractionalSolveOp(level1d, quad_params(0.3, level1d.mesh.h))
    for _ in range(10):
        z, w = rng.standard_normal((2, level1d.mesh.n_nodes))
        lhs = K.apply(z) @ (ops.B @ w)
        rhs = K.apply(w) @ (ops.B @ z)
        assert abs(lhs - rhs) <= 1e-12 * np.linalg.norm(z) * np.linalg.norm(w)


def test_exact_oracle_eigenvector_identity(level1d):
    eig = compute_eigensystem(level1d)
    z = np.zeros(level1d.mesh.n_nodes)
    z[level1d.mesh.interior_map] = eig.eigenvectors[:, 2]
    out = apply_K_exact(eig, 0.4, z)
    assert np.allclose(out, eig.eigenvalues[2]**-0.4 * eig.eigenvectors[:, 2],
                       atol=1e-12)


def test_exact_oracle_s_one_is_direct_solve(level1d):
    rng = np.random.default_rng(1)
    eig = compute_eigensystem(level1d)
    z = rng.standard_normal(level1d.mesh.n_nodes)
    direct = spla.spsolve(level1d.ops.A0.tocsc(), level1d.ops.B @ z)
    assert np.allclose(apply_K_exact(eig, 1.0, z), direct, atol=1e-10)


def test_eigensystem_cap():
    level = build_hierarchy(2, 5, 5).level(5)
    with pytest.raises(ValueError):
        compute_eigensystem(level, cap=100)


def _op_norm_m_weighted(Kmat, level):
    quad = Kmat.T @ (level.ops.M0.toarray() @ Kmat)
    lam = la.eigh(0.5 * (quad + quad.T), level.ops.M.toarray(),
                  eigvals_only=True)
    return math.sqrt(max(lam[-1], 0.0))


def test_quadrature_operator_close_to_oracle(level1d):
    for s in (0.3, 0.5, 0.7):
        K = FractionalSolveOp(level1d, quad_rule_for_spacing(s, 0.05))
        eig = compute_eigensystem(level1d)
        D = K.matrix() - exact_solve_matrix(eig, s)
        assert _op_norm_m_weighted(D, level1d) <= 1e-5


def test_operator_norm_uniformly_bounded():
    hier = build_hierarchy(1, 4, 7)
    for s in (0.25, 0.5, 0.75):
        norms = []
        for lv in hier.levels:
            K = FractionalSolveOp(lv, quad_params(s, lv.mesh.h))
            norms.append(_op_norm_m_weighted(K.matrix(), lv))
        assert max(norms) <= 2.0 * norms[0]


def test_dimension_checks(level1d):
    K = FractionalSolveOp(level1d, quad_params(0.5, level1d.mesh.h))
    with pytest.raises(ValueError):
        K.apply(np.zeros(3))
    with pytest.raises(ValueError):
        K.apply_adjoint_load(np.zeros(level1d.mesh.n_nodes))
