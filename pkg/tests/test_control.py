import numpy as np
import pytest
import scipy.linalg as la

from fracmg.control import (ControlProblem, HessianOp, analytic_target,
                            assemble_rhs, cg_solve, load_target_csv, pcg,
                            save_target_csv)
from fracmg.fracop import (FractionalSolveOp, compute_eigensystem,
                           exact_solve_matrix, quad_params,
                           quad_rule_for_spacing)
from fracmg.meshfem import build_hierarchy


@pytest.fixture(scope="module")
def level1d():
    return build_hierarchy(1, 5, 5).level(5)


def make_problem(level, s=0.5, beta=0.1, modes=(1,), c_q=1.0):
    K = FractionalSolveOp(level, quad_params(s, level.mesh.h, c_q))
    u_d = analytic_target(level, modes)
    return ControlProblem(s=s, beta=beta, level=level, K=K, u_d=u_d)


def test_apply_H_zero(level1d):
    H = HessianOp(make_problem(level1d))
    assert np.all(H.apply(np.zeros(level1d.mesh.n_nodes)) == 0.0)


def test_hessian_gram_eigen_identity(level1d):
    # with the exact spectral K, <H phi_k, phi_j> = (lambda_k^{-2s}+beta) d_kj
    s, beta = 0.6, 0.05
    eig = compute_eigensystem(level1d)
    Kmat = exact_solve_matrix(eig, s)
    ops = level1d.ops
    Hgram = Kmat.T @ (ops.M0.toarray() @ Kmat) + beta * ops.M.toarray()
    for k in (0, 2, 7):
        for jj in (0, 2, 7):
            z = np.zeros(level1d.mesh.n_nodes)
            z[level1d.mesh.interior_map] = eig.eigenvectors[:, k]
            w = np.zeros(level1d.mesh.n_nodes)
            w[level1d.mesh.interior_map] = eig.eigenvectors[:, jj]
            expect = (eig.eigenvalues[k]**(-2 * s) + beta) * (k == jj)
            assert z @ Hgram @ w == pytest.approx(expect, abs=1e-10)


def test_gram_symmetry_and_coercivity(level1d):
    rng = np.random.default_rng(17)
    H = HessianOp(make_problem(level1d, s=0.3, beta=0.01))
    ops = level1d.ops
    for _ in range(20):
        z, w = rng.standard_normal((2, level1d.mesh.n_nodes))
        sym_gap = abs(H.gram_inner(z, w) - H.gram_inner(w, z))
        assert sym_gap <= 1e-11 * np.linalg.norm(z) * np.linalg.norm(w)
        assert H.gram_inner(z, z) >= H.beta * ops.inner(z, z)


def test_gram_matrix_matches_apply(level1d):
    H = HessianOp(make_problem(level1d, s=0.4, beta=0.2))
    G = H.gram_matrix()
    rng = np.random.default_rng(2)
    z = rng.standard_normal(level1d.mesh.n_nodes)
    assert np.allclose(G @ z, level1d.ops.M @ H.apply(z), atol=1e-12)


def test_rhs_zero_target(level1d):
    prob = make_problem(level1d)
    prob.u_d = np.zeros_like(prob.u_d)
    assert np.all(assemble_rhs(prob) == 0.0)


def test_rhs_spectral_oracle(level1d):
    # u_d = embedded first eigenvector with exact-eigen K -> lambda_1^{-s} phi_1
    s = 0.5
    eig = compute_eigensystem(level1d)
    Kmat = exact_solve_matrix(eig, s)
    ops = level1d.ops
    u_d = np.zeros(level1d.mesh.n_nodes)
    u_d[level1d.mesh.interior_map] = eig.eigenvectors[:, 0]
    rhs = ops.mass_solve(ops.B.T @ (eig.eigenvectors
                                    @ (eig.eigenvalues**-s
                                       * (eig.eigenvectors.T @ (ops.B @ u_d)))))
    # M^{-1} B^T phi equals the embedded interior function exactly, so the
    # V_h representation of K* phi_1 is lambda_1^{-s} times the embedding
    assert np.allclose(rhs, eig.eigenvalues[0]**-s * u_d, atol=1e-11)
    del Kmat


def test_cg_zero_rhs(level1d):
    H = HessianOp(make_problem(level1d))
    x, rep = cg_solve(H, np.zeros(level1d.mesh.n_nodes))
    assert rep.iterations == 0 and rep.converged
    assert np.all(x == 0.0)


def test_cg_against_dense_direct(level1d):
    prob = make_problem(level1d, s=0.5, beta=0.1, modes=(1,))
    H = HessianOp(prob)
    rhs = assemble_rhs(prob)
    x, rep = cg_solve(H, rhs, tol=1e-12, max_iter=400)
    assert rep.converged
    dense = la.solve(H.gram_matrix(), level1d.ops.M @ rhs, assume_a="pos")
    assert np.linalg.norm(x - dense) <= 1e-8 * np.linalg.norm(dense)
    assert rep.residual_history[-1] <= 1e-12


def test_cg_iterations_scale_invariant(level1d):
    prob = make_problem(level1d, s=0.5, beta=0.01)
    H = HessianOp(prob)
    rhs = assemble_rhs(prob)
    _, rep1 = cg_solve(H, rhs, tol=1e-10)
    _, rep2 = cg_solve(H, 37.5 * rhs, tol=1e-10)
    assert abs(rep1.iterations - rep2.iterations) <= 1


def test_cg_nonconvergence_report(level1d):
    prob = make_problem(level1d, s=0.5, beta=1e-6)
    H = HessianOp(prob)
    rng = np.random.default_rng(23)
    rhs = rng.standard_normal(level1d.mesh.n_nodes)
    _, rep = cg_solve(H, rhs, tol=1e-14, max_iter=2)
    assert not rep.converged and rep.iterations == 2


def test_pcg_rejects_bad_tolerance(level1d):
    H = HessianOp(make_problem(level1d))
    with pytest.raises(ValueError):
        pcg(H.apply, np.ones(level1d.mesh.n_nodes), level1d, tol=2.0, max_iter=5)


def test_target_csv_roundtrip(tmp_path, level1d):
    vals = analytic_target(level1d, (3,))
    path = tmp_path / "target.csv"
    save_target_csv(path, level1d, vals)
    back = load_target_csv(path, level1d)
    assert np.array_equal(vals, back)
    other = build_hierarchy(1, 4, 4).level(4)
    with pytest.raises(ValueError):
        load_target_csv(path, other)


def test_analytic_target_2d_paper_data():
    level = build_hierarchy(2, 4, 4).level(4)
    vals = analytic_target(level, (4, 3))
    coords = level.mesh.coordinates()
    expect = np.sin(4 * np.pi * coords[:, 0]) * np.sin(3 * np.pi * coords[:, 1])
    assert np.allclose(vals, expect)
    with pytest.raises(ValueError):
        analytic_target(level, (4,))
