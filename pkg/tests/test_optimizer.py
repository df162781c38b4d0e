"""Gauss-Newton machinery: inner solve oracles, fixed points, loss descent."""

import csv

import numpy as np
import pytest
import scipy.sparse

from mfgsolvers import collocation as C
from mfgsolvers import kernels as K
from mfgsolvers import linsys as L
from mfgsolvers import optimizer as O
from mfgsolvers import problems as P
from mfgsolvers.errors import NonFiniteObjective
from mfgsolvers.pipeline import default_drift, default_drift_dx, default_potential

SPEC_1D = P.make_1d_stationary(default_potential, default_drift, default_drift_dx)


def _gp_system(M=12, gamma=1.0, beta=10.0, eta=1e-6):
    kernel = K.periodic_kernel_1d(0.6)
    pts = C.sample_uniform_grid(1, M)
    phi, psi = C.build_functionals(SPEC_1D, pts)
    fu = L.build_gram_factor(kernel, phi, eta)
    fm = L.build_gram_factor(kernel, psi, eta)
    return O.MfgSystem(SPEC_1D, pts, phi, psi, fu, fm, gamma, beta), phi, psi


def _random_state(phi, psi, seed, scale=0.3):
    rng = np.random.default_rng(seed)
    return O.SolverState(
        z=scale * rng.standard_normal(phi.size),
        rho=scale * rng.standard_normal(psi.size) + 1.0,
        lam=float(rng.standard_normal()),
    )


def test_solver_config_validation():
    with pytest.raises(ValueError):
        O.SolverConfig(alpha=0.0)
    with pytest.raises(ValueError):
        O.SolverConfig(alpha=1.5)
    with pytest.raises(ValueError):
        O.SolverConfig(gamma=-1.0)
    with pytest.raises(ValueError):
        O.SolverConfig(max_iters=0)


def test_init_state_unit_density_on_identity_blocks():
    _, phi, psi = _gp_system()
    cfg = O.SolverConfig()
    s = O.init_state(phi, psi, True, cfg)
    np.testing.assert_array_equal(s.z, 0.0)
    assert s.lam == 0.0
    id_slice = psi.slices[0]
    np.testing.assert_array_equal(s.rho[id_slice], 1.0)
    np.testing.assert_array_equal(s.rho[id_slice.stop :], 0.0)
    with pytest.raises(ValueError):
        O.init_state(phi, psi, True, O.SolverConfig(init_mode="fancy"))


def test_gaussian_init_deterministic_per_seed():
    _, phi, psi = _gp_system()
    a = O.init_state(phi, psi, True, O.SolverConfig(seed=4, init_mode=O.INIT_GAUSSIAN))
    b = O.init_state(phi, psi, True, O.SolverConfig(seed=4, init_mode=O.INIT_GAUSSIAN))
    c = O.init_state(phi, psi, True, O.SolverConfig(seed=5, init_mode=O.INIT_GAUSSIAN))
    np.testing.assert_array_equal(a.pack(), b.pack())
    assert not np.array_equal(a.pack(), c.pack())


# -- inner solve against the dense normal equations --------------------------

def test_inner_solve_matches_dense_normal_equations():
    """The residual-space solve equals (P + A^T W A)^{-1} A^T W c, rel <= 1e-10."""
    system, phi, psi = _gp_system(M=10, gamma=2.0, beta=5.0)
    state = _random_state(phi, psi, seed=8)
    hat = system.inner_solve(state)

    A_z, A_rho, a_lam, c_vec, w = system._rows(state)
    A = np.hstack([A_z.toarray(), A_rho.toarray(), a_lam[:, None]])
    n_z, n_rho = phi.size, psi.size
    P_dense = np.zeros((n_z + n_rho + 1,) * 2)
    P_dense[:n_z, :n_z] = np.linalg.inv(system.quad_u.regularized)
    P_dense[n_z : n_z + n_rho, n_z : n_z + n_rho] = np.linalg.inv(system.quad_m.regularized)
    P_dense[-1, -1] = 1.0
    lhs = P_dense + A.T @ (w[:, None] * A)
    rhs = A.T @ (w * c_vec)
    theta = np.linalg.solve(lhs, rhs)
    got = hat.pack()
    rel = np.linalg.norm(got - theta) / np.linalg.norm(theta)
    assert rel < 1e-10, f"dense-vs-residual-space mismatch {rel:.3e}"


def test_inner_solve_satisfies_normal_equation_residual():
    system, phi, psi = _gp_system(M=14, gamma=1.0, beta=100.0)
    for seed in range(3):
        state = _random_state(phi, psi, seed)
        hat = system.inner_solve(state)
        assert system.normal_equation_residual(state, hat) < 1e-10


def test_linear_problem_one_step_fixed_point():
    """With only linear rows active, a full GN step is a fixed point to 1e-10."""
    # gamma = 0 drops the nonlinear residual rows; the normalization rows are
    # linear, so the inner minimizer is exact and iterating does not move it.
    system, phi, psi = _gp_system(M=10, gamma=0.0, beta=50.0)
    state = _random_state(phi, psi, seed=2)
    hat = system.inner_solve(state)
    again = system.inner_solve(hat)
    num = np.linalg.norm(again.pack() - hat.pack())
    den = np.linalg.norm(hat.pack()) + 1e-300
    assert num / den < 1e-10, f"fixed-point violation {num / den:.3e}"


def test_inner_solve_with_all_zero_weights_returns_zero_state():
    system, phi, psi = _gp_system(gamma=0.0, beta=0.0)
    state = _random_state(phi, psi, seed=1)
    hat = system.inner_solve(state)
    np.testing.assert_array_equal(hat.pack(), 0.0)


# -- loss bookkeeping --------------------------------------------------------

def test_loss_terms_are_consistent():
    system, phi, psi = _gp_system(M=8, gamma=3.0, beta=7.0)
    state = _random_state(phi, psi, seed=9)
    total, quad, pde, norm = system.loss(state)
    assert total == pytest.approx(quad + pde + norm, rel=1e-12)
    U, M, _ = system.values(state)
    R, _, _, _ = P.interior_residual_batch(SPEC_1D, system.pts.interior, U, M, state.lam)
    assert pde == pytest.approx(3.0 * float(np.sum(R**2)), rel=1e-12)
    expected_norm = 7.0 * (
        float(np.mean(U[:, 0])) ** 2 + (float(np.mean(M[:, 0])) - 1.0) ** 2
    )
    assert norm == pytest.approx(expected_norm, rel=1e-12)
    assert quad > 0.0


def test_gauss_newton_descends_on_the_1d_problem():
    system, phi, psi = _gp_system(M=24, gamma=1.0, beta=1e4, eta=1e-6)
    cfg = O.SolverConfig(gamma=1.0, beta=1e4, alpha=0.4, max_iters=8)
    state0 = O.init_state(phi, psi, True, cfg)
    state, hist = O.gauss_newton_run(system, state0, cfg)
    assert len(hist.total) == 9
    assert hist.total[-1] < hist.total[0]
    assert O.objective(state, system) == pytest.approx(hist.total[-1])


def test_gauss_newton_debug_mode_checks_inner_solve():
    system, phi, psi = _gp_system(M=10)
    cfg = O.SolverConfig(alpha=1.0, max_iters=2, debug=True)
    state0 = O.init_state(phi, psi, True, cfg)
    O.gauss_newton_run(system, state0, cfg)  # must not raise


def test_loss_tol_stops_early():
    system, phi, psi = _gp_system(M=16, gamma=1.0, beta=1e4)
    cfg = O.SolverConfig(gamma=1.0, beta=1e4, alpha=0.4, max_iters=50, loss_tol=1e-3)
    state0 = O.init_state(phi, psi, True, cfg)
    _, hist = O.gauss_newton_run(system, state0, cfg)
    assert len(hist.total) < 51


def test_non_finite_objective_reports_iteration():
    system, phi, psi = _gp_system(M=8)
    # a huge gradient value overflows the exponential in the 1D residual
    bad = O.SolverState(
        z=np.full(phi.size, 1e4), rho=np.ones(psi.size), lam=0.0
    )
    with pytest.raises(NonFiniteObjective):
        O.gauss_newton_run(system, bad, O.SolverConfig())


def test_loss_history_csv(tmp_path):
    h = O.LossHistory()
    h.append(3.0, 1.0, 1.5, 0.5)
    h.append(2.0, 1.0, 0.75, 0.25)
    path = tmp_path / "loss.csv"
    h.export_csv(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["iteration", "total", "quadratic", "pde_penalty", "norm_penalty"]
    assert [float(v) for v in rows[2][1:]] == [2.0, 1.0, 0.75, 0.25]


def test_cross_block_products_match_dense():
    """_cross returns A P^{-1} A^T for both provider kinds."""
    system, phi, psi = _gp_system(M=8)
    rng = np.random.default_rng(12)
    A_blk = scipy.sparse.csr_matrix(rng.standard_normal((5, phi.size)))
    B, apply_t = O._cross(system.quad_u, A_blk)
    dense = A_blk.toarray() @ system.quad_u.regularized @ A_blk.toarray().T
    np.testing.assert_allclose(B, dense, atol=1e-10)
    y = rng.standard_normal(5)
    np.testing.assert_allclose(
        apply_t(y), system.quad_u.regularized @ (A_blk.toarray().T @ y), atol=1e-10
    )

    Af = rng.standard_normal((phi.size, 6))
    ff = L.qr_ridge_factor(Af, 0.1)
    B2, apply2 = O._cross(ff, A_blk)
    dense2 = A_blk.toarray() @ (Af @ Af.T + 0.1 * np.eye(phi.size)) @ A_blk.toarray().T
    np.testing.assert_allclose(B2, dense2, atol=1e-9)
    np.testing.assert_allclose(
        apply2(y), (Af @ Af.T + 0.1 * np.eye(phi.size)) @ (A_blk.toarray().T @ y), atol=1e-9
    )
    with pytest.raises(TypeError):
        O._cross(object(), A_blk)
