import numpy as np
import pytest
import scipy.linalg

from dasga.align import penalty_mask
from dasga.exceptions import InvalidParameterError, NumericalFailure
from dasga.sqp import (
    QuadraticAlignProblem,
    SqpOptions,
    SqpResult,
    _solve_kkt,
    constraints,
    convergence_diagnostic,
    devectorize,
    gradient_h,
    hessian_h,
    lagrangian_hessian,
    objective_h,
    solve,
    solve_global,
    vectorize,
    write_trace_csv,
)
from helpers import central_grad, central_jac, random_unit_columns, rel_err
from helpers import random_sqp_problem as random_problem


def test_vectorize_column_major():
    t = vectorize(np.array([[1.0, 2.0], [3.0, 4.0]]))
    np.testing.assert_array_equal(t, [1, 3, 2, 4])
    np.testing.assert_array_equal(devectorize(t), [[1, 2], [3, 4]])


def test_vectorize_roundtrip(rng):
    T = rng.standard_normal((5, 5))
    np.testing.assert_array_equal(devectorize(vectorize(T)), T)
    with pytest.raises(InvalidParameterError):
        devectorize(np.ones(5))
    with pytest.raises(InvalidParameterError):
        vectorize(np.ones((2, 3)))


def test_data_matrix_index_map(rng):
    R = 3
    P = rng.standard_normal((4, R))
    alpha = rng.standard_normal(R)
    prob = QuadraticAlignProblem.from_alignment(P, alpha, np.zeros(4), np.ones((R, R)), 1.0)
    for l in range(4):
        for i in range(R):
            for j in range(R):
                assert prob.A[l, j * R + i] == pytest.approx(P[l, i] * alpha[j])
    # A t reproduces P T alpha
    T = rng.standard_normal((R, R))
    np.testing.assert_allclose(prob.A @ vectorize(T), P @ T @ alpha, atol=1e-12)


def test_objective_at_zero(rng):
    prob = random_problem(rng, 3)
    t = np.zeros(9)
    assert objective_h(prob, t) == pytest.approx(prob.y @ prob.y)
    np.testing.assert_allclose(gradient_h(prob, t), -2 * prob.A.T @ prob.y)


def test_objective_without_labels(rng):
    R = 3
    A = rng.standard_normal((4, R * R))
    prob = QuadraticAlignProblem(A, np.zeros(4), np.ones(R * R), 1.0, R)
    t = rng.standard_normal(R * R)
    assert objective_h(prob, t) == pytest.approx(t @ (A.T @ A + np.eye(R * R)) @ t)


def test_hessian_simple_cases(rng):
    R = 2
    prob = QuadraticAlignProblem(np.zeros((3, 4)), np.zeros(3), np.ones(4), 1.0, R)
    np.testing.assert_array_equal(hessian_h(prob), 2 * np.eye(4))
    H = hessian_h(random_problem(rng, 3))
    np.testing.assert_array_equal(H, H.T)


@pytest.mark.parametrize("R", [2, 3, 4])
def test_derivatives_match_finite_differences(rng, R):
    for _ in range(10):
        prob = random_problem(rng, R)
        t = rng.standard_normal(R * R)
        g_fd = central_grad(lambda x: objective_h(prob, x), t)
        assert rel_err(gradient_h(prob, t), g_fd) <= 1e-5
        H_fd = central_jac(lambda x: gradient_h(prob, x), t)
        assert rel_err(hessian_h(prob), H_fd) <= 1e-4
        J_fd = central_jac(lambda x: constraints(x, R)[0], t)
        assert rel_err(constraints(t, R)[1], J_fd) <= 1e-5
        eta = rng.standard_normal(R)

        def lag_grad(x):
            g, J = constraints(x, R)
            return gradient_h(prob, x) - J.T @ eta

        assert rel_err(lagrangian_hessian(prob, eta), central_jac(lag_grad, t)) <= 1e-4


def test_constraints_examples():
    g, J = constraints(vectorize(np.eye(3)), 3)
    np.testing.assert_array_equal(g, 0)
    g, _ = constraints(vectorize(2 * np.eye(3)), 3)
    np.testing.assert_array_equal(g, 3)
    t = np.arange(1.0, 5.0)
    _, J = constraints(t, 2)
    np.testing.assert_array_equal(J, [[2, 4, 0, 0], [0, 0, 6, 8]])


def test_lagrangian_hessian_examples(rng):
    prob = random_problem(rng, 3)
    np.testing.assert_array_equal(lagrangian_hessian(prob, np.zeros(3)), hessian_h(prob))
    R, mu2 = 3, 0.7
    mask = penalty_mask(R, 1.0)
    zero = QuadraticAlignProblem(np.zeros((2, R * R)), np.zeros(2), vectorize(mask), mu2, R)
    W = lagrangian_hessian(zero, np.full(R, mu2))
    d = np.diag(W)
    np.testing.assert_allclose(d, 2 * mu2 * vectorize(mask) ** 2 - 2 * mu2)
    assert np.all(d >= -1e-15)
    diag_positions = [j * R + j for j in range(R)]
    np.testing.assert_allclose(d[diag_positions], 0, atol=1e-15)


def test_r1_feasible_set_is_two_points(rng):
    P = rng.standard_normal((3, 1))
    prob = QuadraticAlignProblem.from_alignment(P, np.array([1.3]), rng.standard_normal(3),
                                                np.ones((1, 1)), 0.5)
    hs = {}
    for s in (1.0, -1.0):
        res = solve(prob, np.array([s]))
        assert res.converged
        assert abs(abs(res.t[0]) - 1) <= 1e-12
        hs[s] = res.objective
    best = solve_global(prob, np.array([1.0]), n_random=0)
    assert best.objective == pytest.approx(min(hs.values()))


def test_no_data_term_diagonal_start_is_stationary(rng):
    R = 3
    prob = QuadraticAlignProblem(np.zeros((2, R * R)), np.zeros(2),
                                 vectorize(penalty_mask(R, 1.0)), 1.0, R)
    for signs in ([1, 1, 1], [1, -1, -1]):
        res = solve(prob, vectorize(np.diag(np.array(signs, float))))
        assert res.converged
        assert res.iterations == 0
        np.testing.assert_array_equal(res.T, np.diag(signs))
        assert res.constraint_residual == 0.0


def test_infeasible_start_rejected(rng):
    prob = random_problem(rng, 2)
    with pytest.raises(InvalidParameterError):
        solve(prob, vectorize(2 * np.eye(2)))


@pytest.mark.parametrize("R", [2, 3, 4])
def test_converged_solutions_satisfy_kkt(rng, R):
    for _ in range(15):
        prob = random_problem(rng, R)
        t0 = vectorize(random_unit_columns(rng, R))
        res = solve(prob, t0)
        assert res.converged
        g, J = constraints(res.t, R)
        assert np.max(np.abs(g)) <= 1e-6
        stat = np.linalg.norm(gradient_h(prob, res.t) - J.T @ res.eta)
        assert stat <= 1e-6 * (1 + np.linalg.norm(gradient_h(prob, t0)))
        for before, after in res.merit_steps:
            assert after <= before + 1e-12


def test_solve_deterministic(rng):
    prob = random_problem(rng, 3)
    t0 = vectorize(random_unit_columns(rng, 3))
    a, b = solve(prob, t0), solve(prob, t0)
    np.testing.assert_array_equal(a.t, b.t)
    assert a.trace == b.trace


def test_r2_matches_random_search(rng):
    for _ in range(20):
        prob = random_problem(rng, 2, L=int(rng.integers(2, 6)))
        res = solve_global(prob, vectorize(np.eye(2)))
        th = rng.uniform(0, 2 * np.pi, size=(100_000, 2))
        ts = np.stack([np.cos(th[:, 0]), np.sin(th[:, 0]), np.cos(th[:, 1]), np.sin(th[:, 1])], 1)
        r = ts @ prob.A.T - prob.y
        hs = (r * r).sum(1) + prob.mu2 * ((ts * prob.f_diag) ** 2).sum(1)
        assert res.objective <= hs.min() + 1e-6


def test_kkt_regularisation_and_failure():
    opts = SqpOptions()
    # zero curvature with rank-deficient constraints: only the shift makes it solvable
    W = np.zeros((4, 4))
    J = np.array([[1.0, 0, 0, 0], [1.0, 0, 0, 0]])
    dt, eta = _solve_kkt(W, J, np.ones(6), opts)
    assert np.all(np.isfinite(dt)) and np.all(np.isfinite(eta))
    with pytest.raises(NumericalFailure):
        _solve_kkt(np.full((2, 2), np.nan), np.ones((1, 2)), np.ones(3), opts)


def test_convergence_diagnostic_examples(rng):
    res = SqpResult(np.zeros(4), np.zeros(2), 0.0, 0.0, 0, True, 0.0)
    assert convergence_diagnostic(res, 1.0).condition_holds
    res.eta = np.array([0.2, 1.0])
    report = convergence_diagnostic(res, 1.0)
    assert not report.condition_holds
    assert report.max_eta == 1.0
    assert report.hessian_pd is None


def test_convergence_diagnostic_against_dense_eigensolve(rng):
    for _ in range(20):
        R = int(rng.integers(2, 5))
        prob = random_problem(rng, R)
        res = solve(prob, vectorize(random_unit_columns(rng, R)))
        assert res.converged
        report = convergence_diagnostic(res, prob.mu2, prob)
        # independent assembly of the Lagrangian Hessian
        W = 2 * (prob.A.T @ prob.A) + 2 * prob.mu2 * np.diag(prob.f_diag**2) \
            - 2 * np.kron(np.diag(res.eta), np.eye(R))
        lam_min = scipy.linalg.eigh(W, eigvals_only=True)[0]
        assert report.hessian_pd == (lam_min > 0)
        assert report.min_eigenvalue == pytest.approx(lam_min, abs=1e-9)
        assert report.condition_holds == bool(np.all(prob.mu2 > res.eta))


def test_trace_csv(rng, tmp_path):
    res = solve(random_problem(rng, 2), vectorize(np.eye(2)))
    p = tmp_path / "trace.csv"
    write_trace_csv(res, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "iter,h,constraint_residual,kkt_residual"
    assert len(lines) == len(res.trace) + 1
    assert float(lines[-1].split(",")[1]) == res.trace[-1][1]
