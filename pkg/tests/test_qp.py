"""Operator-splitting QP solver against a brute-force active-set oracle."""

import itertools
import math

import numpy as np
import pytest

from interceptor.errors import (DomainError, QPInfeasibleError,
                                QPMaxIterationsError)
from interceptor.qp import QPProblem, solve_qp


def _kkt_enumeration_optimum(qp):
    """Try every active subset of the inequality rows, solve the KKT system,
    and keep the best point that is primal and dual feasible."""
    n = qp.n_vars
    m_iq = qp.b_iq.size
    best = None
    for r in range(0, min(n, m_iq) + 1):
        for subset in itertools.combinations(range(m_iq), r):
            rows = list(subset)
            a_act = np.vstack([qp.A_eq, qp.A_iq[rows]])
            b_act = np.concatenate([qp.b_eq, qp.b_iq[rows]])
            k = n + b_act.size
            kkt = np.zeros((k, k))
            kkt[:n, :n] = 2.0 * qp.Q
            kkt[:n, n:] = a_act.T
            kkt[n:, :n] = a_act
            rhs = np.concatenate([-qp.q_c, b_act])
            sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
            if np.abs(kkt @ sol - rhs).max(initial=0.0) > 1e-8:
                continue
            x = sol[:n]
            duals = sol[n + qp.b_eq.size:]
            if duals.size and float(duals.min()) < -1e-8:
                continue
            if m_iq and float(np.max(qp.A_iq @ x - qp.b_iq)) > 1e-8:
                continue
            value = qp.objective(x)
            if best is None or value < best:
                best = value
    return best


def _random_feasible_qp(rng, n_max=6, iq_max=10, eq_max=2):
    n = int(rng.integers(2, n_max + 1))
    m_iq = int(rng.integers(1, iq_max + 1))
    m_eq = int(rng.integers(0, min(eq_max, n - 1) + 1))
    root = rng.normal(size=(n, n))
    q_mat = root.T @ root + 0.5 * np.eye(n)
    q_lin = 3.0 * rng.normal(size=n)
    x_feas = rng.normal(size=n)
    a_iq = rng.normal(size=(m_iq, n))
    b_iq = a_iq @ x_feas + rng.uniform(0.0, 2.0, size=m_iq)
    a_eq = rng.normal(size=(m_eq, n)) if m_eq else np.zeros((0, n))
    b_eq = a_eq @ x_feas if m_eq else np.zeros(0)
    return QPProblem(q_mat, q_lin, a_eq, b_eq, a_iq, b_iq)


def test_problem_validation():
    eye = np.eye(2)
    none = np.zeros((0, 2))
    with pytest.raises(DomainError):
        QPProblem(np.zeros((2, 3)), np.zeros(2), none, np.zeros(0), none,
                  np.zeros(0))
    asym = np.array([[1.0, 1e-6], [0.0, 1.0]])
    with pytest.raises(DomainError):
        QPProblem(asym, np.zeros(2), none, np.zeros(0), none, np.zeros(0))
    with pytest.raises(DomainError):
        QPProblem(eye, np.zeros(3), none, np.zeros(0), none, np.zeros(0))
    with pytest.raises(DomainError):
        QPProblem(eye, np.array([np.nan, 0.0]), none, np.zeros(0), none,
                  np.zeros(0))
    with pytest.raises(DomainError):
        QPProblem(eye, np.zeros(2), np.ones((2, 2)), np.zeros(1), none,
                  np.zeros(0))
    with pytest.raises(DomainError):
        QPProblem(eye, np.zeros(2), none, np.zeros(0), np.ones((1, 2)),
                  np.array([np.inf]))


def test_problem_objective_and_residuals():
    qp = QPProblem(np.eye(2), np.array([1.0, -1.0]),
                   np.array([[1.0, 1.0]]), np.array([2.0]),
                   np.array([[1.0, 0.0]]), np.array([0.5]))
    x = np.array([1.0, 1.0])
    assert qp.objective(x) == pytest.approx(2.0)
    r_eq, r_iq = qp.residuals(x)
    assert r_eq == pytest.approx(0.0)
    assert r_iq == pytest.approx(0.5)


def test_active_constraint_minimum():
    # min x^2 subject to x >= 1.
    qp = QPProblem(np.array([[1.0]]), np.zeros(1), np.zeros((0, 1)),
                   np.zeros(0), np.array([[-1.0]]), np.array([-1.0]))
    x = solve_qp(qp)
    assert abs(x[0] - 1.0) <= 1e-8


def test_unconstrained_stationary_point():
    # min 0.5 c'c + q'c with q = (-2, -4), written with Q = I/2.
    none = np.zeros((0, 2))
    qp = QPProblem(0.5 * np.eye(2), np.array([-2.0, -4.0]), none,
                   np.zeros(0), none, np.zeros(0))
    x = solve_qp(qp)
    assert np.abs(x - np.array([2.0, 4.0])).max() <= 1e-8


def test_matches_active_set_enumeration():
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(50):
        qp = _random_feasible_qp(rng)
        x = solve_qp(qp, tol=1e-8)
        r_eq, r_iq = qp.residuals(x)
        assert r_eq <= 1e-8 and r_iq <= 1e-8
        reference = _kkt_enumeration_optimum(qp)
        assert reference is not None
        worst = max(worst, abs(qp.objective(x) - reference))
    assert worst <= 1e-6


def test_equality_constrained_matches_kkt_solve():
    rng = np.random.default_rng(9)
    for _ in range(10):
        n = 5
        root = rng.normal(size=(n, n))
        q_mat = root.T @ root + np.eye(n)
        q_lin = rng.normal(size=n)
        a_eq = rng.normal(size=(2, n))
        b_eq = rng.normal(size=2)
        qp = QPProblem(q_mat, q_lin, a_eq, b_eq, np.zeros((0, n)),
                       np.zeros(0))
        x = solve_qp(qp, tol=1e-9)
        k = n + 2
        kkt = np.zeros((k, k))
        kkt[:n, :n] = 2.0 * q_mat
        kkt[:n, n:] = a_eq.T
        kkt[n:, :n] = a_eq
        direct = np.linalg.solve(kkt, np.concatenate([-q_lin, b_eq]))[:n]
        assert np.abs(x - direct).max() <= 1e-6


def test_infeasible_raises():
    # x <= -1 and x >= 1 cannot both hold.
    qp = QPProblem(np.eye(1), np.zeros(1), np.zeros((0, 1)), np.zeros(0),
                   np.array([[1.0], [-1.0]]), np.array([-1.0, -1.0]))
    with pytest.raises(QPInfeasibleError):
        solve_qp(qp)


def test_infeasible_raises_2d_box():
    none = np.zeros((0, 2))
    a_iq = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    b_iq = np.array([1.0, -2.0, 1.0, 10.0])  # x1 <= 1 and x1 >= 2
    qp = QPProblem(np.eye(2), np.zeros(2), none, np.zeros(0), a_iq, b_iq)
    with pytest.raises(QPInfeasibleError):
        solve_qp(qp)


def test_unbounded_objective_raises():
    qp = QPProblem(np.zeros((1, 1)), np.ones(1), np.zeros((0, 1)),
                   np.zeros(0), np.zeros((0, 1)), np.zeros(0))
    with pytest.raises(QPInfeasibleError):
        solve_qp(qp)


def test_iteration_cap_returns_best_iterate():
    # An unreachable tolerance forces the cap (49x = 1 has no float x with
    # zero residual, so the polish step can never verify); the error carries
    # the best iterate, which is still essentially the optimizer.
    qp = QPProblem(np.array([[1.0]]), np.zeros(1), np.array([[49.0]]),
                   np.ones(1), np.zeros((0, 1)), np.zeros(0))
    with pytest.raises(QPMaxIterationsError) as excinfo:
        solve_qp(qp, tol=1e-300, max_iters=200)
    err = excinfo.value
    assert abs(err.best_x[0] - 1.0 / 49.0) <= 1e-4
    assert math.isfinite(err.residual)


def test_bad_arguments():
    qp = QPProblem(np.eye(1), np.zeros(1), np.zeros((0, 1)), np.zeros(0),
                   np.zeros((0, 1)), np.zeros(0))
    with pytest.raises(DomainError):
        solve_qp(qp, tol=0.0)
    with pytest.raises(DomainError):
        solve_qp(qp, max_iters=0)


def test_relaxation_monotonicity():
    # Dropping any single inequality never increases the optimal value.
    rng = np.random.default_rng(17)
    qp = _random_feasible_qp(rng, n_max=5, iq_max=10)
    base = qp.objective(solve_qp(qp, tol=1e-8))
    drops = rng.choice(qp.b_iq.size, size=min(10, qp.b_iq.size),
                       replace=False)
    for k in drops:
        keep = np.ones(qp.b_iq.size, dtype=bool)
        keep[k] = False
        relaxed = QPProblem(qp.Q, qp.q_c, qp.A_eq, qp.b_eq, qp.A_iq[keep],
                            qp.b_iq[keep])
        val = relaxed.objective(solve_qp(relaxed, tol=1e-8))
        assert val <= base + 1e-6


def test_deterministic_solutions():
    rng = np.random.default_rng(3)
    qp = _random_feasible_qp(rng)
    x1 = solve_qp(qp)
    x2 = solve_qp(qp)
    assert x1.tobytes() == x2.tobytes()
