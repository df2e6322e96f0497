"""Dense convex quadratic programming by operator splitting.

Solves min x'Qx + q_c'x subject to A_eq x = b_eq and A_iq x <= b_iq with an
ADMM iteration: an equality-regularized linear solve alternating with a
projection onto the constraint box, followed by an active-set polish that
turns the approximate iterate into a verified KKT point. Problems here are
small (tens of variables), so the normal-equations matrix is inverted
directly whenever the step size changes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, QPInfeasibleError, QPMaxIterationsError

_SIGMA = 1e-6
_ALPHA = 1.6
_RHO_EQ_SCALE = 1e3
_CHECK_EVERY = 25
_DIVERGE_Y = 1e12


@dataclass(frozen=True)
class QPProblem:
    """min x'Qx + q_c'x  s.t.  A_eq x = b_eq,  A_iq x <= b_iq."""

    Q: np.ndarray
    q_c: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    A_iq: np.ndarray
    b_iq: np.ndarray

    def __post_init__(self) -> None:
        q_mat = np.ascontiguousarray(self.Q, dtype=float)
        if q_mat.ndim != 2 or q_mat.shape[0] != q_mat.shape[1]:
            raise DomainError("Q must be square")
        n = q_mat.shape[0]
        if not np.all(np.isfinite(q_mat)):
            raise DomainError("Q must be finite")
        if float(np.abs(q_mat - q_mat.T).max(initial=0.0)) > 1e-12:
            raise DomainError("Q must be symmetric")
        lin = np.ascontiguousarray(self.q_c, dtype=float)
        if lin.shape != (n,) or not np.all(np.isfinite(lin)):
            raise DomainError("q_c must be a finite length-n vector")
        a_eq = np.ascontiguousarray(self.A_eq, dtype=float).reshape(-1, n)
        b_eq = np.ascontiguousarray(self.b_eq, dtype=float).ravel()
        a_iq = np.ascontiguousarray(self.A_iq, dtype=float).reshape(-1, n)
        b_iq = np.ascontiguousarray(self.b_iq, dtype=float).ravel()
        if a_eq.shape[0] != b_eq.size or a_iq.shape[0] != b_iq.size:
            raise DomainError("constraint matrix and vector sizes disagree")
        for arr in (a_eq, b_eq, a_iq, b_iq):
            if not np.all(np.isfinite(arr)):
                raise DomainError("constraints must be finite")
        object.__setattr__(self, "Q", q_mat)
        object.__setattr__(self, "q_c", lin)
        object.__setattr__(self, "A_eq", a_eq)
        object.__setattr__(self, "b_eq", b_eq)
        object.__setattr__(self, "A_iq", a_iq)
        object.__setattr__(self, "b_iq", b_iq)

    @property
    def n_vars(self) -> int:
        return self.Q.shape[0]

    def objective(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ self.Q @ x + self.q_c @ x)

    def residuals(self, x: np.ndarray) -> tuple[float, float]:
        """(equality residual, inequality violation), both in the max norm."""
        x = np.asarray(x, dtype=float)
        r_eq = 0.0
        if self.b_eq.size:
            r_eq = float(np.abs(self.A_eq @ x - self.b_eq).max())
        r_iq = 0.0
        if self.b_iq.size:
            r_iq = float(np.maximum(self.A_iq @ x - self.b_iq, 0.0).max())
        return r_eq, r_iq


def _unconstrained_min(p_mat: np.ndarray, q: np.ndarray, tol: float) -> np.ndarray:
    x, *_ = np.linalg.lstsq(p_mat, -q, rcond=None)
    if float(np.abs(p_mat @ x + q).max(initial=0.0)) > 10.0 * tol:
        raise QPInfeasibleError("objective is unbounded below")
    return x


def _polish(qp: QPProblem, x: np.ndarray, y_iq: np.ndarray,
            tol: float) -> np.ndarray | None:
    """Solve the KKT system of the guessed active set; return a verified
    solution or None if the guess fails feasibility or optimality checks."""
    p_mat = 2.0 * qp.Q
    slack = qp.b_iq - qp.A_iq @ x if qp.b_iq.size else np.empty(0)
    active = np.flatnonzero((slack <= 100.0 * tol) | (y_iq > 100.0 * tol))
    a_act = np.vstack([qp.A_eq, qp.A_iq[active]])
    b_act = np.concatenate([qp.b_eq, qp.b_iq[active]])
    n, m = qp.n_vars, b_act.size
    kkt = np.zeros((n + m, n + m))
    kkt[:n, :n] = p_mat
    kkt[:n, n:] = a_act.T
    kkt[n:, :n] = a_act
    rhs = np.concatenate([-qp.q_c, b_act])
    # LU solve first; the KKT matrix is singular only for degenerate active
    # sets, where the min-norm least-squares solution is still usable
    sol = None
    try:
        cand = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        cand = None
    if cand is not None and np.all(np.isfinite(cand)):
        resid = float(np.abs(kkt @ cand - rhs).max(initial=0.0))
        if resid <= 1e-7 * max(1.0, float(np.abs(rhs).max(initial=0.0))):
            sol = cand
    if sol is None:
        sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
    x_pol, duals = sol[:n], sol[n:]
    n_eq = qp.b_eq.size
    if duals[n_eq:].size and float(duals[n_eq:].min()) < -10.0 * tol:
        return None
    scale = max(1.0, float(np.abs(qp.q_c).max(initial=0.0)),
                float(np.abs(p_mat).max(initial=0.0)))
    stat = float(np.abs(p_mat @ x_pol + qp.q_c + a_act.T @ duals).max(initial=0.0))
    if stat > 10.0 * tol * scale:
        return None
    r_eq, r_iq = qp.residuals(x_pol)
    if r_eq > tol or r_iq > tol:
        return None
    return x_pol


def solve_qp(qp: QPProblem, tol: float = 1e-6,
             max_iters: int = 20000) -> np.ndarray:
    """Primal solution with equality residual and inequality violation <= tol
    and KKT stationarity residual <= 10 tol."""
    if not (math.isfinite(tol) and tol > 0.0):
        raise DomainError("tol must be positive and finite")
    if max_iters < 1:
        raise DomainError("max_iters must be >= 1")
    n = qp.n_vars
    p_mat = 2.0 * qp.Q
    n_eq, n_iq = qp.b_eq.size, qp.b_iq.size
    m = n_eq + n_iq
    if m == 0:
        return _unconstrained_min(p_mat, qp.q_c, tol)

    a_all = np.vstack([qp.A_eq, qp.A_iq])
    lo = np.concatenate([qp.b_eq, np.full(n_iq, -np.inf)])
    hi = np.concatenate([qp.b_eq, qp.b_iq])

    rho = np.full(m, 0.1)
    rho[:n_eq] *= _RHO_EQ_SCALE
    inv = np.linalg.inv(p_mat + _SIGMA * np.eye(n)
                        + a_all.T @ (rho[:, None] * a_all))

    x = np.zeros(n)
    z = np.clip(np.zeros(m), lo, hi)
    y = np.zeros(m)
    y_window = np.zeros(m)
    best_x = x.copy()
    best_res = math.inf

    for it in range(1, max_iters + 1):
        rhs = _SIGMA * x - qp.q_c + a_all.T @ (rho * z - y)
        x_hat = inv @ rhs
        z_hat = a_all @ x_hat
        x = _ALPHA * x_hat + (1.0 - _ALPHA) * x
        z_relaxed = _ALPHA * z_hat + (1.0 - _ALPHA) * z
        z_new = np.clip(z_relaxed + y / rho, lo, hi)
        dy = rho * (z_relaxed - z_new)
        y = y + dy
        y_window += dy
        z = z_new

        if it % _CHECK_EVERY and it != max_iters:
            continue

        ax = a_all @ x
        r_prim = float(np.abs(ax - z).max())
        r_dual = float(np.abs(p_mat @ x + qp.q_c + a_all.T @ y).max())
        worst = max(r_prim, r_dual)
        if worst < best_res:
            best_res = worst
            best_x = x.copy()

        if r_prim <= tol and r_dual <= tol:
            polished = _polish(qp, x, y[n_eq:], tol)
            if polished is not None:
                return polished
            r_eq, r_iq = qp.residuals(x)
            if r_eq <= tol and r_iq <= tol:
                return x
        elif r_prim <= 100.0 * tol and r_dual <= 100.0 * tol:
            # Early polish attempt: accept only a verified KKT point.
            polished = _polish(qp, x, y[n_eq:], tol)
            if polished is not None:
                return polished

        dy_norm = float(np.abs(y_window).max())
        if dy_norm > tol:
            # Primal infeasibility certificate: the multiplier direction
            # stays in the row space and has negative support value.
            at_dy = float(np.abs(a_all.T @ y_window).max())
            support = float(hi @ np.maximum(y_window, 0.0))
            neg = np.minimum(y_window, 0.0)
            if n_eq:
                support += float(qp.b_eq @ neg[:n_eq])
            iq_neg = float(np.abs(neg[n_eq:]).max(initial=0.0))
            if (at_dy <= 1e-6 * dy_norm and iq_neg <= 1e-6 * dy_norm
                    and support < -1e-6 * dy_norm):
                err = QPInfeasibleError(
                    "constraints admit no solution (divergence certificate)")
                err.certificate = y_window.copy()
                raise err
        if float(np.abs(y).max()) > _DIVERGE_Y:
            err = QPInfeasibleError("dual variables diverged")
            err.certificate = y.copy()
            raise err
        y_window = np.zeros(m)

        if it % (40 * _CHECK_EVERY) == 0 and r_dual > 0.0 and r_prim > 0.0:
            scale = math.sqrt(r_prim / r_dual)
            if scale > 5.0 or scale < 0.2:
                rho = np.clip(rho * scale, 1e-8, 1e8)
                inv = np.linalg.inv(p_mat + _SIGMA * np.eye(n)
                                    + a_all.T @ (rho[:, None] * a_all))

    polished = _polish(qp, best_x, y[n_eq:], tol)
    if polished is not None:
        return polished
    raise QPMaxIterationsError(best_x, best_res)
