"""Dense primal active-set QP solver and the consensus-tracking voltage QP.

Problems are tiny (horizon-sized, H ~ 10) and dense, so a textbook
active-set method with direct KKT solves is both fast and exact enough to
meet the 1e-8 relative KKT tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class QPWeights:
    """Tracking weight Q, effort weight R = rho*I, output box bounds and
    the quadratic penalty on the per-side feasibility slacks."""

    horizon: int
    rho: float = 1e-6
    v_lo: float = 0.97 * 311.0
    v_hi: float = 1.03 * 311.0
    slack_penalty: float = 1e6
    q_mat: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.q_mat is None:
            self.q_mat = np.eye(self.horizon)
        if self.v_lo >= self.v_hi:
            raise ValueError("v_lo must be < v_hi")
        if self.rho <= 0.0:
            raise ValueError("rho must be > 0")


def solve_qp_active_set(p_mat, q_vec, a_mat, b_vec, x0, max_iter=500,
                        tol=1e-10):
    """min 1/2 x'Px + q'x  s.t.  Ax <= b  from a feasible x0.

    Returns (x, lam, converged, n_iter); lam holds multipliers for all
    rows (zero off the final active set).
    """
    n = len(q_vec)
    m = len(b_vec)
    x = np.array(x0, dtype=float)
    work: list[int] = []
    lam_full = np.zeros(m)

    for it in range(1, max_iter + 1):
        nw = len(work)
        kkt = np.zeros((n + nw, n + nw))
        kkt[:n, :n] = p_mat
        if nw:
            aw = a_mat[work]
            kkt[:n, n:] = aw.T
            kkt[n:, :n] = aw
        rhs = np.concatenate([-(p_mat @ x + q_vec), np.zeros(nw)])
        sol = np.linalg.solve(kkt, rhs)
        step = sol[:n]
        lam_w = sol[n:]

        if np.max(np.abs(step)) <= tol * (1.0 + np.max(np.abs(x))):
            lam_full[:] = 0.0
            if nw:
                lam_full[np.array(work)] = lam_w
            if nw == 0 or np.min(lam_w) >= -tol:
                return x, lam_full, True, it
            work.pop(int(np.argmin(lam_w)))
            continue

        # largest feasible step along `step`
        alpha = 1.0
        block = -1
        a_step = a_mat @ step
        resid = b_vec - a_mat @ x
        for i in range(m):
            if i in work or a_step[i] <= tol:
                continue
            ratio = resid[i] / a_step[i]
            if ratio < alpha:
                alpha = ratio
                block = i
        x = x + max(alpha, 0.0) * step
        if block >= 0:
            work.append(block)

    lam_full[:] = 0.0
    if work:
        lam_full[np.array(work)] = lam_w
    return x, lam_full, False, max_iter


def kkt_residual(p_mat, q_vec, a_mat, b_vec, x, lam) -> float:
    """Relative KKT residual: stationarity, primal feasibility, dual
    feasibility and complementarity, scaled by 1 + ||grad at 0||_inf."""
    scale = 1.0 + np.max(np.abs(q_vec))
    stat = p_mat @ x + q_vec + a_mat.T @ lam if len(lam) else p_mat @ x + q_vec
    viol = a_mat @ x - b_vec
    r = np.max(np.abs(stat))
    r = max(r, float(np.max(viol, initial=0.0)))
    r = max(r, float(np.max(-lam, initial=0.0)))
    if len(lam):
        r = max(r, float(np.max(np.abs(lam * viol))))
    return r / scale


@dataclass
class QPSolution:
    xi: np.ndarray
    y_pred: np.ndarray
    slack_lo: float
    slack_hi: float
    kkt: float
    iterations: int
    converged: bool


def solve_voltage_qp(y, neighbor_predictions, w: QPWeights, f_mat, g_mat,
                     warm_start=None) -> QPSolution:
    """Consensus-tracking QP for one agent.

    Minimizes the Q-weighted distance of the predicted outputs from the
    average of the neighbors' prediction sequences plus the R-weighted
    input effort, with the predicted outputs box-constrained to
    [v_lo, v_hi] softened by one nonnegative slack per side.
    """
    if not neighbor_predictions:
        raise ValueError("neighbor prediction list must be nonempty")
    h = g_mat.shape[0]
    y = np.asarray(y, dtype=float)
    y_bar = np.mean(np.asarray(neighbor_predictions, dtype=float), axis=0)
    e0 = f_mat @ y - y_bar

    q_big = w.q_mat
    gtq = g_mat.T @ q_big
    p_xi = 2.0 * (gtq @ g_mat + w.rho * np.eye(h))
    q_xi = 2.0 * (gtq @ e0)

    n = h + 2
    p_mat = np.zeros((n, n))
    p_mat[:h, :h] = p_xi
    p_mat[h, h] = 2.0 * w.slack_penalty
    p_mat[h + 1, h + 1] = 2.0 * w.slack_penalty
    q_vec = np.concatenate([q_xi, [0.0, 0.0]])

    fy = f_mat @ y
    a_mat = np.zeros((2 * h + 2, n))
    b_vec = np.zeros(2 * h + 2)
    a_mat[:h, :h] = g_mat          # upper: G xi - s_hi <= v_hi - F y
    a_mat[:h, h + 1] = -1.0
    b_vec[:h] = w.v_hi - fy
    a_mat[h:2 * h, :h] = -g_mat    # lower: -G xi - s_lo <= F y - v_lo
    a_mat[h:2 * h, h] = -1.0
    b_vec[h:2 * h] = fy - w.v_lo
    a_mat[2 * h, h] = -1.0         # s_lo >= 0
    a_mat[2 * h + 1, h + 1] = -1.0

    xi0 = np.zeros(h) if warm_start is None else np.asarray(warm_start, float)
    y0 = fy + g_mat @ xi0
    s_hi0 = max(0.0, float(np.max(y0 - w.v_hi)))
    s_lo0 = max(0.0, float(np.max(w.v_lo - y0)))
    x0 = np.concatenate([xi0, [s_lo0, s_hi0]])

    x, lam, ok, iters = solve_qp_active_set(p_mat, q_vec, a_mat, b_vec, x0,
                                            max_iter=50 * h)
    if not ok:
        # fall back to the unconstrained minimizer, predictions clamped
        xi = np.linalg.solve(p_xi, -q_xi)
        y_pred = np.clip(fy + g_mat @ xi, w.v_lo, w.v_hi)
        return QPSolution(xi, y_pred, 0.0, 0.0,
                          kkt_residual(p_mat, q_vec, a_mat, b_vec, x, lam),
                          iters, False)

    xi = x[:h]
    return QPSolution(
        xi=xi,
        y_pred=fy + g_mat @ xi,
        slack_lo=float(x[h]),
        slack_hi=float(x[h + 1]),
        kkt=kkt_residual(p_mat, q_vec, a_mat, b_vec, x, lam),
        iterations=iters,
        converged=True,
    )
