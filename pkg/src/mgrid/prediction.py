"""Two-time-scale output prediction for the voltage regulator.

The linearized voltage channel is a double integrator discretized by Euler
at the fine period T_s; the controller decides every T_s_mpc = r*T_s with
inputs held over each block of r fine steps.  F and G are the row-selected,
input-held reductions of the fine-rate prediction so that H decision
variables cover an H*r fine-step horizon.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def build_discrete_model(t_s: float):
    """Euler discretization of the double integrator at period t_s."""
    if not t_s > 0.0:
        raise ValueError("t_s must be > 0")
    a_z = np.array([[1.0, t_s], [0.0, 1.0]])
    b_z = np.array([0.0, t_s])
    c_z = np.array([1.0, 0.0])
    return a_z, b_z, c_z


def build_prediction_matrices(a_z, b_z, c_z, horizon: int, r: int):
    """Reduced prediction operators (F, G).

    Row h of F is c_z @ a_z^(h*r).  G compounds the fine-rate lower
    triangular convolution with the r-step input hold and the every-r row
    selection; its diagonal is r*(r-1)/2*t_s^2 (zero when r == 1, as for the
    plain one-rate prediction).
    """
    if horizon < 1 or r < 1:
        raise ValueError("horizon and r must be >= 1")
    hr = horizon * r
    # impulse coefficients c_z @ a_z^j @ b_z, j = 0..hr-1
    imp = np.empty(hr)
    v = b_z.astype(float).copy()
    for j in range(hr):
        imp[j] = c_z @ v
        v = a_z @ v
    f_mat = np.empty((horizon, 2))
    am = np.eye(2)
    ar = np.linalg.matrix_power(a_z, r)
    for h in range(horizon):
        am = am @ ar
        f_mat[h] = c_z @ am
    g_mat = np.zeros((horizon, horizon))
    for h in range(1, horizon + 1):
        row = h * r  # selected fine step
        for c in range(1, h + 1):
            j0, j1 = (c - 1) * r, min(c * r, row)
            # fine inputs j0..j1-1 held equal; coefficient of fine input at
            # index j (0-based) on output at fine step `row` is imp[row-1-j]
            g_mat[h - 1, c - 1] = imp[row - 1 - j1 + 1:row - 1 - j0 + 1].sum()
    return f_mat, g_mat


@dataclass
class PredictionModel:
    """Discrete model and reduction operators for one agent."""

    t_s: float
    t_s_mpc: float
    horizon: int

    def __post_init__(self):
        ratio = self.t_s_mpc / self.t_s
        r = int(round(ratio))
        if r < 1 or abs(ratio - r) > 1e-9:
            raise ValueError("t_s_mpc must be an integer multiple of t_s")
        self.r = r
        self.a_z, self.b_z, self.c_z = build_discrete_model(self.t_s)
        self.f_mat, self.g_mat = build_prediction_matrices(
            self.a_z, self.b_z, self.c_z, self.horizon, r)


def predict_outputs(f_mat, g_mat, y, xi_seq) -> np.ndarray:
    """Predicted outputs over the horizon: F @ y + G @ xi_seq."""
    return f_mat @ np.asarray(y, dtype=float) + g_mat @ np.asarray(xi_seq, dtype=float)


def shift_sequence(xi_seq, m: int) -> np.ndarray:
    """Receding-horizon update between optimizations: drop the first m
    entries, append m zeros.  m >= len gives the all-zero sequence."""
    xi_seq = np.asarray(xi_seq, dtype=float)
    h = len(xi_seq)
    if m < 0:
        raise ValueError("m must be >= 0")
    if m >= h:
        return np.zeros(h)
    out = np.zeros(h)
    out[:h - m] = xi_seq[m:]
    return out


def first_input(xi_seq) -> float:
    """Head element of the control sequence (the input actually applied)."""
    if len(xi_seq) == 0:
        raise ValueError("empty control sequence")
    return float(xi_seq[0])
