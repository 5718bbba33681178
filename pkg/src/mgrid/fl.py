"""Feedback linearization of the voltage channel: closed-form nonlinearity
f(x), constant input gain g, and the map from the auxiliary acceleration
command back to the physical voltage setpoint."""

from __future__ import annotations

import numpy as np

from .params import DGParams
from .plant import (IDX_GAMD, IDX_ILD, IDX_ILQ, IDX_IOD, IDX_IOQ, IDX_PHID,
                    IDX_Q, IDX_VOD, IDX_VOQ, DGState)


def compute_g(p: DGParams) -> float:
    """Input gain of the linearized v_od channel: k_pc*k_pv/(c_f*l_f)."""
    if p.c_f * p.l_f <= 0.0:
        raise ValueError("c_f*l_f must be > 0")
    return p.k_pc * p.k_pv / (p.c_f * p.l_f)


def compute_f(s, p: DGParams, v_bd: float, w_i: float) -> float:
    """Closed-form voltage-channel nonlinearity (second output derivative
    minus g*u), evaluated with the live droop frequency w_i.

    Valid for f_frame == 0; a nonzero feedforward gain ends up in the
    lumped uncertainty the observer estimates.
    """
    if isinstance(s, DGState):
        s = s.as_vector()
    s = np.asarray(s, dtype=float)
    cl = p.c_f * p.l_f
    return (
        (-w_i * w_i - (p.k_pc * p.k_pv + 1.0) / cl - 1.0 / (p.c_f * p.l_c)) * s[IDX_VOD]
        - (p.w_b * p.k_pc / p.l_f) * s[IDX_VOQ]
        + (p.r_c / (p.c_f * p.l_c)) * s[IDX_IOD]
        - (2.0 * w_i / p.c_f) * s[IDX_IOQ]
        - ((p.r_f + p.k_pc) / cl) * s[IDX_ILD]
        + ((2.0 * w_i - p.w_b) / p.c_f) * s[IDX_ILQ]
        - (p.k_pc * p.k_pv * p.n_q / cl) * s[IDX_Q]
        + (p.k_pc * p.k_iv / cl) * s[IDX_PHID]
        + (p.k_ic / cl) * s[IDX_GAMD]
        + (1.0 / (p.c_f * p.l_c)) * v_bd
    )


def auxiliary_to_actual(xi: float, f_hat: float, g: float) -> float:
    """Invert the linearization: physical setpoint V_n = (xi - f_hat)/g."""
    if g <= 0.0:
        raise ValueError("g must be > 0")
    return (xi - f_hat) / g
