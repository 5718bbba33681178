"""Nonlinear plant: per-DG 13-state droop/inner-loop/LC dynamics, RL lines
and loads coupled on a common rotating frame, virtual-resistor bus closure,
and a fixed-step RK4 integrator.

State vector layout (flat, float64):
    per DG i (13 slots):  delta, P, Q, phi_d, phi_q, gam_d, gam_q,
                          i_ld, i_lq, v_od, v_oq, i_od, i_oq
    then per line (2):    i_D, i_Q        (common frame)
    then per load (2):    i_D, i_Q        (common frame)

Disconnected elements keep zero derivatives (frozen states); the conductor
zeroes branch currents at the switching instant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .params import DGParams, DGInput

N_DG_STATES = 13
(IDX_DELTA, IDX_P, IDX_Q, IDX_PHID, IDX_PHIQ, IDX_GAMD, IDX_GAMQ,
 IDX_ILD, IDX_ILQ, IDX_VOD, IDX_VOQ, IDX_IOD, IDX_IOQ) = range(N_DG_STATES)

STATE_NAMES = ("delta", "P", "Q", "phi_d", "phi_q", "gam_d", "gam_q",
               "i_ld", "i_lq", "v_od", "v_oq", "i_od", "i_oq")


@dataclass
class DGState:
    """Named view of one DG's 13 states."""

    delta: float = 0.0
    P: float = 0.0
    Q: float = 0.0
    phi_d: float = 0.0
    phi_q: float = 0.0
    gam_d: float = 0.0
    gam_q: float = 0.0
    i_ld: float = 0.0
    i_lq: float = 0.0
    v_od: float = 0.0
    v_oq: float = 0.0
    i_od: float = 0.0
    i_oq: float = 0.0

    def as_vector(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in STATE_NAMES], dtype=float)

    @classmethod
    def from_vector(cls, x) -> "DGState":
        return cls(**{n: float(x[i]) for i, n in enumerate(STATE_NAMES)})


class PlantDivergedError(RuntimeError):
    """Raised when an integration step produces a non-finite state."""


def droop_outputs(p: DGParams, P: float, Q: float, inp: DGInput):
    """Primary droop: frequency from active power, d-axis voltage reference
    from reactive power.  The q-axis reference is identically zero."""
    w_i = inp.w_n - p.m_p * P
    v_od_ref = inp.v_n - p.n_q * Q
    return w_i, v_od_ref


def frame_transform(v_dq, delta: float, direction: str) -> np.ndarray:
    """Rotate a dq pair by +delta (``to_common``) or -delta (``to_local``)."""
    if direction == "to_common":
        a = delta
    elif direction == "to_local":
        a = -delta
    else:
        raise ValueError(f"unknown direction {direction!r}")
    c, s = math.cos(a), math.sin(a)
    d, q = float(v_dq[0]), float(v_dq[1])
    return np.array([c * d - s * q, s * d + c * q])


def current_references(p: DGParams, s, v_od_ref: float):
    """Voltage-loop outputs: inductor current references (d, q)."""
    i_ld_ref = (p.f_frame * s[IDX_IOD] - p.w_b * p.c_f * s[IDX_VOQ]
                + p.k_pv * (v_od_ref - s[IDX_VOD]) + p.k_iv * s[IDX_PHID])
    i_lq_ref = (p.f_frame * s[IDX_IOQ] + p.w_b * p.c_f * s[IDX_VOD]
                + p.k_pv * (0.0 - s[IDX_VOQ]) + p.k_iv * s[IDX_PHIQ])
    return i_ld_ref, i_lq_ref


def bridge_voltages(p: DGParams, s, i_ld_ref: float, i_lq_ref: float):
    """Current-loop outputs, applied directly as bridge voltages (ideal PWM)."""
    v_id = (-p.w_b * p.l_f * s[IDX_ILQ]
            + p.k_pc * (i_ld_ref - s[IDX_ILD]) + p.k_ic * s[IDX_GAMD])
    v_iq = (p.w_b * p.l_f * s[IDX_ILD]
            + p.k_pc * (i_lq_ref - s[IDX_ILQ]) + p.k_ic * s[IDX_GAMQ])
    return v_id, v_iq


def dg_derivatives(p: DGParams, s, inp: DGInput, v_b_dq, w_com: float) -> np.ndarray:
    """Time derivatives of one DG's 13 states.

    ``s`` is a 13-vector (or DGState); ``v_b_dq`` is the connection-bus
    voltage expressed in this DG's local dq frame.
    """
    if isinstance(s, DGState):
        s = s.as_vector()
    s = np.asarray(s, dtype=float)
    v_bd, v_bq = float(v_b_dq[0]), float(v_b_dq[1])

    w_i, v_od_ref = droop_outputs(p, s[IDX_P], s[IDX_Q], inp)
    i_ld_ref, i_lq_ref = current_references(p, s, v_od_ref)
    v_id, v_iq = bridge_voltages(p, s, i_ld_ref, i_lq_ref)

    p_inst = s[IDX_VOD] * s[IDX_IOD] + s[IDX_VOQ] * s[IDX_IOQ]
    q_inst = s[IDX_VOQ] * s[IDX_IOD] - s[IDX_VOD] * s[IDX_IOQ]

    dx = np.empty(N_DG_STATES)
    dx[IDX_DELTA] = w_i - w_com
    dx[IDX_P] = -p.w_c * s[IDX_P] + p.w_c * p_inst
    dx[IDX_Q] = -p.w_c * s[IDX_Q] + p.w_c * q_inst
    dx[IDX_PHID] = v_od_ref - s[IDX_VOD]
    dx[IDX_PHIQ] = 0.0 - s[IDX_VOQ]
    dx[IDX_GAMD] = i_ld_ref - s[IDX_ILD]
    dx[IDX_GAMQ] = i_lq_ref - s[IDX_ILQ]
    dx[IDX_ILD] = (-p.r_f / p.l_f) * s[IDX_ILD] + w_i * s[IDX_ILQ] \
        + (v_id - s[IDX_VOD]) / p.l_f
    dx[IDX_ILQ] = (-p.r_f / p.l_f) * s[IDX_ILQ] - w_i * s[IDX_ILD] \
        + (v_iq - s[IDX_VOQ]) / p.l_f
    dx[IDX_VOD] = w_i * s[IDX_VOQ] + (s[IDX_ILD] - s[IDX_IOD]) / p.c_f
    dx[IDX_VOQ] = -w_i * s[IDX_VOD] + (s[IDX_ILQ] - s[IDX_IOQ]) / p.c_f
    dx[IDX_IOD] = (-p.r_c / p.l_c) * s[IDX_IOD] + w_i * s[IDX_IOQ] \
        + (s[IDX_VOD] - v_bd) / p.l_c
    dx[IDX_IOQ] = (-p.r_c / p.l_c) * s[IDX_IOQ] - w_i * s[IDX_IOD] \
        + (s[IDX_VOQ] - v_bq) / p.l_c
    return dx


@dataclass
class NetworkModel:
    """RL lines and loads on numbered buses, closed through per-bus virtual
    resistors.  Breakers are lines whose ``closed`` flag the scenario toggles.
    """

    n_bus: int
    line_from: np.ndarray
    line_to: np.ndarray
    line_r: np.ndarray
    line_l: np.ndarray
    line_closed: np.ndarray
    load_bus: np.ndarray
    load_r: np.ndarray
    load_l: np.ndarray
    load_conn: np.ndarray
    r_n: float = 200.0

    @property
    def n_line(self) -> int:
        return len(self.line_from)

    @property
    def n_load(self) -> int:
        return len(self.load_bus)

    def copy(self) -> "NetworkModel":
        return NetworkModel(
            self.n_bus,
            self.line_from.copy(), self.line_to.copy(),
            self.line_r.copy(), self.line_l.copy(), self.line_closed.copy(),
            self.load_bus.copy(), self.load_r.copy(), self.load_l.copy(),
            self.load_conn.copy(), self.r_n,
        )


def network_bus_voltages(net: NetworkModel, injections: np.ndarray) -> np.ndarray:
    """Common-frame bus voltages from the virtual-resistor closure.

    ``injections`` is (n_bus, 2): net current already entering each bus from
    DG outputs; line and load contributions are added here from their states.
    """
    acc = np.array(injections, dtype=float, copy=True)
    return net.r_n * acc


@dataclass
class PlantModel:
    """Flat-array view of the whole plant consumed by the step kernels."""

    params: list
    dg_bus: np.ndarray
    ref: int
    net: NetworkModel
    dg_conn: np.ndarray = field(default=None)

    def __post_init__(self):
        n = self.n_dg
        if self.dg_conn is None:
            self.dg_conn = np.ones(n, dtype=np.uint8)
        # per-DG parameter arrays for the kernels
        def arr(name):
            return np.array([getattr(p, name) for p in self.params], dtype=float)
        self.mp, self.nq = arr("m_p"), arr("n_q")
        self.rf, self.lf, self.cf = arr("r_f"), arr("l_f"), arr("c_f")
        self.rc, self.lc = arr("r_c"), arr("l_c")
        self.kpv, self.kiv = arr("k_pv"), arr("k_iv")
        self.kpc, self.kic = arr("k_pc"), arr("k_ic")
        self.wc, self.fff, self.wb = arr("w_c"), arr("f_frame"), arr("w_b")

    @property
    def n_dg(self) -> int:
        return len(self.params)

    @property
    def n_states(self) -> int:
        return N_DG_STATES * self.n_dg + 2 * self.net.n_line + 2 * self.net.n_load

    def line_offset(self) -> int:
        return N_DG_STATES * self.n_dg

    def load_offset(self) -> int:
        return N_DG_STATES * self.n_dg + 2 * self.net.n_line

    def max_branch_rate(self) -> float:
        """Fastest branch eigenvalue magnitude (1/s) under the closure; the
        integration step must resolve it (dt * rate <= ~2 for stable RK4)."""
        rn = self.net.r_n
        rates = []
        for r, l in zip(self.net.line_r, self.net.line_l):
            rates.append((r + 2.0 * rn) / l)
        for r, l in zip(self.net.load_r, self.net.load_l):
            rates.append((r + rn) / l)
        for p in self.params:
            rates.append((p.r_c + rn) / p.l_c)
            rates.append((p.r_f + p.k_pc) / p.l_f)
        return max(rates)


@dataclass
class PlantState:
    """Value-type full plant state: flat vector plus simulation time."""

    x: np.ndarray
    t: float = 0.0

    def copy(self) -> "PlantState":
        return PlantState(self.x.copy(), self.t)

    def dg(self, model: PlantModel, i: int) -> DGState:
        return DGState.from_vector(self.x[N_DG_STATES * i:N_DG_STATES * (i + 1)])


def kernel_args(model: PlantModel):
    """Positional parameter tuple shared by both step-kernel backends."""
    net = model.net
    return (model.mp, model.nq, model.rf, model.lf, model.cf, model.rc,
            model.lc, model.kpv, model.kiv, model.kpc, model.kic, model.wc,
            model.fff, model.wb, model.dg_bus, model.dg_conn, model.ref)


def network_args(model: PlantModel):
    net = model.net
    return (net.line_from, net.line_to, net.line_r, net.line_l,
            net.line_closed, net.load_bus, net.load_r, net.load_l,
            net.load_conn, net.r_n)


def plant_rhs(model: PlantModel, x: np.ndarray, w_n: np.ndarray,
              v_n: np.ndarray) -> np.ndarray:
    """Derivative of the full flat state (pure-numpy reference path)."""
    from ._kernels_numpy import rhs_arrays
    dx = np.empty_like(x)
    vb = np.empty((model.net.n_bus, 2))
    pa = kernel_args(model)
    rhs_arrays(x, dx, vb, *pa[:-1], pa[-1], w_n, v_n, *network_args(model))
    return dx


def bus_voltages(model: PlantModel, x: np.ndarray) -> np.ndarray:
    """Common-frame bus voltages of the closure at the given state."""
    from ._kernels_numpy import _bus_voltages
    net = model.net
    vb = np.empty((net.n_bus, 2))
    _bus_voltages(x, vb, model.dg_bus, model.dg_conn, net.line_from,
                  net.line_to, net.line_closed, net.load_bus, net.load_conn,
                  net.r_n, model.n_dg)
    return vb


def rk4_step(f, x: np.ndarray, dt: float) -> np.ndarray:
    """Classical 4th-order Runge-Kutta step for dx/dt = f(x)."""
    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_step(model: PlantModel, state: PlantState, w_n: np.ndarray,
                   v_n: np.ndarray, dt: float) -> PlantState:
    """One RK4 step of the full plant with inputs held (zero-order hold)."""
    if not dt > 0.0:
        raise ValueError("dt must be > 0")
    if dt > 1e-4:
        raise ValueError("dt must be <= 1e-4")
    x1 = rk4_step(lambda x: plant_rhs(model, x, w_n, v_n), state.x, dt)
    if not np.all(np.isfinite(x1)):
        bad = int(np.flatnonzero(~np.isfinite(x1))[0])
        raise PlantDivergedError(_describe_state_index(model, bad, state.t + dt))
    return PlantState(x1, state.t + dt)


def _describe_state_index(model: PlantModel, idx: int, t: float) -> str:
    n13 = N_DG_STATES * model.n_dg
    if idx < n13:
        dg, slot = divmod(idx, N_DG_STATES)
        what = f"DG{dg + 1} state '{STATE_NAMES[slot]}'"
    elif idx < model.load_offset():
        j, c = divmod(idx - model.line_offset(), 2)
        what = f"line {j} current ({'DQ'[c]})"
    else:
        m, c = divmod(idx - model.load_offset(), 2)
        what = f"load {m} current ({'DQ'[c]})"
    return f"non-finite state at t={t:.6f}s: {what} (flat index {idx})"
