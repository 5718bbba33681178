"""Per-DG electrical and controller parameters with the stock 4-bus values."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

OMEGA_B = 2.0 * math.pi * 50.0  # rated angular frequency (rad/s)
V_REF = 311.0                   # 1 p.u. peak phase voltage (V), 220*sqrt(2)


@dataclass(frozen=True)
class DGParams:
    """Droop gains, LC filter, output impedance and inner-loop PI gains.

    Units: m_p in rad/s per W, n_q in V per var, R/L/C in ohm/henry/farad,
    w_c in rad/s.  f_frame is the dimensionless dq feedforward gain (the
    closed-form voltage-channel nonlinearity assumes it is zero).
    """

    m_p: float
    n_q: float
    r_f: float
    l_f: float
    c_f: float
    r_c: float
    l_c: float
    k_pv: float
    k_iv: float
    k_pc: float
    k_ic: float
    w_c: float = 31.41
    f_frame: float = 0.0
    w_b: float = OMEGA_B

    def __post_init__(self):
        for name in ("l_f", "c_f", "l_c", "m_p", "n_q"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"DGParams.{name} must be > 0")
        if self.k_pc * self.k_pv <= 0.0:
            raise ValueError("DGParams: k_pc*k_pv/(c_f*l_f) must be > 0")

    def with_(self, **kw) -> "DGParams":
        return replace(self, **kw)


@dataclass(frozen=True)
class DGInput:
    """Primary-control setpoints: frequency (rad/s) and voltage (V)."""

    w_n: float = OMEGA_B
    v_n: float = V_REF


# Stock parameter sets of the 4-bus test system.
DG1_PARAMS = DGParams(
    m_p=6.28e-5, n_q=0.5e-3,
    r_f=0.1, l_f=1.35e-3, c_f=47e-6, r_c=0.02, l_c=2e-3,
    k_pv=0.05, k_iv=390.0, k_pc=10.5, k_ic=1.6e4,
)
DG2_PARAMS = DG1_PARAMS.with_(m_p=9.42e-5, n_q=0.75e-3)
DG34_PARAMS = DGParams(
    m_p=12.56e-5, n_q=1e-3,
    r_f=0.1, l_f=1.35e-3, c_f=47e-6, r_c=0.02, l_c=2e-3,
    k_pv=0.1, k_iv=420.0, k_pc=15.0, k_ic=2e4,
)

DEFAULT_DG_PARAMS = {
    "dg1": DG1_PARAMS,
    "dg2": DG2_PARAMS,
    "dg3": DG34_PARAMS,
    "dg4": DG34_PARAMS,
}

# Stock line / load values (series R in ohm, L in henry).
DEFAULT_LINES = {
    "line1": (0.23, 318e-6),
    "line2": (0.35, 1847e-6),
    "line3": (0.23, 318e-6),
}
DEFAULT_LOADS = {
    "load1": (2.0, 6.4e-3),
    "load2": (4.0, 9.6e-3),
    "load3": (6.0, 12.8e-3),
    "load4": (6.0, 12.8e-3),
}
