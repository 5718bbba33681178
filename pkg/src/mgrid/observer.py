"""Intermittent deadbeat observer for the linearized voltage channel.

A bank of Volterra integral operators with exponentially-decaying,
smoothly-rising bivariate kernels filters the measured output and the
applied input over a short window.  Integration by parts turns the
double-integrator relation y'' = f + u into one linear equation per kernel
in the unknowns (f, z0, z1); three kernels with distinct decay rates give
a 3x3 solve that is exact after the rise hold time, independent of the
unknown initial state.

Kernel family: K(t, tau) = exp(-w_h (t - tau)) * phi(tau) with
phi(tau) = (1 - exp(-varpi tau))^2, so phi(0) = phi'(0) = 0 annihilates
the window's initial conditions.  Each running integral V[K s](t) obeys
d/dt V = phi-like(t) * s(t) - w_h * V, which one RK4 substep per sample
advances; the second tau-derivative kernel needed by the algebra expands
over the same exponential as w^2 V_y + 2 w V_y' + V_y'', so the bank
carries the two extra rise factors phi' and phi'' for y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class KernelParams:
    """Decay rates (pairwise distinct, positive) and the shared rise rate."""

    omegas: tuple = (1.0, 2.0, 3.0)
    varpi: float = 2.5

    def __post_init__(self):
        ws = tuple(float(w) for w in self.omegas)
        if len(ws) != 3 or any(w <= 0.0 for w in ws) or len(set(ws)) != 3:
            raise ValueError("need three distinct positive decay rates")
        if self.varpi <= 0.0:
            raise ValueError("varpi must be > 0")
        self.omegas = ws


def rise_factors(varpi: float, tau: float):
    """phi(tau) and its first two derivatives."""
    e = math.exp(-varpi * tau)
    phi = (1.0 - e) ** 2
    dphi = 2.0 * varpi * e * (1.0 - e)
    ddphi = 2.0 * varpi * varpi * (2.0 * e * e - e)
    return phi, dphi, ddphi


def kernel_trace(kp: KernelParams, h: int, t_loc: float):
    """Diagonal kernel values entering the estimator at window time t_loc:
    K(t,t) = phi(t_loc) and the tau-derivative diagonal
    K'(t,t) = w_h*phi(t_loc) + phi'(t_loc)."""
    if t_loc < 0.0:
        raise ValueError("t_loc must be >= 0")
    phi, dphi, _ = rise_factors(kp.varpi, t_loc)
    return phi, kp.omegas[h] * phi + dphi


@dataclass
class VolterraBank:
    """Running integrals for one DG: values[k, q] with q indexing
    (V_y, V_y', V_y'', V_u, V_w) and k the kernel; tau is window-local."""

    kp: KernelParams
    values: np.ndarray = field(default=None)
    tau: float = 0.0

    def __post_init__(self):
        if self.values is None:
            self.values = np.zeros((3, 5))

    def reset(self):
        self.values[:] = 0.0
        self.tau = 0.0


def volterra_step(bank: VolterraBank, y: float, u: float, dt: float,
                  y_next: float | None = None) -> VolterraBank:
    """Advance the bank by one sample interval with a single RK4 substep.

    ``y`` is the output sample at the interval start and ``y_next`` at its
    end (defaults to ``y``, a zero-order hold); ``u`` is the held input.
    """
    if not dt > 0.0:
        raise ValueError("dt must be > 0")
    if y_next is None:
        y_next = y
    ym = 0.5 * (y + y_next)
    kp = bank.kp
    r0 = rise_factors(kp.varpi, bank.tau)
    rm = rise_factors(kp.varpi, bank.tau + 0.5 * dt)
    r1 = rise_factors(kp.varpi, bank.tau + dt)
    sig0 = (y, y, y, u, 1.0)
    sigm = (ym, ym, ym, u, 1.0)
    sig1 = (y_next, y_next, y_next, u, 1.0)
    rise_idx = (0, 1, 2, 0, 0)
    for k, w in enumerate(kp.omegas):
        for q in range(5):
            ri = rise_idx[q]
            v = bank.values[k, q]
            k1 = r0[ri] * sig0[q] - w * v
            k2 = rm[ri] * sigm[q] - w * (v + 0.5 * dt * k1)
            k3 = rm[ri] * sigm[q] - w * (v + 0.5 * dt * k2)
            k4 = r1[ri] * sig1[q] - w * (v + dt * k3)
            bank.values[k, q] = v + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    bank.tau += dt
    return bank


def assemble_system(values: np.ndarray, kp: KernelParams, t_loc: float):
    """Stack the three per-kernel equations lambda = Gamma @ (f, z0, z1).

    Per kernel h:  -V[K'' y] + V[K u] = -f V[K w] - K'(t,t) z0 + K(t,t) z1
    with V[K'' y] expanded as w^2 V_y + 2 w V_y' + V_y''.
    """
    if t_loc <= 0.0:
        raise ValueError("t_loc must be > 0")
    lam = np.empty(3)
    gam = np.empty((3, 3))
    for h, w in enumerate(kp.omegas):
        v_y, v_y1, v_y2, v_u, v_w = values[h]
        k_diag, k1_diag = kernel_trace(kp, h, t_loc)
        lam[h] = -(w * w * v_y + 2.0 * w * v_y1 + v_y2) + v_u
        gam[h, 0] = -v_w
        gam[h, 1] = -k1_diag
        gam[h, 2] = k_diag
    return lam, gam


@dataclass
class Estimate:
    f_hat: float
    z0_hat: float
    z1_hat: float
    cond_gamma: float
    flagged: bool = False


def _solve3_longdouble(a, b):
    """3x3 LU solve with partial pivoting in extended precision; the
    near-parallel kernel rows make float64 forward error marginal."""
    m = np.asarray(a, dtype=np.longdouble).copy()
    v = np.asarray(b, dtype=np.longdouble).copy()
    for c in range(3):
        p = c + int(np.argmax(np.abs(m[c:, c])))
        if m[p, c] == 0.0:
            raise np.linalg.LinAlgError("singular system")
        if p != c:
            m[[c, p]] = m[[p, c]]
            v[[c, p]] = v[[p, c]]
        for r in range(c + 1, 3):
            fac = m[r, c] / m[c, c]
            m[r, c:] -= fac * m[c, c:]
            v[r] -= fac * v[c]
    out = np.empty(3, dtype=np.longdouble)
    for r in (2, 1, 0):
        out[r] = (v[r] - np.dot(m[r, r + 1:], out[r + 1:])) / m[r, r]
    return out.astype(float)


COND_CAP = 1e12


def estimate(lam: np.ndarray, gam: np.ndarray,
             prev: Estimate | None = None) -> Estimate:
    """Solve Gamma @ (f, z0, z1) = lambda; on an ill-conditioned or
    singular system return the previous valid estimate, flagged."""
    cond = float(np.linalg.cond(gam))
    if not np.isfinite(cond) or cond > COND_CAP:
        held = prev if prev is not None else Estimate(0.0, 0.0, 0.0, cond)
        return Estimate(held.f_hat, held.z0_hat, held.z1_hat, cond, True)
    try:
        sol = _solve3_longdouble(gam, lam)
    except np.linalg.LinAlgError:
        held = prev if prev is not None else Estimate(0.0, 0.0, 0.0, cond)
        return Estimate(held.f_hat, held.z0_hat, held.z1_hat, cond, True)
    if not np.all(np.isfinite(sol)):
        held = prev if prev is not None else Estimate(0.0, 0.0, 0.0, cond)
        return Estimate(held.f_hat, held.z0_hat, held.z1_hat, cond, True)
    return Estimate(float(sol[0]), float(sol[1]), float(sol[2]), cond, False)


def estimate_from_bank(bank: VolterraBank,
                       prev: Estimate | None = None) -> Estimate:
    lam, gam = assemble_system(bank.values, bank.kp, bank.tau)
    return estimate(lam, gam, prev)


@dataclass
class ObserverWindow:
    """Hold time before estimates are trusted plus the active span; both
    fit inside one controller period."""

    t_eps: float = 0.02
    dt_active: float = 0.02

    def __post_init__(self):
        if self.t_eps <= 0.0 or self.dt_active <= 0.0:
            raise ValueError("t_eps and dt_active must be > 0")

    @property
    def length(self) -> float:
        return self.t_eps + self.dt_active


def schedule_windows(t_mpc_instants, w: ObserverWindow, t_start: float = 0.0):
    """[enable, disable] per controller instant: the bank resets at
    enable = t_k - (t_eps + dt_active) and the estimate consumed at t_k is
    the one at the window's final sample.  A first window that would start
    before ``t_start`` is clipped (its estimate is flagged late)."""
    out = []
    for t_k in t_mpc_instants:
        t0 = t_k - w.length
        out.append((max(t0, t_start), t_k))
    for (a0, a1), (b0, b1) in zip(out, out[1:]):
        if b0 < a1:
            raise ValueError("observer windows overlap: t_eps + dt_active "
                             "exceeds the controller period")
    return out
