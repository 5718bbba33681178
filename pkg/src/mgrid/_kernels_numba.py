"""JIT-compiled hot kernels: fused fine-step plant integration with
observer filter-bank updates and periodic state logging.

Mirrors the pure-numpy path in ``_kernels_numpy`` term for term; the
backend is selected by the MGRID_BACKEND env flag (see ``backend``).
"""

import math

import numpy as np
from numba import njit

# log row layout: 13 DG states, v_bd, v_bq, w_i, p_inst, q_inst, v_n
N_LOG_COLS = 19


@njit(cache=True)
def _rhs(x, dx, vb, mp, nq, rf_lf, inv_lf, inv_cf, rc_lc, inv_lc, kpv, kiv,
         kpc, kic, wc, fff, wb_cf, wb_lf, dg_bus, dg_conn, ref, wn, vn,
         line_from, line_to, line_rl, line_invl, line_closed, load_bus,
         load_rl, load_invl, load_conn, rn):
    n = mp.shape[0]
    n_line = line_from.shape[0]
    n_load = load_bus.shape[0]
    lo_line = 13 * n
    lo_load = lo_line + 2 * n_line

    w_com = wn[ref] - mp[ref] * x[13 * ref + 1]

    for b in range(vb.shape[0]):
        vb[b, 0] = 0.0
        vb[b, 1] = 0.0
    for i in range(n):
        if dg_conn[i]:
            o = 13 * i
            c = math.cos(x[o + 0])
            s = math.sin(x[o + 0])
            vb[dg_bus[i], 0] += c * x[o + 11] - s * x[o + 12]
            vb[dg_bus[i], 1] += s * x[o + 11] + c * x[o + 12]
    for j in range(n_line):
        if line_closed[j]:
            o = lo_line + 2 * j
            vb[line_from[j], 0] -= x[o]
            vb[line_from[j], 1] -= x[o + 1]
            vb[line_to[j], 0] += x[o]
            vb[line_to[j], 1] += x[o + 1]
    for m in range(n_load):
        if load_conn[m]:
            o = lo_load + 2 * m
            vb[load_bus[m], 0] -= x[o]
            vb[load_bus[m], 1] -= x[o + 1]
    for b in range(vb.shape[0]):
        vb[b, 0] *= rn
        vb[b, 1] *= rn

    for i in range(n):
        o = 13 * i
        if not dg_conn[i]:
            for k in range(13):
                dx[o + k] = 0.0
            continue
        delta = x[o + 0]
        P = x[o + 1]
        Q = x[o + 2]
        phid = x[o + 3]
        phiq = x[o + 4]
        gamd = x[o + 5]
        gamq = x[o + 6]
        ild = x[o + 7]
        ilq = x[o + 8]
        vod = x[o + 9]
        voq = x[o + 10]
        iod = x[o + 11]
        ioq = x[o + 12]

        w_i = wn[i] - mp[i] * P
        v_od_ref = vn[i] - nq[i] * Q
        c = math.cos(delta)
        s = math.sin(delta)
        v_bd = c * vb[dg_bus[i], 0] + s * vb[dg_bus[i], 1]
        v_bq = -s * vb[dg_bus[i], 0] + c * vb[dg_bus[i], 1]

        i_ld_ref = fff[i] * iod - wb_cf[i] * voq \
            + kpv[i] * (v_od_ref - vod) + kiv[i] * phid
        i_lq_ref = fff[i] * ioq + wb_cf[i] * vod \
            + kpv[i] * (0.0 - voq) + kiv[i] * phiq
        v_id = -wb_lf[i] * ilq + kpc[i] * (i_ld_ref - ild) + kic[i] * gamd
        v_iq = wb_lf[i] * ild + kpc[i] * (i_lq_ref - ilq) + kic[i] * gamq

        p_inst = vod * iod + voq * ioq
        q_inst = voq * iod - vod * ioq

        dx[o + 0] = w_i - w_com
        dx[o + 1] = wc[i] * (p_inst - P)
        dx[o + 2] = wc[i] * (q_inst - Q)
        dx[o + 3] = v_od_ref - vod
        dx[o + 4] = 0.0 - voq
        dx[o + 5] = i_ld_ref - ild
        dx[o + 6] = i_lq_ref - ilq
        dx[o + 7] = -rf_lf[i] * ild + w_i * ilq + (v_id - vod) * inv_lf[i]
        dx[o + 8] = -rf_lf[i] * ilq - w_i * ild + (v_iq - voq) * inv_lf[i]
        dx[o + 9] = w_i * voq + (ild - iod) * inv_cf[i]
        dx[o + 10] = -w_i * vod + (ilq - ioq) * inv_cf[i]
        dx[o + 11] = -rc_lc[i] * iod + w_i * ioq + (vod - v_bd) * inv_lc[i]
        dx[o + 12] = -rc_lc[i] * ioq - w_i * iod + (voq - v_bq) * inv_lc[i]

    for j in range(n_line):
        o = lo_line + 2 * j
        if line_closed[j]:
            dv_d = vb[line_from[j], 0] - vb[line_to[j], 0]
            dv_q = vb[line_from[j], 1] - vb[line_to[j], 1]
            dx[o] = -line_rl[j] * x[o] + w_com * x[o + 1] + dv_d * line_invl[j]
            dx[o + 1] = -line_rl[j] * x[o + 1] - w_com * x[o] \
                + dv_q * line_invl[j]
        else:
            dx[o] = 0.0
            dx[o + 1] = 0.0

    for m in range(n_load):
        o = lo_load + 2 * m
        if load_conn[m]:
            b = load_bus[m]
            dx[o] = -load_rl[m] * x[o] + w_com * x[o + 1] + vb[b, 0] * load_invl[m]
            dx[o + 1] = -load_rl[m] * x[o + 1] - w_com * x[o] \
                + vb[b, 1] * load_invl[m]
        else:
            dx[o] = 0.0
            dx[o + 1] = 0.0


@njit(cache=True)
def _log_row(x, out, row, vb, mp, nq, dg_bus, dg_conn, ref, wn, vn, line_from,
             line_to, line_closed, load_bus, load_conn, rn):
    # columns 0..12 mirror the state slots; see N_LOG_COLS for the rest
    # bus voltages from the current state (same closure as _rhs)
    n = mp.shape[0]
    n_line = line_from.shape[0]
    n_load = load_bus.shape[0]
    lo_line = 13 * n
    lo_load = lo_line + 2 * n_line
    for b in range(vb.shape[0]):
        vb[b, 0] = 0.0
        vb[b, 1] = 0.0
    for i in range(n):
        if dg_conn[i]:
            o = 13 * i
            c = math.cos(x[o + 0])
            s = math.sin(x[o + 0])
            vb[dg_bus[i], 0] += c * x[o + 11] - s * x[o + 12]
            vb[dg_bus[i], 1] += s * x[o + 11] + c * x[o + 12]
    for j in range(n_line):
        if line_closed[j]:
            o = lo_line + 2 * j
            vb[line_from[j], 0] -= x[o]
            vb[line_from[j], 1] -= x[o + 1]
            vb[line_to[j], 0] += x[o]
            vb[line_to[j], 1] += x[o + 1]
    for m in range(n_load):
        if load_conn[m]:
            o = lo_load + 2 * m
            vb[load_bus[m], 0] -= x[o]
            vb[load_bus[m], 1] -= x[o + 1]
    for b in range(vb.shape[0]):
        vb[b, 0] *= rn
        vb[b, 1] *= rn

    for i in range(n):
        o = 13 * i
        for k in range(13):
            out[row, i, k] = x[o + k]
        c = math.cos(x[o + 0])
        s = math.sin(x[o + 0])
        out[row, i, 13] = c * vb[dg_bus[i], 0] + s * vb[dg_bus[i], 1]
        out[row, i, 14] = -s * vb[dg_bus[i], 0] + c * vb[dg_bus[i], 1]
        out[row, i, 15] = wn[i] - mp[i] * x[o + 1]
        out[row, i, 16] = x[o + 9] * x[o + 11] + x[o + 10] * x[o + 12]
        out[row, i, 17] = x[o + 10] * x[o + 11] - x[o + 9] * x[o + 12]
        out[row, i, 18] = vn[i]


@njit(cache=True)
def _bank_rk4(bank, tau, h, omegas, varpi, y0, ym, y1, u_obs, n):
    """Advance the per-DG Volterra integral banks over one observer interval.

    bank[i, k, q]: DG i, kernel k, integral q in (V_y, V_y', V_y'', V_u, V_w)
    where the primed slots carry the tau-derivative rise factors.
    """
    e0 = math.exp(-varpi * tau)
    em = math.exp(-varpi * (tau + 0.5 * h))
    e1 = math.exp(-varpi * (tau + h))
    # rise factor phi and its first two derivatives at the three stage times
    p0 = (1.0 - e0) ** 2
    pm = (1.0 - em) ** 2
    p1 = (1.0 - e1) ** 2
    d0 = 2.0 * varpi * e0 * (1.0 - e0)
    dm = 2.0 * varpi * em * (1.0 - em)
    d1 = 2.0 * varpi * e1 * (1.0 - e1)
    s0 = 2.0 * varpi * varpi * (2.0 * e0 * e0 - e0)
    sm = 2.0 * varpi * varpi * (2.0 * em * em - em)
    s1 = 2.0 * varpi * varpi * (2.0 * e1 * e1 - e1)

    for i in range(n):
        for k in range(omegas.shape[0]):
            w = omegas[k]
            for q in range(5):
                if q == 0:
                    r0, rm, r1 = p0, pm, p1
                    a0, am, a1 = y0[i], ym[i], y1[i]
                elif q == 1:
                    r0, rm, r1 = d0, dm, d1
                    a0, am, a1 = y0[i], ym[i], y1[i]
                elif q == 2:
                    r0, rm, r1 = s0, sm, s1
                    a0, am, a1 = y0[i], ym[i], y1[i]
                elif q == 3:
                    r0, rm, r1 = p0, pm, p1
                    a0, am, a1 = u_obs[i], u_obs[i], u_obs[i]
                else:
                    r0, rm, r1 = p0, pm, p1
                    a0, am, a1 = 1.0, 1.0, 1.0
                v = bank[i, k, q]
                k1 = r0 * a0 - w * v
                k2 = rm * am - w * (v + 0.5 * h * k1)
                k3 = rm * am - w * (v + 0.5 * h * k2)
                k4 = r1 * a1 - w * (v + h * k3)
                bank[i, k, q] = v + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@njit(cache=True)
def advance_span(x, n_steps, dt,
                 mp, nq, rf, lf, cf, rc, lc, kpv, kiv, kpc, kic, wc, fff, wb,
                 dg_bus, dg_conn, ref, wn, vn,
                 line_from, line_to, line_r, line_l, line_closed,
                 load_bus, load_r, load_l, load_conn, rn, n_bus,
                 bank, tau0, obs_active0, obs_reset_step, obs_every,
                 omegas, varpi, u_obs, noise,
                 xi_hold, g_nom, refresh_mask, refresh_every,
                 f_lp, alpha_f, vn_lo, vn_hi, vn_slew,
                 log_stride, log_phase, log_out, log_row0):
    """Integrate ``n_steps`` RK4 plant steps with held inputs.

    Observer banks reset at local step ``obs_reset_step`` (-1: never) and
    advance every ``obs_every`` plant steps while active.  DGs flagged in
    ``refresh_mask`` get the linearizing bias of their held setpoint
    re-evaluated from the current state at every observer-grid step:
    vn[i] = (xi_hold[i] - f(x)) / g_nom[i] (u_obs follows).  State rows are
    logged at local steps where (step + log_phase) % log_stride == 0
    (log_stride <= 0 disables logging).  Returns (status, tau, rows_logged):
    status is -1 on success or the flat index of the first non-finite state.
    """
    nx = x.shape[0]
    dx1 = np.empty(nx)
    dx2 = np.empty(nx)
    dx3 = np.empty(nx)
    dx4 = np.empty(nx)
    xt = np.empty(nx)
    vb = np.empty((n_bus, 2))
    n = mp.shape[0]
    y_prev = np.empty(n)
    y_now = np.empty(n)
    y_mid = np.empty(n)
    any_refresh = False
    for i in range(n):
        if refresh_mask[i]:
            any_refresh = True

    # hoist per-step divisions out of the RK4 loop
    rf_lf = rf / lf
    inv_lf = 1.0 / lf
    inv_cf = 1.0 / cf
    rc_lc = rc / lc
    inv_lc = 1.0 / lc
    wb_cf = wb * cf
    wb_lf = wb * lf
    line_rl = line_r / line_l
    line_invl = 1.0 / line_l
    load_rl = load_r / load_l
    load_invl = 1.0 / load_l

    tau = tau0
    obs_active = obs_active0
    has_noise = noise.shape[0] > 0
    if obs_active:
        j = 0
        for i in range(n):
            y_prev[i] = x[13 * i + 9]
            if has_noise:
                y_prev[i] += noise[j, i]
    row = log_row0

    for step in range(n_steps):
        if obs_reset_step == step:
            for i in range(n):
                for k in range(omegas.shape[0]):
                    for q in range(5):
                        bank[i, k, q] = 0.0
            tau = 0.0
            obs_active = True
            j = step // obs_every
            for i in range(n):
                y_prev[i] = x[13 * i + 9]
                if has_noise:
                    y_prev[i] += noise[j, i]

        # plant RK4 step
        _rhs(x, dx1, vb, mp, nq, rf_lf, inv_lf, inv_cf, rc_lc, inv_lc, kpv,
             kiv, kpc, kic, wc, fff, wb_cf, wb_lf, dg_bus, dg_conn, ref, wn,
             vn, line_from, line_to, line_rl, line_invl, line_closed,
             load_bus, load_rl, load_invl, load_conn, rn)
        for k in range(nx):
            xt[k] = x[k] + 0.5 * dt * dx1[k]
        _rhs(xt, dx2, vb, mp, nq, rf_lf, inv_lf, inv_cf, rc_lc, inv_lc, kpv,
             kiv, kpc, kic, wc, fff, wb_cf, wb_lf, dg_bus, dg_conn, ref, wn,
             vn, line_from, line_to, line_rl, line_invl, line_closed,
             load_bus, load_rl, load_invl, load_conn, rn)
        for k in range(nx):
            xt[k] = x[k] + 0.5 * dt * dx2[k]
        _rhs(xt, dx3, vb, mp, nq, rf_lf, inv_lf, inv_cf, rc_lc, inv_lc, kpv,
             kiv, kpc, kic, wc, fff, wb_cf, wb_lf, dg_bus, dg_conn, ref, wn,
             vn, line_from, line_to, line_rl, line_invl, line_closed,
             load_bus, load_rl, load_invl, load_conn, rn)
        for k in range(nx):
            xt[k] = x[k] + dt * dx3[k]
        _rhs(xt, dx4, vb, mp, nq, rf_lf, inv_lf, inv_cf, rc_lc, inv_lc, kpv,
             kiv, kpc, kic, wc, fff, wb_cf, wb_lf, dg_bus, dg_conn, ref, wn,
             vn, line_from, line_to, line_rl, line_invl, line_closed,
             load_bus, load_rl, load_invl, load_conn, rn)
        for k in range(nx):
            x[k] += (dt / 6.0) * (dx1[k] + 2.0 * dx2[k] + 2.0 * dx3[k] + dx4[k])

        done = step + 1
        if obs_active and done % obs_every == 0:
            j = done // obs_every
            for i in range(n):
                y_now[i] = x[13 * i + 9]
                if has_noise:
                    y_now[i] += noise[j, i]
                y_mid[i] = 0.5 * (y_prev[i] + y_now[i])
            _bank_rk4(bank, tau, obs_every * dt, omegas, varpi,
                      y_prev, y_mid, y_now, u_obs, n)
            tau += obs_every * dt
            for i in range(n):
                y_prev[i] = y_now[i]

        if any_refresh and done % refresh_every == 0:
            # re-evaluate the linearizing bias on the live state: bus
            # voltages first, then the closed-form channel nonlinearity
            for b in range(n_bus):
                vb[b, 0] = 0.0
                vb[b, 1] = 0.0
            for i in range(n):
                if dg_conn[i]:
                    o = 13 * i
                    c = math.cos(x[o + 0])
                    s = math.sin(x[o + 0])
                    vb[dg_bus[i], 0] += c * x[o + 11] - s * x[o + 12]
                    vb[dg_bus[i], 1] += s * x[o + 11] + c * x[o + 12]
            for j in range(line_from.shape[0]):
                if line_closed[j]:
                    o = 13 * n + 2 * j
                    vb[line_from[j], 0] -= x[o]
                    vb[line_from[j], 1] -= x[o + 1]
                    vb[line_to[j], 0] += x[o]
                    vb[line_to[j], 1] += x[o + 1]
            for m in range(load_bus.shape[0]):
                if load_conn[m]:
                    o = 13 * n + 2 * line_from.shape[0] + 2 * m
                    vb[load_bus[m], 0] -= x[o]
                    vb[load_bus[m], 1] -= x[o + 1]
            for b in range(n_bus):
                vb[b, 0] *= rn
                vb[b, 1] *= rn
            for i in range(n):
                if refresh_mask[i]:
                    o = 13 * i
                    c = math.cos(x[o + 0])
                    s = math.sin(x[o + 0])
                    v_bd = c * vb[dg_bus[i], 0] + s * vb[dg_bus[i], 1]
                    w_i = wn[i] - mp[i] * x[o + 1]
                    cl = cf[i] * lf[i]
                    f_now = (
                        (-w_i * w_i - (kpc[i] * kpv[i] + 1.0) / cl
                         - 1.0 / (cf[i] * lc[i])) * x[o + 9]
                        - (wb[i] * kpc[i] / lf[i]) * x[o + 10]
                        + (rc[i] / (cf[i] * lc[i])) * x[o + 11]
                        - (2.0 * w_i / cf[i]) * x[o + 12]
                        - ((rf[i] + kpc[i]) / cl) * x[o + 7]
                        + ((2.0 * w_i - wb[i]) / cf[i]) * x[o + 8]
                        - (kpc[i] * kpv[i] * nq[i] / cl) * x[o + 2]
                        + (kpc[i] * kiv[i] / cl) * x[o + 3]
                        + (kic[i] / cl) * x[o + 5]
                        + (1.0 / (cf[i] * lc[i])) * v_bd)
                    # track only the slow component: the inner loops
                    # damp switching rings themselves
                    if f_lp[i] != f_lp[i]:
                        f_lp[i] = f_now
                    else:
                        f_lp[i] += alpha_f * (f_now - f_lp[i])
                    v_cmd = (xi_hold[i] - f_lp[i]) / g_nom[i]
                    # slew limit: track the slow pull, saturate against
                    # switching rings the inner loops damp themselves
                    dv = v_cmd - vn[i]
                    if dv > vn_slew:
                        dv = vn_slew
                    elif dv < -vn_slew:
                        dv = -vn_slew
                    v_cmd = vn[i] + dv
                    if v_cmd < vn_lo:
                        v_cmd = vn_lo
                    elif v_cmd > vn_hi:
                        v_cmd = vn_hi
                    vn[i] = v_cmd

        if log_stride > 0 and (done + log_phase) % log_stride == 0:
            for k in range(nx):
                if not math.isfinite(x[k]):
                    return k, tau, row - log_row0
            _log_row(x, log_out, row, vb, mp, nq, dg_bus, dg_conn, ref, wn,
                     vn, line_from, line_to, line_closed, load_bus,
                     load_conn, rn)
            row += 1

    for k in range(nx):
        if not math.isfinite(x[k]):
            return k, tau, row - log_row0
    return -1, tau, row - log_row0
