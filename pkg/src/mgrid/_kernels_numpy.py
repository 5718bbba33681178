"""Pure-numpy fallback for the hot kernels (same call signature as the
numba versions; vectorized across DGs, Python loop over time steps).

Roughly two orders of magnitude slower than the JIT path; intended for
environments without numba and as the reference in backend-equivalence
tests and benchmarks.
"""

import numpy as np

N_LOG_COLS = 19


def _bus_voltages(x, vb, dg_bus, dg_conn, line_from, line_to, line_closed,
                  load_bus, load_conn, rn, n):
    n_line = line_from.shape[0]
    lo_line = 13 * n
    lo_load = lo_line + 2 * n_line
    vb[:] = 0.0
    for i in range(n):
        if dg_conn[i]:
            o = 13 * i
            c, s = np.cos(x[o]), np.sin(x[o])
            vb[dg_bus[i], 0] += c * x[o + 11] - s * x[o + 12]
            vb[dg_bus[i], 1] += s * x[o + 11] + c * x[o + 12]
    for j in range(n_line):
        if line_closed[j]:
            o = lo_line + 2 * j
            vb[line_from[j], 0] -= x[o]
            vb[line_from[j], 1] -= x[o + 1]
            vb[line_to[j], 0] += x[o]
            vb[line_to[j], 1] += x[o + 1]
    for m in range(load_bus.shape[0]):
        if load_conn[m]:
            o = lo_load + 2 * m
            vb[load_bus[m], 0] -= x[o]
            vb[load_bus[m], 1] -= x[o + 1]
    vb *= rn


def rhs_arrays(x, dx, vb, mp, nq, rf, lf, cf, rc, lc, kpv, kiv, kpc, kic, wc,
               fff, wb, dg_bus, dg_conn, ref, wn, vn, line_from, line_to,
               line_r, line_l, line_closed, load_bus, load_r, load_l,
               load_conn, rn):
    n = mp.shape[0]
    n_line = line_from.shape[0]
    n_load = load_bus.shape[0]
    lo_line = 13 * n
    lo_load = lo_line + 2 * n_line
    dgs = x[:lo_line].reshape(n, 13)

    delta = dgs[:, 0]
    P, Q = dgs[:, 1], dgs[:, 2]
    phid, phiq = dgs[:, 3], dgs[:, 4]
    gamd, gamq = dgs[:, 5], dgs[:, 6]
    ild, ilq = dgs[:, 7], dgs[:, 8]
    vod, voq = dgs[:, 9], dgs[:, 10]
    iod, ioq = dgs[:, 11], dgs[:, 12]

    w_com = wn[ref] - mp[ref] * P[ref]
    _bus_voltages(x, vb, dg_bus, dg_conn, line_from, line_to, line_closed,
                  load_bus, load_conn, rn, n)

    # same hoisted coefficients as the JIT kernel (keeps results bit-equal)
    rf_lf, inv_lf, inv_cf = rf / lf, 1.0 / lf, 1.0 / cf
    rc_lc, inv_lc = rc / lc, 1.0 / lc
    wb_cf, wb_lf = wb * cf, wb * lf

    w_i = wn - mp * P
    v_od_ref = vn - nq * Q
    c, s = np.cos(delta), np.sin(delta)
    v_bd = c * vb[dg_bus, 0] + s * vb[dg_bus, 1]
    v_bq = -s * vb[dg_bus, 0] + c * vb[dg_bus, 1]

    i_ld_ref = fff * iod - wb_cf * voq + kpv * (v_od_ref - vod) + kiv * phid
    i_lq_ref = fff * ioq + wb_cf * vod + kpv * (0.0 - voq) + kiv * phiq
    v_id = -wb_lf * ilq + kpc * (i_ld_ref - ild) + kic * gamd
    v_iq = wb_lf * ild + kpc * (i_lq_ref - ilq) + kic * gamq
    p_inst = vod * iod + voq * ioq
    q_inst = voq * iod - vod * ioq

    d = dx[:lo_line].reshape(n, 13)
    d[:, 0] = w_i - w_com
    d[:, 1] = wc * (p_inst - P)
    d[:, 2] = wc * (q_inst - Q)
    d[:, 3] = v_od_ref - vod
    d[:, 4] = 0.0 - voq
    d[:, 5] = i_ld_ref - ild
    d[:, 6] = i_lq_ref - ilq
    d[:, 7] = -rf_lf * ild + w_i * ilq + (v_id - vod) * inv_lf
    d[:, 8] = -rf_lf * ilq - w_i * ild + (v_iq - voq) * inv_lf
    d[:, 9] = w_i * voq + (ild - iod) * inv_cf
    d[:, 10] = -w_i * vod + (ilq - ioq) * inv_cf
    d[:, 11] = -rc_lc * iod + w_i * ioq + (vod - v_bd) * inv_lc
    d[:, 12] = -rc_lc * ioq - w_i * iod + (voq - v_bq) * inv_lc
    d[dg_conn == 0, :] = 0.0

    for j in range(n_line):
        o = lo_line + 2 * j
        if line_closed[j]:
            rl = line_r[j] / line_l[j]
            invl = 1.0 / line_l[j]
            dv_d = vb[line_from[j], 0] - vb[line_to[j], 0]
            dv_q = vb[line_from[j], 1] - vb[line_to[j], 1]
            dx[o] = -rl * x[o] + w_com * x[o + 1] + dv_d * invl
            dx[o + 1] = -rl * x[o + 1] - w_com * x[o] + dv_q * invl
        else:
            dx[o] = 0.0
            dx[o + 1] = 0.0
    for m in range(n_load):
        o = lo_load + 2 * m
        if load_conn[m]:
            b = load_bus[m]
            rl = load_r[m] / load_l[m]
            invl = 1.0 / load_l[m]
            dx[o] = -rl * x[o] + w_com * x[o + 1] + vb[b, 0] * invl
            dx[o + 1] = -rl * x[o + 1] - w_com * x[o] + vb[b, 1] * invl
        else:
            dx[o] = 0.0
            dx[o + 1] = 0.0


def _log_row(x, out, row, vb, mp, nq, dg_bus, dg_conn, ref, wn, vn, line_from,
             line_to, line_closed, load_bus, load_conn, rn):
    n = mp.shape[0]
    _bus_voltages(x, vb, dg_bus, dg_conn, line_from, line_to, line_closed,
                  load_bus, load_conn, rn, n)
    dgs = x[:13 * n].reshape(n, 13)
    out[row, :, :13] = dgs
    c, s = np.cos(dgs[:, 0]), np.sin(dgs[:, 0])
    out[row, :, 13] = c * vb[dg_bus, 0] + s * vb[dg_bus, 1]
    out[row, :, 14] = -s * vb[dg_bus, 0] + c * vb[dg_bus, 1]
    out[row, :, 15] = wn - mp * dgs[:, 1]
    out[row, :, 16] = dgs[:, 9] * dgs[:, 11] + dgs[:, 10] * dgs[:, 12]
    out[row, :, 17] = dgs[:, 10] * dgs[:, 11] - dgs[:, 9] * dgs[:, 12]
    out[row, :, 18] = vn


def _bank_rk4(bank, tau, h, omegas, varpi, y0, ym, y1, u_obs, n):
    e = np.exp(-varpi * (tau + np.array([0.0, 0.5 * h, h])))
    phi = (1.0 - e) ** 2
    dphi = 2.0 * varpi * e * (1.0 - e)
    ddphi = 2.0 * varpi * varpi * (2.0 * e * e - e)
    rises = np.stack([phi, dphi, ddphi, phi, phi])        # (5, 3)
    ones = np.ones(n)
    sigs = np.stack([
        np.stack([y0, ym, y1], axis=1),
        np.stack([y0, ym, y1], axis=1),
        np.stack([y0, ym, y1], axis=1),
        np.stack([u_obs, u_obs, u_obs], axis=1),
        np.stack([ones, ones, ones], axis=1),
    ])                                                    # (5, n, 3)
    drive = rises[:, None, :] * sigs                      # (5, n, 3)
    d0 = drive[:, :, 0].T[:, None, :]                     # (n, 1, 5)
    dm = drive[:, :, 1].T[:, None, :]
    d1 = drive[:, :, 2].T[:, None, :]
    w = omegas[None, :, None]                             # (1, 3, 1)
    v = bank
    k1 = d0 - w * v
    k2 = dm - w * (v + 0.5 * h * k1)
    k3 = dm - w * (v + 0.5 * h * k2)
    k4 = d1 - w * (v + h * k3)
    bank += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


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
    nx = x.shape[0]
    dx1 = np.empty(nx)
    dx2 = np.empty(nx)
    dx3 = np.empty(nx)
    dx4 = np.empty(nx)
    vb = np.empty((n_bus, 2))
    n = mp.shape[0]
    vod_idx = 13 * np.arange(n) + 9

    args = (mp, nq, rf, lf, cf, rc, lc, kpv, kiv, kpc, kic, wc, fff, wb,
            dg_bus, dg_conn, ref, wn, vn, line_from, line_to, line_r, line_l,
            line_closed, load_bus, load_r, load_l, load_conn, rn)

    tau = tau0
    obs_active = bool(obs_active0)
    has_noise = noise.shape[0] > 0
    any_refresh = bool(np.any(refresh_mask))
    y_prev = None
    if obs_active:
        y_prev = x[vod_idx].copy()
        if has_noise:
            y_prev += noise[0]
    row = log_row0

    for step in range(n_steps):
        if obs_reset_step == step:
            bank[:] = 0.0
            tau = 0.0
            obs_active = True
            y_prev = x[vod_idx].copy()
            if has_noise:
                y_prev += noise[step // obs_every]

        rhs_arrays(x, dx1, vb, *args)
        rhs_arrays(x + 0.5 * dt * dx1, dx2, vb, *args)
        rhs_arrays(x + 0.5 * dt * dx2, dx3, vb, *args)
        rhs_arrays(x + dt * dx3, dx4, vb, *args)
        x += (dt / 6.0) * (dx1 + 2.0 * dx2 + 2.0 * dx3 + dx4)

        done = step + 1
        if obs_active and done % obs_every == 0:
            y_now = x[vod_idx].copy()
            if has_noise:
                y_now += noise[done // obs_every]
            _bank_rk4(bank, tau, obs_every * dt, omegas, varpi,
                      y_prev, 0.5 * (y_prev + y_now), y_now, u_obs, n)
            tau += obs_every * dt
            y_prev = y_now

        if any_refresh and done % refresh_every == 0:
            import math
            _bus_voltages(x, vb, dg_bus, dg_conn, line_from, line_to,
                          line_closed, load_bus, load_conn, rn, n)
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
            if not np.all(np.isfinite(x)):
                return int(np.flatnonzero(~np.isfinite(x))[0]), tau, row - log_row0
            _log_row(x, log_out, row, vb, mp, nq, dg_bus, dg_conn, ref, wn,
                     vn, line_from, line_to, line_closed, load_bus,
                     load_conn, rn)
            row += 1

    if not np.all(np.isfinite(x)):
        return int(np.flatnonzero(~np.isfinite(x))[0]), tau, row - log_row0
    return -1, tau, row - log_row0
