"""Simulation conductor: advances the plant at the fine step, runs the
per-DG observers on their windows, executes the event-triggered (or
time-triggered, or PI) secondary controllers at the controller period, and
resolves message exchange under the link-failure schedule.

Timing of one controller period (t_{k-1}, t_k]:
    - plant integrates at dt with inputs held (kernel spans, split at
      scripted events, which apply at the first step at-or-after their
      timestamp, quantized to the observer grid),
    - the observer bank resets mid-period so its window ends exactly at
      t_k; the estimate consumed at t_k is the final-sample one,
    - at t_k each agent realigns stale neighbor predictions, evaluates the
      optimization trigger, solves or shifts, applies the head input, then
      evaluates the communication trigger; all sends resolve after every
      agent has acted (two-phase, order independent).
"""

from __future__ import annotations

import logging
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import backend as _backend
from .comm import LEADER, PredictionMessage, deliver, leader_sequence
from .fl import compute_f, compute_g
from .observer import (Estimate, KernelParams, assemble_system, estimate)
from .plant import (IDX_DELTA, IDX_IOD, IDX_IOQ, IDX_VOD, N_DG_STATES,
                    PlantDivergedError, _describe_state_index, bus_voltages,
                    kernel_args, network_args)
from .prediction import (PredictionModel, first_input, predict_outputs,
                         shift_sequence)
from .qp import QPWeights, solve_voltage_qp
from .scenario import MAX_DT_RATE, Event, Scenario
from .triggers import (TriggerLog, comm_trigger, holdover_prediction,
                       opt_trigger)

log = logging.getLogger("mgrid")

LOG_COLS = ("delta", "P", "Q", "phi_d", "phi_q", "gam_d", "gam_q", "i_ld",
            "i_lq", "v_od", "v_oq", "i_od", "i_oq", "v_bd", "v_bq", "omega",
            "p_inst", "q_inst", "v_n")


@dataclass
class RunOutput:
    """Everything a run produces; all series share the logging grid."""

    scenario: Scenario
    t_log: np.ndarray
    series: np.ndarray            # (rows, n_dg, len(LOG_COLS))
    vn_log: np.ndarray            # (rows, n_dg) applied setpoint (ZOH)
    xi_log: np.ndarray
    fhat_log: np.ndarray
    z0_log: np.ndarray
    z1_log: np.ndarray
    trigger_log: TriggerLog
    delivery_rows: list           # (step, sender, receiver, delivered)
    observer_rows: list           # (t, dg, f, z0, z1, cond, flagged)
    qp_rows: list                 # (step, dg, kkt, iters, s_lo, s_hi, ok)
    active_steps: int
    activation_step: int
    n_ctrl_steps: int
    wall_time: float
    diverged: bool = False
    divergence_info: str = ""
    metrics: dict = field(default_factory=dict)

    def col(self, name: str) -> np.ndarray:
        return self.series[:, :, LOG_COLS.index(name)]


@dataclass
class _Agent:
    idx: int
    horizon: int
    g_nom: float
    k_m: int = 0
    has_plan: bool = False
    xi_star: np.ndarray = None
    y_pred_km: np.ndarray = None
    last_tx: np.ndarray = None
    last_tx_step: int = 0
    store: dict = field(default_factory=dict)
    est: Estimate = field(default_factory=lambda: Estimate(0, 0, 0, 0, True))
    last_rx_step: int = -1
    xi_apply: float = 0.0
    pi_integ: float = 0.0
    pi_store: dict = field(default_factory=dict)

    def __post_init__(self):
        self.xi_star = np.zeros(self.horizon)
        self.y_pred_km = np.zeros(self.horizon)


def _control_step(agent, k, z0, z1, preds, pm, weights, e_opt, e_com,
                  time_triggered, qp_rows):
    """Table-row logic of one agent at controller step k.  Returns
    (opt_fired, com_fired, reason, message payload or None)."""
    h = agent.horizon
    y = np.array([z0, z1])
    m = k - agent.k_m

    if not agent.has_plan:
        fire, reason = True, "forced"
    elif time_triggered:
        fire, reason = True, "forced"
    else:
        y_pred_now = agent.y_pred_km[min(m, h) - 1]
        fire = opt_trigger(z0, y_pred_now, k, agent.k_m, h, e_opt)
        if fire:
            reason = "error" if abs(z0 - y_pred_now) >= e_opt else "horizon"
        elif agent.last_rx_step >= agent.k_m:
            # fresh neighbor data invalidates the consensus target the
            # current plan was built against
            fire, reason = True, "data"
        else:
            reason = ""

    opt_fired = False
    if fire and preds:
        warm = shift_sequence(agent.xi_star, min(m, h)) if agent.has_plan \
            else None
        sol = solve_voltage_qp(y, preds, weights, pm.f_mat, pm.g_mat, warm)
        agent.xi_star = sol.xi
        agent.k_m = k
        agent.y_pred_km = sol.y_pred.copy()
        agent.has_plan = True
        xi_seq = sol.xi
        y_now = sol.y_pred
        qp_rows.append((k, agent.idx, sol.kkt, sol.iterations, sol.slack_lo,
                        sol.slack_hi, sol.converged))
        opt_fired = True
    else:
        if fire and not preds:
            reason = ""  # nothing to track against; hold the shifted plan
        xi_seq = shift_sequence(agent.xi_star, min(m, h))
        y_now = predict_outputs(pm.f_mat, pm.g_mat, y, xi_seq)

    agent.xi_apply = first_input(xi_seq)

    if agent.last_tx is None or time_triggered:
        com_fired = True
    else:
        y_hold = holdover_prediction(agent.last_tx, k - agent.last_tx_step)
        com_fired = comm_trigger(y_now, y_hold, e_com)
    payload = None
    if com_fired:
        agent.last_tx = y_now.copy()
        agent.last_tx_step = k
        payload = y_now.copy()
    return opt_fired, com_fired, reason, payload


def run(sc: Scenario, backend: str | None = None) -> RunOutput:
    """Execute a scenario deterministically; identical (scenario, seed)
    pairs produce identical outputs."""
    t_wall = time.perf_counter()
    if os.environ.get("MGRID_LOG", "").lower() == "debug":
        logging.basicConfig(level=logging.DEBUG)
    model = sc.plant_model()
    graph = sc.comm_graph()
    kern = _backend.get_kernels(backend)
    n = sc.n_dg
    dt = sc.dt
    rng = np.random.default_rng(sc.seed)

    ctrl_stride = int(round(sc.t_s_mpc / dt))
    log_stride = int(round(sc.t_s / dt))
    n_total = int(round(sc.duration / dt))
    n_ctrl = n_total // ctrl_stride
    obs_every = sc.obs_every
    win_steps = int(round((sc.obs_t_eps + sc.obs_dt_active) / dt))
    win_steps -= win_steps % obs_every
    obs_offset = ctrl_stride - win_steps  # window reset, local to a period
    kp = KernelParams(sc.obs_omegas, sc.obs_varpi)
    omegas = np.array(kp.omegas)
    run_observer = sc.mode != "pi_baseline"

    pm = PredictionModel(sc.t_s, sc.t_s_mpc, sc.horizon)
    weights = QPWeights(horizon=sc.horizon, rho=sc.qp_rho,
                        v_lo=(1.0 - sc.v_band) * sc.v_ref,
                        v_hi=(1.0 + sc.v_band) * sc.v_ref,
                        slack_penalty=sc.qp_slack_penalty)
    leader_pred = leader_sequence(sc.v_ref, sc.horizon)
    g_phys = np.array([compute_g(p) for p in sc.dg_params])
    g_nom = g_phys / (1.0 + sc.gain_error)
    agents = [_Agent(i, sc.horizon, g_nom[i]) for i in range(n)]

    k_act = max(1, int(math.ceil(sc.activation_time() / sc.t_s_mpc - 1e-9)))
    vn_lo = (1.0 - sc.vn_clamp_pu) * sc.v_ref
    vn_hi = (1.0 + sc.vn_clamp_pu) * sc.v_ref
    vn_slew_step = sc.fl_slew * sc.fl_refresh_every * dt
    vn_slew_ctrl = sc.fl_slew * sc.t_s_mpc
    time_triggered = sc.mode == "time_triggered_dmpc"
    e_opt, e_com = sc.e_opt_volts, sc.e_com_volts

    # event script quantized to the observer grid; opening events expand
    # into a resistance-ramp ladder (soft interruption) ending in the
    # actual disconnect so branch currents decay instead of chopping
    ev_steps = []
    n_stage = 6
    stage_steps = max(obs_every,
                      int(round(sc.switch_ramp_s / n_stage / dt)))
    stage_steps -= stage_steps % obs_every

    def _r_max(l_henry):
        return MAX_DT_RATE * 0.9 * l_henry / dt

    for ev in sc.events:
        if ev.kind == "secondary_on":
            continue
        s = int(math.ceil(ev.t / dt - 1e-9))
        s = min(((s + obs_every - 1) // obs_every) * obs_every, n_total)
        if ev.kind == "load_disconnect" and stage_steps > 0:
            idx = [l[0] for l in sc.loads].index(ev.target)
            r0, l0 = sc.loads[idx][2], sc.loads[idx][3]
            cap = _r_max(l0) - model.net.r_n
            for j in range(1, n_stage):
                r_j = min(r0 * 10.0 ** j, cap)
                ev_steps.append((min(s + (j - 1) * stage_steps, n_total),
                                 Event(ev.t, "_ramp_load",
                                       f"{idx}:{r_j}")))
            s = min(s + (n_stage - 1) * stage_steps, n_total)
        elif ev.kind == "dg_unplug" and stage_steps > 0:
            i = sc.dg_index(ev.target)
            r0, l0 = sc.dg_params[i].r_c, sc.dg_params[i].l_c
            cap = _r_max(l0) - model.net.r_n
            for j in range(1, n_stage):
                r_j = min(max(r0, 1.0) * 10.0 ** j, cap)
                ev_steps.append((min(s + (j - 1) * stage_steps, n_total),
                                 Event(ev.t, "_ramp_dg", f"{i}:{r_j}")))
            s = min(s + (n_stage - 1) * stage_steps, n_total)
        elif ev.kind == "breaker_open" and stage_steps > 0:
            idx = [l[0] for l in sc.lines].index(ev.target)
            r0, l0 = sc.lines[idx][3], sc.lines[idx][4]
            cap = _r_max(l0) - 2.0 * model.net.r_n
            for j in range(1, n_stage):
                r_j = min(max(r0, 1.0) * 10.0 ** j, cap)
                ev_steps.append((min(s + (j - 1) * stage_steps, n_total),
                                 Event(ev.t, "_ramp_line", f"{idx}:{r_j}")))
            s = min(s + (n_stage - 1) * stage_steps, n_total)
        ev_steps.append((s, ev))
    ev_steps.sort(key=lambda e: e[0])

    x = np.zeros(model.n_states)
    banks = np.zeros((n, 3, 5))
    tau = 0.0
    obs_active = False
    wn = np.full(n, float(sc.dg_params[0].w_b))
    for i, p in enumerate(sc.dg_params):
        wn[i] = p.w_b
    vn = np.full(n, sc.v_ref)

    n_rows = n_total // log_stride
    series = np.zeros((n_rows, n, len(LOG_COLS)))
    t_log_arr = (np.arange(1, n_rows + 1)) * sc.t_s
    xi_log = np.zeros((n_rows, n))
    fhat_log = np.zeros((n_rows, n))
    z0_log = np.zeros((n_rows, n))
    z1_log = np.zeros((n_rows, n))
    trig = TriggerLog(n)
    delivery_rows: list = []
    observer_rows: list = []
    qp_rows: list = []
    row_count = 0
    diverged = False
    div_info = ""
    empty_noise = np.zeros((0, n))

    def apply_event(ev, step):
        nonlocal x
        t_ev = step * dt
        if ev.kind == "_ramp_load":
            idx, r_j = ev.target.split(":")
            model.net.load_r[int(idx)] = float(r_j)
            return
        if ev.kind == "_ramp_line":
            idx, r_j = ev.target.split(":")
            model.net.line_r[int(idx)] = float(r_j)
            return
        if ev.kind == "_ramp_dg":
            idx, r_j = ev.target.split(":")
            model.rc[int(idx)] = float(r_j)
            return
        if ev.kind in ("load_connect", "load_disconnect"):
            idx = [l[0] for l in sc.loads].index(ev.target)
            model.net.load_conn[idx] = 1 if ev.kind == "load_connect" else 0
            model.net.load_r[idx] = sc.loads[idx][2]
            o = model.load_offset() + 2 * idx
            x[o:o + 2] = 0.0
        elif ev.kind in ("breaker_open", "breaker_close"):
            idx = [l[0] for l in sc.lines].index(ev.target)
            model.net.line_closed[idx] = 1 if ev.kind == "breaker_close" else 0
            model.net.line_r[idx] = sc.lines[idx][3]
            o = model.line_offset() + 2 * idx
            x[o:o + 2] = 0.0
        elif ev.kind == "dg_unplug":
            i = sc.dg_index(ev.target)
            model.dg_conn[i] = 0
            model.rc[i] = sc.dg_params[i].r_c
            x[N_DG_STATES * i + IDX_IOD] = 0.0
            x[N_DG_STATES * i + IDX_IOQ] = 0.0
        elif ev.kind == "dg_plug":
            i = sc.dg_index(ev.target)
            vb = bus_voltages(model, x)
            b = model.dg_bus[i]
            x[N_DG_STATES * i + IDX_DELTA] = math.atan2(vb[b, 1], vb[b, 0])
            model.dg_conn[i] = 1
            agents[i].has_plan = False  # forces a solve at the next step
        log.debug("event %s %s applied at t=%.6f", ev.kind, ev.target, t_ev)

    def integrate(seg_start, seg_end, reset_global, noise_period, period_start):
        """Advance [seg_start, seg_end) fine steps through the kernel."""
        nonlocal tau, obs_active, row_count, diverged, div_info
        n_steps = seg_end - seg_start
        if n_steps <= 0:
            return True
        reset_local = reset_global - seg_start \
            if reset_global is not None and seg_start <= reset_global < seg_end \
            else -1
        if noise_period.shape[0] > 0:
            j0 = (seg_start - period_start) // obs_every
            noise = noise_period[j0:]
        else:
            noise = empty_noise
        status, tau, rows = kern.advance_span(
            x, n_steps, dt, *kernel_args(model), wn, vn,
            *network_args(model), model.net.n_bus,
            banks, tau, obs_active, reset_local, obs_every,
            omegas, kp.varpi, u_obs, noise,
            xi_hold, g_nom, refresh_mask, sc.fl_refresh_every,
            f_lp, alpha_f, vn_lo, vn_hi, vn_slew_step,
            log_stride, seg_start % log_stride, series, row_count)
        row_count += rows
        if reset_local >= 0:
            obs_active = True
        if status >= 0:
            diverged = True
            div_info = _describe_state_index(model, int(status),
                                             (seg_start + n_steps) * dt)
            return False
        return True

    u_obs = np.zeros(n)
    xi_hold = np.zeros(n)
    refresh_mask = np.zeros(n, dtype=np.uint8)
    f_lp = np.full(n, np.nan)
    alpha_f = 1.0 if sc.fl_filter_tau <= 0.0 else \
        1.0 - math.exp(-sc.fl_refresh_every * dt / sc.fl_filter_tau)
    n_obs_rows = ctrl_stride // obs_every + 1

    period = 0
    step0 = 0
    ev_i = 0
    ok = True
    while step0 < n_total and ok:
        period += 1
        step1 = min(step0 + ctrl_stride, n_total)
        full_period = (step1 - step0) == ctrl_stride

        # held controller values reported for this period's log rows
        r0 = step0 // log_stride
        r1 = step1 // log_stride
        for a in agents:
            xi_log[r0:r1, a.idx] = a.xi_apply
            fhat_log[r0:r1, a.idx] = a.est.f_hat
            z0_log[r0:r1, a.idx] = a.est.z0_hat
            z1_log[r0:r1, a.idx] = a.est.z1_hat

        # the observer watches the linearized channel: its input is the
        # realized auxiliary command, so the lumped disturbance it fits
        # stays near-constant inside a window even during transients
        u_obs[:] = xi_hold if run_observer else 0.0
        # the bias refresh starts one period after activation: the held vn
        # inside period p was decided at controller instant p-1
        secondary_live = run_observer and period > k_act
        refresh_mask[:] = model.dg_conn if secondary_live else 0
        reset_global = step0 + obs_offset if (run_observer and full_period) \
            else None
        if sc.noise_sigma > 0.0 and run_observer:
            noise_period = rng.normal(0.0, sc.noise_sigma,
                                      size=(n_obs_rows, n))
        else:
            noise_period = empty_noise

        seg = step0
        while seg < step1 and ok:
            seg_end = step1
            while ev_i < len(ev_steps) and ev_steps[ev_i][0] <= seg:
                apply_event(ev_steps[ev_i][1], seg)
                ev_i += 1
            if ev_i < len(ev_steps):
                seg_end = min(seg_end, ev_steps[ev_i][0])
            ok = integrate(seg, seg_end, reset_global, noise_period, step0)
            seg = seg_end
        if not ok:
            break
        while ev_i < len(ev_steps) and ev_steps[ev_i][0] <= step1 \
                and ev_steps[ev_i][0] == n_total:
            apply_event(ev_steps[ev_i][1], n_total)
            ev_i += 1

        if not full_period:
            break
        k = period
        t_k = step1 * dt

        # observer estimates consumed at t_k; f_hat is reported as the
        # full channel nonlinearity: residual fit plus the closed-form
        # part the inversion currently cancels
        if run_observer:
            complete = tau >= (win_steps - obs_every) * dt - 1e-12
            f_base = _measured_f(sc, model, x) + g_nom * vn - xi_hold
            for a in agents:
                if complete:
                    prev = a.est
                    lam, gam = assemble_system(banks[a.idx], kp, tau)
                    a.est = estimate(lam, gam, prev=prev)
                    v_now = x[N_DG_STATES * a.idx + IDX_VOD]
                    if not a.est.flagged \
                            and (abs(a.est.z0_hat - v_now) > sc.obs_z0_gate
                                 or abs(a.est.z1_hat) > sc.obs_z1_gate):
                        # switching transients ring the LC stage and break
                        # the constant-disturbance premise; hold one window
                        a.est = Estimate(prev.f_hat, prev.z0_hat,
                                         prev.z1_hat, a.est.cond_gamma, True)
                    elif not a.est.flagged:
                        a.est = Estimate(a.est.f_hat + f_base[a.idx],
                                         a.est.z0_hat, a.est.z1_hat,
                                         a.est.cond_gamma, False)
                else:
                    a.est = Estimate(a.est.f_hat, a.est.z0_hat, a.est.z1_hat,
                                     0.0, True)
                observer_rows.append((t_k, a.idx, a.est.f_hat, a.est.z0_hat,
                                      a.est.z1_hat, a.est.cond_gamma,
                                      a.est.flagged))
            obs_active = False

        if k < k_act or k > n_ctrl:
            step0 = step1
            continue

        if sc.mode == "pi_baseline":
            _pi_step(sc, graph, model, agents, x, k, t_k, rng, vn,
                     delivery_rows, trig)
            step0 = step1
            continue

        # bootstrap exchange: zero-input predictions seed empty stores
        if k == k_act:
            seeds = []
            for a in agents:
                if not model.dg_conn[a.idx]:
                    continue
                y = np.array([a.est.z0_hat, a.est.z1_hat])
                seeds.append(PredictionMessage(
                    a.idx, k, predict_outputs(pm.f_mat, pm.g_mat, y,
                                              np.zeros(sc.horizon))))
            inboxes, _ = deliver(seeds, graph, sc.link_schedule, t_k)
            for i, msgs in inboxes.items():
                for msg in msgs:
                    agents[i].store[msg.sender] = (msg.payload, k)

        # phase A: every connected agent decides from snapshotted stores
        messages = []
        for a in agents:
            if not model.dg_conn[a.idx]:
                trig.append(k, a.idx, False, False, "")
                continue
            preds = []
            for j in graph.neighbors(a.idx):
                if j == LEADER:
                    preds.append(leader_pred)
                elif j in a.store:
                    payload, k_l = a.store[j]
                    preds.append(holdover_prediction(payload, k - k_l))
            if a.est.flagged:
                # unusable window (switching ring): plan from the sensed
                # position at rest instead of the stale estimate
                z0_k = x[N_DG_STATES * a.idx + IDX_VOD]
                z1_k = 0.0
            else:
                z0_k, z1_k = a.est.z0_hat, a.est.z1_hat
            opt_f, com_f, reason, payload = _control_step(
                a, k, z0_k, z1_k, preds, pm, weights,
                e_opt, e_com, time_triggered, qp_rows)
            trig.append(k, a.idx, opt_f, com_f, reason)
            if payload is not None:
                messages.append(PredictionMessage(a.idx, k, payload))

        # phase B: resolve deliveries, then apply the physical setpoints
        inboxes, rows = deliver(messages, graph, sc.link_schedule, t_k)
        for s, r_, d in rows:
            delivery_rows.append((k, s, r_, d))
        for i, msgs in inboxes.items():
            for msg in msgs:
                agents[i].store[msg.sender] = (msg.payload, k)
                agents[i].last_rx_step = k
        f_now = _measured_f(sc, model, x)
        f_bias = np.where(np.isnan(f_lp), f_now, f_lp)
        for a in agents:
            if model.dg_conn[a.idx]:
                v_cmd = (a.xi_apply - f_bias[a.idx]) / a.g_nom
                v_cmd = min(max(v_cmd, vn[a.idx] - vn_slew_ctrl),
                            vn[a.idx] + vn_slew_ctrl)
                vn[a.idx] = min(max(v_cmd, vn_lo), vn_hi)
            xi_hold[a.idx] = a.xi_apply

        step0 = step1

    out = RunOutput(
        scenario=sc,
        t_log=t_log_arr[:row_count],
        series=series[:row_count],
        vn_log=series[:row_count, :, LOG_COLS.index("v_n")],
        xi_log=xi_log[:row_count],
        fhat_log=fhat_log[:row_count], z0_log=z0_log[:row_count],
        z1_log=z1_log[:row_count],
        trigger_log=trig, delivery_rows=delivery_rows,
        observer_rows=observer_rows, qp_rows=qp_rows,
        active_steps=max(0, n_ctrl - k_act + 1), activation_step=k_act,
        n_ctrl_steps=n_ctrl,
        wall_time=time.perf_counter() - t_wall,
        diverged=diverged, divergence_info=div_info,
    )
    from .metrics import compute_metrics
    out.metrics = compute_metrics(out)
    if diverged:
        log.error("plant diverged: %s", div_info)
    return out


def _measured_f(sc, model, x):
    """Closed-form channel nonlinearity per DG on the current state (the
    sensor-based side of the linearization; the deadbeat estimate serves
    the prediction/trigger layer and validation logs)."""
    vb = bus_voltages(model, x)
    out = np.zeros(sc.n_dg)
    for i in range(sc.n_dg):
        s = x[N_DG_STATES * i:N_DG_STATES * (i + 1)]
        p = sc.dg_params[i]
        w_i = p.w_b - p.m_p * s[1]
        c, sn = math.cos(s[0]), math.sin(s[0])
        b = model.dg_bus[i]
        v_bd = c * vb[b, 0] + sn * vb[b, 1]
        out[i] = compute_f(s, p, v_bd, w_i)
    return out


def pi_baseline_step(v_meas: float, neighbor_values, v_ref: float,
                     integ: float, k_p: float, k_i: float, t_step: float):
    """Distributed PI on the neighbor-averaged voltage error with the
    integral state clamped to +/-0.2 p.u. of the reference.  Returns
    (v_n, new_integral)."""
    if not neighbor_values:
        return v_ref + np.clip(integ, -0.2 * v_ref, 0.2 * v_ref), integ
    err = float(np.mean(neighbor_values)) - v_meas
    integ = float(np.clip(integ + k_i * err * t_step,
                          -0.2 * v_ref, 0.2 * v_ref))
    corr = float(np.clip(k_p * err + integ, -0.2 * v_ref, 0.2 * v_ref))
    return v_ref + corr, integ


def _pi_step(sc, graph, model, agents, x, k, t_k, rng, vn, delivery_rows,
             trig):
    n = sc.n_dg
    v_meas = np.array([x[N_DG_STATES * i + IDX_VOD] for i in range(n)])
    if sc.noise_sigma > 0.0:
        v_meas = v_meas + rng.normal(0.0, sc.noise_sigma, size=n)
    messages = [PredictionMessage(i, k, np.array([v_meas[i]]))
                for i in range(n) if model.dg_conn[i]]
    inboxes, rows = deliver(messages, graph, sc.link_schedule, t_k)
    for s, r_, d in rows:
        delivery_rows.append((k, s, r_, d))
    for i, msgs in inboxes.items():
        for msg in msgs:
            agents[i].pi_store[msg.sender] = float(msg.payload[0])
    for a in agents:
        if not model.dg_conn[a.idx]:
            trig.append(k, a.idx, False, False, "")
            continue
        vals = []
        for j in graph.neighbors(a.idx):
            if j == LEADER:
                vals.append(sc.v_ref)
            elif j in a.pi_store:
                vals.append(a.pi_store[j])
        v_n, a.pi_integ = pi_baseline_step(
            float(v_meas[a.idx]), vals, sc.v_ref, a.pi_integ,
            sc.pi_kp, sc.pi_ki, sc.t_s_mpc)
        vn[a.idx] = v_n
        trig.append(k, a.idx, True, True, "forced")
