"""Run summaries: trigger reductions, tracking error, constraint
excursions and per-event settling times."""

from __future__ import annotations

import numpy as np

from .triggers import reduction_metrics

SETTLE_BAND = 0.02      # fraction of v_ref
EXCURSION_BAND = 0.03   # constraint band of the voltage QP
T_BAR = 0.166           # allowed contiguous out-of-band time (s)


def event_intervals(out):
    """Consecutive [t_a, t_b) intervals between scripted events inside the
    secondary-active span (activation counts as the first event)."""
    sc = out.scenario
    t_act = out.activation_step * sc.t_s_mpc
    times = sorted({t_act} | {ev.t for ev in sc.events if ev.t > t_act
                              and ev.kind != "secondary_on"})
    times = [t for t in times if t < sc.duration]
    times.append(sc.duration)
    return [(times[i], times[i + 1]) for i in range(len(times) - 1)]


def steady_state_rms(out, tail_frac: float = 0.25):
    """Per-DG RMS of (v_od - v_ref) over the trailing ``tail_frac`` of
    every inter-event interval, averaged over intervals."""
    sc = out.scenario
    v = out.col("v_od")
    t = out.t_log
    acc = np.zeros(v.shape[1])
    n_int = 0
    for t_a, t_b in event_intervals(out):
        lo = t_b - tail_frac * (t_b - t_a)
        mask = (t >= lo) & (t <= t_b + 1e-12)
        if not np.any(mask):
            continue
        err = v[mask] - sc.v_ref
        acc += np.sqrt(np.mean(err * err, axis=0))
        n_int += 1
    return acc / max(n_int, 1)


def longest_excursion(out):
    """Longest contiguous time (s) any DG voltage spends outside the
    [1 - band, 1 + band] p.u. box after secondary activation."""
    sc = out.scenario
    t_act = out.activation_step * sc.t_s_mpc
    v = out.col("v_od")
    t = out.t_log
    mask_t = t >= t_act - 1e-12
    lo = (1.0 - EXCURSION_BAND) * sc.v_ref
    hi = (1.0 + EXCURSION_BAND) * sc.v_ref
    worst = 0.0
    per_dg = []
    for i in range(v.shape[1]):
        out_of_band = ((v[mask_t, i] < lo) | (v[mask_t, i] > hi))
        longest = 0
        runlen = 0
        for flag in out_of_band:
            runlen = runlen + 1 if flag else 0
            longest = max(longest, runlen)
        dur = longest * sc.t_s
        per_dg.append(dur)
        worst = max(worst, dur)
    return per_dg, worst


def settling_times(out, band: float = SETTLE_BAND):
    """Per event interval: earliest time after the event from which every
    DG stays within the band of v_ref until the next event (None if the
    interval never settles)."""
    sc = out.scenario
    v = out.col("v_od")
    t = out.t_log
    tol = band * sc.v_ref
    err_max = np.max(np.abs(v - sc.v_ref), axis=1)
    results = []
    for t_a, t_b in event_intervals(out):
        mask = (t > t_a + 1e-12) & (t <= t_b + 1e-12)
        idx = np.flatnonzero(mask)
        if len(idx) == 0:
            results.append({"event_t": t_a, "settling_s": None})
            continue
        ok = err_max[idx] <= tol
        # last violation within the interval decides the settling instant
        bad = np.flatnonzero(~ok)
        if len(bad) == 0:
            settle = 0.0
        elif bad[-1] == len(idx) - 1:
            settle = None
        else:
            settle = float(t[idx[bad[-1] + 1]] - t_a)
        results.append({"event_t": t_a, "settling_s": settle})
    return results


def compute_metrics(out) -> dict:
    sc = out.scenario
    m: dict = {"mode": sc.mode, "seed": sc.seed, "duration": sc.duration,
               "diverged": out.diverged}
    if out.diverged:
        m["divergence_info"] = out.divergence_info
    if out.active_steps > 0 and len(out.trigger_log.steps) > 0:
        m.update(reduction_metrics(out.trigger_log, out.active_steps,
                                   sc.n_dg))
    if len(out.t_log):
        per_dg, worst = longest_excursion(out)
        m["steady_state_rms_v"] = [float(x) for x in steady_state_rms(out)]
        m["steady_state_rms_avg_v"] = float(np.mean(m["steady_state_rms_v"]))
        m["longest_excursion_s"] = per_dg
        m["longest_excursion_max_s"] = worst
        m["excursion_within_t_bar"] = bool(worst < T_BAR)
        m["settling"] = settling_times(out)
    if out.qp_rows:
        kkts = [r[2] for r in out.qp_rows]
        m["qp_solves"] = len(out.qp_rows)
        m["qp_max_kkt"] = float(max(kkts))
        m["qp_nonconverged"] = int(sum(1 for r in out.qp_rows if not r[6]))
        m["qp_max_slack"] = float(max(max(r[4], r[5]) for r in out.qp_rows))
    # wall time stays off the exported metrics to keep reruns byte-identical
    return m
