"""CSV/JSON export of run outputs.

Floats are serialized with 9 significant digits; identical runs produce
byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path


def _fmt(x) -> str:
    return f"{float(x):.9g}"


def export_csv(out, outdir) -> dict:
    """Write timeseries.csv, triggers.csv, delivery.csv, observer.csv and
    metrics.json into ``outdir``; returns {name: path}."""
    outdir = Path(outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"cannot create output directory {outdir}: {e}") from e
    sc = out.scenario
    paths = {}

    def write(name, text):
        p = outdir / name
        try:
            p.write_text(text)
        except OSError as e:
            raise OSError(f"cannot write {p}: {e}") from e
        paths[name] = p

    lines = ["t,dg,v_od,v_oq,P,Q,omega,V_n,xi,f_hat,z0_hat,z1_hat"]
    v_od = out.col("v_od")
    v_oq = out.col("v_oq")
    p_f = out.col("P")
    q_f = out.col("Q")
    omega = out.col("omega")
    for r in range(len(out.t_log)):
        t = out.t_log[r]
        for i in range(sc.n_dg):
            lines.append(",".join([
                _fmt(t), sc.dg_names[i], _fmt(v_od[r, i]), _fmt(v_oq[r, i]),
                _fmt(p_f[r, i]), _fmt(q_f[r, i]), _fmt(omega[r, i]),
                _fmt(out.vn_log[r, i]), _fmt(out.xi_log[r, i]),
                _fmt(out.fhat_log[r, i]), _fmt(out.z0_log[r, i]),
                _fmt(out.z1_log[r, i]),
            ]))
    write("timeseries.csv", "\n".join(lines) + "\n")

    tl = out.trigger_log
    lines = ["step,dg,opt_fired,com_fired,reason"]
    for s, d, o, c, r in zip(tl.steps, tl.dgs, tl.opt_fired, tl.com_fired,
                             tl.reasons):
        lines.append(f"{s},{sc.dg_names[d]},{int(o)},{int(c)},{r}")
    write("triggers.csv", "\n".join(lines) + "\n")

    lines = ["step,edge,delivered"]
    for step, snd, rcv, ok in out.delivery_rows:
        lines.append(f"{step},{sc.dg_names[snd]}->{sc.dg_names[rcv]},{int(ok)}")
    write("delivery.csv", "\n".join(lines) + "\n")

    lines = ["t,dg,f_hat,z0_hat,z1_hat,cond_gamma,flagged"]
    for t, d, f, z0, z1, cond, fl in out.observer_rows:
        lines.append(f"{_fmt(t)},{sc.dg_names[d]},{_fmt(f)},{_fmt(z0)},"
                     f"{_fmt(z1)},{_fmt(cond)},{int(fl)}")
    write("observer.csv", "\n".join(lines) + "\n")

    write("metrics.json", json.dumps(_round_floats(out.metrics), indent=2,
                                     sort_keys=True) + "\n")
    return paths


def _round_floats(obj):
    if isinstance(obj, float):
        return float(_fmt(obj))
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj
