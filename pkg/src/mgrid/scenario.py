"""Scenario schema: JSON loading, validation, stock system builders and
the timed event script.

See docs/scenario-schema.md for the file format.  Unknown keys, unknown
event kinds and physically unsound timing are rejected at load time with
the offending key named.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .comm import CommGraph, LinkSchedule
from .params import (DEFAULT_DG_PARAMS, DG1_PARAMS, DG2_PARAMS, DG34_PARAMS,
                     DGParams, OMEGA_B, V_REF)
from .plant import NetworkModel, PlantModel

EVENT_KINDS = ("load_connect", "load_disconnect", "dg_unplug", "dg_plug",
               "link_down", "link_up", "breaker_open", "breaker_close",
               "secondary_on")
MODES = ("etdmpc", "time_triggered_dmpc", "pi_baseline")
# CLI aliases
MODE_ALIASES = {"etdmpc": "etdmpc", "time-triggered": "time_triggered_dmpc",
                "time_triggered_dmpc": "time_triggered_dmpc",
                "pi": "pi_baseline", "pi_baseline": "pi_baseline"}

# RK4 keeps the fastest closure mode stable only for dt*rate below ~2.8;
# scenarios are rejected beyond 2.0 to leave transient margin.
MAX_DT_RATE = 2.0


class ScenarioError(ValueError):
    """Scenario file failed validation."""


@dataclass
class Event:
    t: float
    kind: str
    target: str = ""


@dataclass
class Scenario:
    name: str
    duration: float
    mode: str = "etdmpc"
    seed: int = 0
    v_ref: float = V_REF
    e_opt: float = 0.1
    e_com: float = 0.1
    thresholds_in_pu: bool = False
    noise_sigma: float = 0.0
    gain_error: float = 0.0
    dt: float = 1e-6
    t_s: float = 0.01
    t_s_mpc: float = 0.05
    horizon: int = 10
    obs_every: int = 10
    fl_refresh_every: int = 1
    fl_filter_tau: float = 0.0
    fl_slew: float = 800.0
    switch_ramp_s: float = 3e-3
    obs_omegas: tuple = (1.0, 2.0, 3.0)
    obs_varpi: float = 2.5
    obs_t_eps: float = 0.02
    obs_dt_active: float = 0.02
    obs_z0_gate: float = 5.0
    obs_z1_gate: float = 2000.0
    vn_clamp_pu: float = 0.2
    qp_rho: float = 1e-6
    qp_slack_penalty: float = 1e6
    v_band: float = 0.03
    pi_kp: float = 0.5
    pi_ki: float = 20.0
    dg_names: list = field(default_factory=list)
    dg_params: list = field(default_factory=list)
    dg_bus: list = field(default_factory=list)
    ref_dg: int = 0
    n_bus: int = 0
    lines: list = field(default_factory=list)   # (name, from, to, r, l, closed)
    loads: list = field(default_factory=list)   # (name, bus, r, l, connected)
    r_n: float = 200.0
    comm_edges: list = field(default_factory=list)  # 0-based (i, j) both ways
    pins: list = field(default_factory=list)
    events: list = field(default_factory=list)
    link_schedule: LinkSchedule = field(default_factory=LinkSchedule)

    @property
    def r(self) -> int:
        return int(round(self.t_s_mpc / self.t_s))

    @property
    def n_dg(self) -> int:
        return len(self.dg_names)

    def dg_index(self, name: str) -> int:
        return self.dg_names.index(name.lower())

    def comm_graph(self) -> CommGraph:
        n = self.n_dg
        a = np.zeros((n, n))
        for i, j in self.comm_edges:
            a[i, j] = 1.0
        return CommGraph(a, np.asarray(self.pins, dtype=float))

    def plant_model(self) -> PlantModel:
        net = NetworkModel(
            n_bus=self.n_bus,
            line_from=np.array([l[1] for l in self.lines], dtype=np.int64),
            line_to=np.array([l[2] for l in self.lines], dtype=np.int64),
            line_r=np.array([l[3] for l in self.lines]),
            line_l=np.array([l[4] for l in self.lines]),
            line_closed=np.array([l[5] for l in self.lines], dtype=np.uint8),
            load_bus=np.array([l[1] for l in self.loads], dtype=np.int64),
            load_r=np.array([l[2] for l in self.loads]),
            load_l=np.array([l[3] for l in self.loads]),
            load_conn=np.array([l[4] for l in self.loads], dtype=np.uint8),
            r_n=self.r_n,
        )
        return PlantModel(params=list(self.dg_params),
                          dg_bus=np.array(self.dg_bus, dtype=np.int64),
                          ref=self.ref_dg, net=net)

    @property
    def e_opt_volts(self) -> float:
        return self.e_opt * self.v_ref if self.thresholds_in_pu else self.e_opt

    @property
    def e_com_volts(self) -> float:
        return self.e_com * self.v_ref if self.thresholds_in_pu else self.e_com

    def activation_time(self) -> float:
        for ev in self.events:
            if ev.kind == "secondary_on":
                return ev.t
        raise ScenarioError("scenario has no secondary_on event")


def _stock_4dg():
    """The 4-bus chain system with stock parameters.

    Load 3 is carried as two parallel halves so scripts can switch half of
    it; load2 and the second half start disconnected."""
    return {
        "dgs": [
            {"name": "dg1", "bus": 0, "params": "dg1"},
            {"name": "dg2", "bus": 1, "params": "dg2"},
            {"name": "dg3", "bus": 2, "params": "dg3"},
            {"name": "dg4", "bus": 3, "params": "dg4"},
        ],
        "n_bus": 4,
        "ref_dg": "dg1",
        "lines": [
            {"name": "line1", "from": 0, "to": 1, "r": 0.23, "l": 318e-6},
            {"name": "line2", "from": 1, "to": 2, "r": 0.35, "l": 1847e-6},
            {"name": "line3", "from": 2, "to": 3, "r": 0.23, "l": 318e-6},
        ],
        "loads": [
            {"name": "load1", "bus": 0, "r": 2.0, "l": 6.4e-3},
            {"name": "load2", "bus": 1, "r": 4.0, "l": 9.6e-3,
             "connected": False},
            {"name": "load3a", "bus": 2, "r": 12.0, "l": 25.6e-3},
            {"name": "load3b", "bus": 2, "r": 12.0, "l": 25.6e-3,
             "connected": False},
            {"name": "load4", "bus": 3, "r": 6.0, "l": 12.8e-3},
            {"name": "load_sag", "bus": 3, "r": 3.0, "l": 6.4e-3,
             "connected": False},
        ],
        "comm": {"edges": [["dg1", "dg2"], ["dg2", "dg3"], ["dg3", "dg4"]],
                 "pins": ["dg1"]},
    }


def _stock_ieee13():
    """Six-DG stand-in for the modified 13-bus feeder: stock DG parameter
    sets (DG5 duplicates DG4, DG6 duplicates DG1), line impedances reused
    from the 4-bus system, breaker between buses 671 and 692."""
    line1 = {"r": 0.23, "l": 318e-6}
    line2 = {"r": 0.35, "l": 1847e-6}
    # buses: 0:632 1:633 2:645 3:671 4:692 5:675 6:684
    return {
        "dgs": [
            {"name": "dg1", "bus": 0, "params": "dg1"},
            {"name": "dg2", "bus": 1, "params": "dg2"},
            {"name": "dg3", "bus": 2, "params": "dg3"},
            {"name": "dg4", "bus": 3, "params": "dg4"},
            {"name": "dg5", "bus": 5, "params": "dg4"},
            {"name": "dg6", "bus": 6, "params": "dg1"},
        ],
        "n_bus": 7,
        "ref_dg": "dg1",
        "lines": [
            {"name": "l632_633", "from": 0, "to": 1, **line1},
            {"name": "l632_645", "from": 0, "to": 2, **line2},
            {"name": "l632_671", "from": 0, "to": 3, **line1},
            {"name": "brk671_692", "from": 3, "to": 4, **line1,
             "breaker": True},
            {"name": "l692_675", "from": 4, "to": 5, **line1},
            {"name": "l671_684", "from": 3, "to": 6, **line2},
        ],
        "loads": [
            {"name": "load632", "bus": 0, "r": 4.0, "l": 9.6e-3},
            {"name": "load645a", "bus": 2, "r": 12.0, "l": 25.6e-3},
            {"name": "load645b", "bus": 2, "r": 12.0, "l": 25.6e-3},
            {"name": "load675a", "bus": 5, "r": 12.0, "l": 25.6e-3},
            {"name": "load675b", "bus": 5, "r": 12.0, "l": 25.6e-3,
             "connected": False},
            {"name": "load684", "bus": 6, "r": 6.0, "l": 12.8e-3},
            {"name": "load692", "bus": 4, "r": 4.0, "l": 9.6e-3},
        ],
        "comm": {"edges": [["dg1", "dg2"], ["dg2", "dg3"], ["dg3", "dg4"],
                           ["dg4", "dg5"], ["dg5", "dg6"]],
                 "pins": ["dg1"]},
    }


STOCK_SYSTEMS = {"4dg": _stock_4dg, "ieee13": _stock_ieee13}

_TOP_KEYS = {"name", "duration", "mode", "seed", "v_ref", "system",
             "thresholds", "noise_sigma", "gain_error", "timing", "observer",
             "qp", "pi", "events", "link_schedule"}


def _fail(key, msg):
    raise ScenarioError(f"scenario key '{key}': {msg}")


def _resolve_params(spec, key):
    if isinstance(spec, str):
        if spec not in DEFAULT_DG_PARAMS:
            _fail(key, f"unknown parameter set {spec!r}")
        return DEFAULT_DG_PARAMS[spec]
    if isinstance(spec, dict):
        base = DEFAULT_DG_PARAMS.get(spec.pop("base", "dg1"))
        try:
            return base.with_(**spec)
        except TypeError as e:
            _fail(key, str(e))
    _fail(key, "must be a stock set name or an override dict")


def load_scenario(path) -> Scenario:
    """Load, default-fill and validate a scenario file."""
    path = Path(path)
    if not path.exists():
        raise ScenarioError(f"scenario file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ScenarioError(f"scenario file is not valid JSON: {e}") from e
    return scenario_from_dict(raw, name_default=path.stem)


def scenario_from_dict(raw: dict, name_default: str = "scenario") -> Scenario:
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        _fail(sorted(unknown)[0], "unknown key")
    for req in ("duration",):
        if req not in raw:
            _fail(req, "missing required key")

    sc = Scenario(name=str(raw.get("name", name_default)),
                  duration=float(raw["duration"]))
    if sc.duration < 0:
        _fail("duration", "must be >= 0")
    mode = str(raw.get("mode", "etdmpc"))
    if mode not in MODE_ALIASES:
        _fail("mode", f"must be one of {sorted(set(MODE_ALIASES))}")
    sc.mode = MODE_ALIASES[mode]
    sc.seed = int(raw.get("seed", 0))
    sc.v_ref = float(raw.get("v_ref", V_REF))
    sc.noise_sigma = float(raw.get("noise_sigma", 0.0))
    sc.gain_error = float(raw.get("gain_error", 0.0))

    th = raw.get("thresholds", {})
    sc.e_opt = float(th.get("e_opt", 0.1))
    sc.e_com = float(th.get("e_com", 0.1))
    sc.thresholds_in_pu = bool(th.get("in_pu", False))
    if sc.e_opt < 0 or sc.e_com < 0:
        _fail("thresholds", "e_opt and e_com must be >= 0")

    tm = raw.get("timing", {})
    sc.dt = float(tm.get("dt", 1e-6))
    sc.t_s = float(tm.get("t_s", 0.01))
    sc.t_s_mpc = float(tm.get("t_s_mpc", 0.05))
    sc.horizon = int(tm.get("horizon", 10))
    sc.obs_every = int(tm.get("obs_every", 10))
    sc.fl_refresh_every = int(tm.get("fl_refresh_every", 1))
    sc.fl_filter_tau = float(tm.get("fl_filter_tau", 0.0))
    sc.fl_slew = float(tm.get("fl_slew", 800.0))
    sc.switch_ramp_s = float(tm.get("switch_ramp_s", 3e-3))
    if not 0 < sc.dt <= 1e-4:
        _fail("timing.dt", "must be in (0, 1e-4]")
    if sc.horizon < 1:
        _fail("timing.horizon", "must be >= 1")
    for name, num, den in (("timing.t_s", sc.t_s, sc.dt),
                           ("timing.t_s_mpc", sc.t_s_mpc, sc.t_s)):
        ratio = num / den
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            _fail(name, "must be an integer multiple of the finer period")
    if round(sc.t_s / sc.dt) % sc.obs_every != 0:
        _fail("timing.obs_every", "must divide t_s/dt")

    ob = raw.get("observer", {})
    sc.obs_omegas = tuple(float(w) for w in ob.get("omegas", (1.0, 2.0, 3.0)))
    sc.obs_varpi = float(ob.get("varpi", 2.5))
    sc.obs_t_eps = float(ob.get("t_eps", 0.02))
    sc.obs_dt_active = float(ob.get("dt_active", 0.02))
    sc.obs_z0_gate = float(ob.get("z0_gate", 5.0))
    sc.obs_z1_gate = float(ob.get("z1_gate", 2000.0))
    if len(set(sc.obs_omegas)) != 3 or any(w <= 0 for w in sc.obs_omegas):
        _fail("observer.omegas", "need three distinct positive rates")
    if sc.obs_t_eps + sc.obs_dt_active > sc.t_s_mpc + 1e-12:
        _fail("observer", "t_eps + dt_active must fit inside t_s_mpc")

    qp = raw.get("qp", {})
    sc.qp_rho = float(qp.get("rho", 1e-6))
    sc.vn_clamp_pu = float(qp.get("vn_clamp_pu", 0.2))
    sc.qp_slack_penalty = float(qp.get("slack_penalty", 1e6))
    sc.v_band = float(qp.get("v_band", 0.03))
    if sc.qp_rho <= 0:
        _fail("qp.rho", "must be > 0")

    pi = raw.get("pi", {})
    sc.pi_kp = float(pi.get("k_p", 0.5))
    sc.pi_ki = float(pi.get("k_i", 20.0))

    system = raw.get("system", "4dg")
    if isinstance(system, str):
        if system not in STOCK_SYSTEMS:
            _fail("system", f"unknown stock system {system!r}")
        system = STOCK_SYSTEMS[system]()
    _load_system(sc, system)
    _load_events(sc, raw.get("events", []))
    _load_link_schedule(sc, raw.get("link_schedule", []))
    _validate(sc)
    return sc


def _load_system(sc: Scenario, sysd: dict):
    for req in ("dgs", "n_bus", "lines", "loads", "comm"):
        if req not in sysd:
            _fail(f"system.{req}", "missing required key")
    sc.n_bus = int(sysd["n_bus"])
    sc.r_n = float(sysd.get("r_n", 200.0))
    if sc.r_n <= 0:
        _fail("system.r_n", "must be > 0")
    for d in sysd["dgs"]:
        sc.dg_names.append(str(d["name"]).lower())
        sc.dg_bus.append(int(d["bus"]))
        sc.dg_params.append(_resolve_params(d.get("params", "dg1"),
                                            f"system.dgs[{d['name']}].params"))
    if len(set(sc.dg_names)) != len(sc.dg_names):
        _fail("system.dgs", "duplicate DG names")
    if any(not 0 <= b < sc.n_bus for b in sc.dg_bus):
        _fail("system.dgs", "bus index out of range")
    ref = sysd.get("ref_dg", sc.dg_names[0])
    sc.ref_dg = sc.dg_index(str(ref))
    for ln in sysd["lines"]:
        fr, to = int(ln["from"]), int(ln["to"])
        if not (0 <= fr < sc.n_bus and 0 <= to < sc.n_bus):
            _fail(f"system.lines[{ln.get('name')}]", "bus index out of range")
        closed = bool(ln.get("closed", True))
        sc.lines.append((str(ln["name"]).lower(), fr, to,
                         float(ln["r"]), float(ln["l"]), closed))
    for ld in sysd["loads"]:
        sc.loads.append((str(ld["name"]).lower(), int(ld["bus"]),
                         float(ld["r"]), float(ld["l"]),
                         bool(ld.get("connected", True))))
    comm = sysd["comm"]
    # edges are directed: [sender, receiver]; list both ways for a
    # bidirectional link
    for a, b in comm["edges"]:
        i, j = sc.dg_index(str(a)), sc.dg_index(str(b))
        sc.comm_edges.append((j, i))
    sc.pins = [0.0] * sc.n_dg
    for p in comm["pins"]:
        sc.pins[sc.dg_index(str(p))] = 1.0


def _load_events(sc: Scenario, events: list):
    for idx, ev in enumerate(events):
        kind = str(ev.get("kind", ""))
        if kind not in EVENT_KINDS:
            _fail(f"events[{idx}].kind", f"unknown event kind {kind!r}")
        t = float(ev["t"])
        if t < 0:
            _fail(f"events[{idx}].t", "must be >= 0")
        sc.events.append(Event(t, kind, str(ev.get("target", "")).lower()))
    sc.events.sort(key=lambda e: e.t)


def _load_link_schedule(sc: Scenario, entries: list):
    # explicit schedule entries plus link_down/link_up events compile into
    # half-open down intervals per directed edge
    def both(a, b, t0, t1):
        sc.link_schedule.add_down(a, b, t0, t1)
        sc.link_schedule.add_down(b, a, t0, t1)

    for idx, ent in enumerate(entries):
        a, b = (sc.dg_index(str(x)) for x in ent["edge"])
        for t0, t1 in ent["down"]:
            both(a, b, float(t0), float(t1))

    open_down: dict = {}
    for ev in sc.events:
        if ev.kind not in ("link_down", "link_up"):
            continue
        names = ev.target.replace("-", ",").split(",")
        if len(names) != 2:
            _fail("events.link target", "expected 'dgA,dgB'")
        key = tuple(sorted(sc.dg_index(n.strip()) for n in names))
        if ev.kind == "link_down":
            if key in open_down:
                _fail("events.link_down", f"edge {ev.target} already down")
            open_down[key] = ev.t
        else:
            if key not in open_down:
                _fail("events.link_up", f"edge {ev.target} is not down")
            both(key[0], key[1], open_down.pop(key), ev.t)
    for key, t0 in open_down.items():
        both(key[0], key[1], t0, math.inf)


def _validate(sc: Scenario):
    n_on = sum(1 for e in sc.events if e.kind == "secondary_on")
    if n_on != 1:
        _fail("events", f"secondary_on must appear exactly once (found {n_on})")
    if sc.events and sc.events[-1].t > sc.duration:
        _fail("events", "duration does not cover all events")

    load_names = {l[0] for l in sc.loads}
    line_names = {l[0] for l in sc.lines}
    for ev in sc.events:
        if ev.kind in ("load_connect", "load_disconnect"):
            if ev.target not in load_names:
                _fail("events.target", f"unknown load {ev.target!r}")
        elif ev.kind in ("dg_unplug", "dg_plug"):
            if ev.target not in sc.dg_names:
                _fail("events.target", f"unknown DG {ev.target!r}")
            if sc.dg_index(ev.target) == sc.ref_dg and ev.kind == "dg_unplug":
                _fail("events", "the common-reference DG cannot be unplugged")
        elif ev.kind in ("breaker_open", "breaker_close"):
            if ev.target not in line_names:
                _fail("events.target", f"unknown line/breaker {ev.target!r}")

    sc.comm_graph()  # raises on a missing leader-rooted spanning tree

    model = sc.plant_model()
    rate = model.max_branch_rate() * sc.dt
    if rate > MAX_DT_RATE:
        _fail("timing.dt",
              f"dt*max_branch_rate = {rate:.2f} exceeds {MAX_DT_RATE}; "
              "reduce dt or the virtual resistance r_n")
