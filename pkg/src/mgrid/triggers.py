"""Event-trigger rules for optimization and communication, holdover
reconstruction of stale prediction sequences, and trigger accounting."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class TriggerThresholds:
    e_opt: float = 0.1
    e_com: float = 0.1

    def __post_init__(self):
        if self.e_opt < 0.0 or self.e_com < 0.0:
            raise ValueError("trigger thresholds must be >= 0")


def opt_trigger(y_meas: float, y_pred: float, k: int, k_m: int, horizon: int,
                e_opt: float) -> bool:
    """Fire when the stored prediction has drifted from the measurement by
    at least e_opt, or when the horizon since the last solve is used up.
    Both comparisons are inclusive."""
    return abs(y_meas - y_pred) >= e_opt or k >= k_m + horizon


def comm_trigger(y_now, y_holdover, e_com: float) -> bool:
    """Fire when the current prediction sequence deviates from the
    holdover reconstruction of the last transmitted one in max norm."""
    y_now = np.asarray(y_now, dtype=float)
    y_holdover = np.asarray(y_holdover, dtype=float)
    return bool(np.max(np.abs(y_now - y_holdover)) >= e_com)


def holdover_prediction(y_last, steps_elapsed: int) -> np.ndarray:
    """Realign a prediction sequence issued ``steps_elapsed`` steps ago:
    shift left and repeat the terminal value."""
    if steps_elapsed < 0:
        raise ValueError("steps_elapsed must be >= 0")
    y_last = np.asarray(y_last, dtype=float)
    h = len(y_last)
    e = min(steps_elapsed, h)
    out = np.empty(h)
    out[:h - e] = y_last[e:]
    out[h - e:] = y_last[-1]
    return out


@dataclass
class TriggerLog:
    """Per-step, per-DG record of which events fired and why."""

    n_dgs: int
    steps: list = field(default_factory=list)
    dgs: list = field(default_factory=list)
    opt_fired: list = field(default_factory=list)
    com_fired: list = field(default_factory=list)
    reasons: list = field(default_factory=list)

    def append(self, step: int, dg: int, opt: bool, com: bool, reason: str):
        self.steps.append(step)
        self.dgs.append(dg)
        self.opt_fired.append(bool(opt))
        self.com_fired.append(bool(com))
        self.reasons.append(reason)

    def counts(self):
        """(opt_fires, com_fires, eval_steps) per DG."""
        opt = np.zeros(self.n_dgs, dtype=int)
        com = np.zeros(self.n_dgs, dtype=int)
        tot = np.zeros(self.n_dgs, dtype=int)
        for dg, o, c in zip(self.dgs, self.opt_fired, self.com_fired):
            tot[dg] += 1
            opt[dg] += o
            com[dg] += c
        return opt, com, tot


def reduction_metrics(log: TriggerLog, n_steps: int, n_dgs: int):
    """Percent reductions 100*(1 - fires/n_steps), per DG and averaged."""
    if n_steps <= 0:
        raise ValueError("n_steps must be > 0")
    opt, com, _ = log.counts()
    comp = 100.0 * (1.0 - opt[:n_dgs] / n_steps)
    comm = 100.0 * (1.0 - com[:n_dgs] / n_steps)
    return {
        "computation_reduction": comp.tolist(),
        "communication_reduction": comm.tolist(),
        "computation_reduction_avg": float(np.mean(comp)),
        "communication_reduction_avg": float(np.mean(comm)),
    }
