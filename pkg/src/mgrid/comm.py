"""Leader-pinned directed communication graph, trigger-gated message
delivery, and the scripted link-failure schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LEADER = -1  # pseudo-sender id of the virtual leader


@dataclass
class CommGraph:
    """Adjacency a[i, j] > 0 means i receives from j; pins[i] > 0 couples
    DG i to the virtual leader.  The union graph must contain a spanning
    tree rooted at the leader."""

    adjacency: np.ndarray
    pins: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.adjacency, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("adjacency must be square")
        if np.any(np.diag(a) != 0.0):
            raise ValueError("adjacency diagonal must be zero")
        if np.any(a < 0.0) or np.any(np.asarray(self.pins) < 0.0):
            raise ValueError("edge weights and pinning gains must be >= 0")
        self.adjacency = a
        self.pins = np.asarray(self.pins, dtype=float)
        if len(self.pins) != a.shape[0]:
            raise ValueError("pins length must match adjacency size")
        if not self.has_leader_spanning_tree():
            raise ValueError(
                "communication graph has no spanning tree rooted at the leader")

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    def laplacian(self) -> np.ndarray:
        a = self.adjacency
        d = np.diag(a.sum(axis=1))
        return d - a + np.diag(self.pins)

    def has_leader_spanning_tree(self) -> bool:
        """Every node reachable following information flow from the leader."""
        reached = self.pins > 0.0
        frontier = list(np.flatnonzero(reached))
        while frontier:
            j = frontier.pop()
            for i in np.flatnonzero(self.adjacency[:, j] > 0.0):
                if not reached[i]:
                    reached[i] = True
                    frontier.append(int(i))
        return bool(np.all(reached))

    def neighbors(self, i: int) -> list:
        """Senders DG i listens to, ascending id, leader last."""
        if not 0 <= i < self.n:
            raise ValueError(f"unknown DG id {i}")
        out = [int(j) for j in np.flatnonzero(self.adjacency[i] > 0.0)]
        if self.pins[i] > 0.0:
            out.append(LEADER)
        return out


def neighbors(graph: CommGraph, i: int) -> list:
    return graph.neighbors(i)


@dataclass
class LinkSchedule:
    """Half-open down intervals [t0, t1) per directed edge (sender, receiver)."""

    down: dict = field(default_factory=dict)

    def add_down(self, sender: int, receiver: int, t0: float, t1: float):
        iv = self.down.setdefault((sender, receiver), [])
        iv.append((t0, t1))
        iv.sort()
        for (a0, a1), (b0, b1) in zip(iv, iv[1:]):
            if b0 < a1:
                raise ValueError(
                    f"overlapping down intervals on edge {sender}->{receiver}")

    def is_down(self, sender: int, receiver: int, t: float) -> bool:
        for t0, t1 in self.down.get((sender, receiver), ()):
            if t0 <= t < t1:
                return True
        return False


@dataclass
class PredictionMessage:
    sender: int
    issued_at: int
    payload: np.ndarray


def deliver(messages, graph: CommGraph, sched: LinkSchedule, t: float):
    """Resolve one exchange phase: each message fans out to every listener
    of its sender; a copy on edge (j -> i) is dropped iff the edge is down
    at time t.  Returns (delivered {receiver: [message, ...]}, log rows
    (sender, receiver, delivered))."""
    inboxes: dict = {}
    log = []
    for msg in messages:
        for i in range(graph.n):
            if graph.adjacency[i, msg.sender] > 0.0:
                ok = not sched.is_down(msg.sender, i, t)
                log.append((msg.sender, i, ok))
                if ok:
                    inboxes.setdefault(i, []).append(msg)
    return inboxes, log


def leader_sequence(v_ref: float, horizon: int) -> np.ndarray:
    """The virtual leader's constant prediction; never fails, never stale."""
    return np.full(horizon, float(v_ref))
