"""Exact Gillespie simulation of the node and edge dynamics.

Four event categories compete: node birth (rate lam*N), node death (mu*N),
edge creation (alpha * sum of alive social indices) and edge deletion
(beta * M, one clock per edge copy).  Creators are drawn proportionally to
their social index through a Fenwick tree; in the P version the partner is
drawn from the same tree, in the U version uniformly among the alive nodes.
A node may pick itself, which produces a self-loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DynNetError, ModelParams, RngStream, SocialIndexDistribution, Version
from .fenwick import FenwickTree
from .snapshot import Snapshot

BIRTH, DEATH, CREATE, DELETE = "birth", "death", "create", "delete"


class Extinct(DynNetError):
    pass


class TooManyRestarts(DynNetError):
    pass


@dataclass(frozen=True)
class EventRecord:
    kind: str
    time: float
    nodes: tuple = ()


@dataclass(frozen=True)
class StopRule:
    """Stop when the population reaches ``n_target`` or the clock ``t_target``."""

    n_target: int | None = None
    t_target: float | None = None

    def __post_init__(self):
        if (self.n_target is None) == (self.t_target is None):
            raise ValueError("give exactly one of n_target, t_target")


class SimState:
    """Alive population, edge multiset and the aggregate event rates.

    Nodes live in reusable slots; ids are never reused.  ``edge_a`` and
    ``edge_b`` hold the slots of each edge copy, and ``incident[slot]`` the
    set of edge positions touching that slot.
    """

    def __init__(self, clock: float = 0.0):
        self.clock = clock
        self.ids: list[int] = []
        self.birth: list[float] = []
        self.sidx: list[float] = []
        self.alive_pos: list[int] = []
        self.incident: list[set] = []
        self.free: list[int] = []
        self.alive: list[int] = []
        self.edge_a: list[int] = []
        self.edge_b: list[int] = []
        self.tree = FenwickTree(64)
        self.sum_s = 0.0
        self.next_id = 0
        self.n_events = 0

    @classmethod
    def initial(cls, dist: SocialIndexDistribution, rng: RngStream, n0: int = 1):
        state = cls()
        for _ in range(n0):
            state.add_node(rng.draw(dist))
        return state

    # -- aggregates ----------------------------------------------------------

    @property
    def n_alive(self) -> int:
        return len(self.alive)

    @property
    def n_edges(self) -> int:
        return len(self.edge_a)

    def total_rate(self, params: ModelParams) -> float:
        n = len(self.alive)
        return ((params.lam + params.mu) * n + params.alpha * self.sum_s
                + params.beta * len(self.edge_a))

    # -- mutations -----------------------------------------------------------

    def add_node(self, s: float) -> int:
        if self.free:
            slot = self.free.pop()
            self.ids[slot] = self.next_id
            self.birth[slot] = self.clock
            self.sidx[slot] = s
            self.incident[slot] = set()
        else:
            slot = len(self.ids)
            self.ids.append(self.next_id)
            self.birth.append(self.clock)
            self.sidx.append(s)
            self.alive_pos.append(-1)
            self.incident.append(set())
        self.next_id += 1
        self.alive_pos[slot] = len(self.alive)
        self.alive.append(slot)
        self.tree.set(slot, s)
        self.sum_s += s
        return slot

    def remove_node(self, slot: int) -> int:
        """Kill ``slot`` and all its edges; returns the number of edge copies removed."""
        inc = self.incident[slot]
        removed = 0
        while inc:
            self.remove_edge(next(iter(inc)))
            removed += 1
        pos = self.alive_pos[slot]
        last = self.alive.pop()
        if last != slot:
            self.alive[pos] = last
            self.alive_pos[last] = pos
        self.alive_pos[slot] = -1
        self.tree.set(slot, 0.0)
        self.sum_s -= self.sidx[slot]
        self.free.append(slot)
        if not self.alive:
            self.sum_s = 0.0
        return removed

    def add_edge(self, a: int, b: int) -> None:
        k = len(self.edge_a)
        self.edge_a.append(a)
        self.edge_b.append(b)
        self.incident[a].add(k)
        self.incident[b].add(k)

    def remove_edge(self, k: int) -> None:
        ea, eb, inc = self.edge_a, self.edge_b, self.incident
        a, b = ea[k], eb[k]
        inc[a].discard(k)
        inc[b].discard(k)
        last = len(ea) - 1
        if k != last:
            la, lb = ea[last], eb[last]
            inc[la].discard(last)
            inc[lb].discard(last)
            ea[k], eb[k] = la, lb
            inc[la].add(k)
            inc[lb].add(k)
        ea.pop()
        eb.pop()

    # -- sampling ------------------------------------------------------------

    def _weighted_slot(self, rng: RngStream) -> int:
        tree = self.tree
        weights = tree.weights
        while True:
            slot = tree.find(rng.uniform() * self.sum_s)
            # rounding can land past the end or on an emptied slot; redraw
            if slot < tree.capacity and weights[slot] > 0.0:
                return slot

    def _uniform_alive(self, rng: RngStream) -> int:
        n = len(self.alive)
        return self.alive[min(int(rng.uniform() * n), n - 1)]

    # -- dynamics ------------------------------------------------------------

    def step(self, params: ModelParams, dist: SocialIndexDistribution, rng: RngStream,
             horizon: float | None = None) -> EventRecord | None:
        """Advance to and execute the next event.

        With ``horizon`` set, returns None and parks the clock at the horizon
        if the next event would fall beyond it.
        """
        n = len(self.alive)
        if n == 0:
            raise Extinct("population is extinct")
        r_birth = params.lam * n
        r_death = params.mu * n
        r_create = params.alpha * self.sum_s
        r_delete = params.beta * len(self.edge_a)
        total = r_birth + r_death + r_create + r_delete
        dt = -math.log(1.0 - rng.uniform()) / total
        if horizon is not None and self.clock + dt > horizon:
            self.clock = horizon
            return None
        self.clock += dt
        self.n_events += 1
        x = rng.uniform() * total
        if x < r_birth:
            slot = self.add_node(rng.draw(dist))
            return EventRecord(BIRTH, self.clock, (slot,))
        x -= r_birth
        if x < r_death:
            slot = self._uniform_alive(rng)
            self.remove_node(slot)
            return EventRecord(DEATH, self.clock, (slot,))
        x -= r_death
        if x < r_create or not self.edge_a:
            if r_create <= 0.0:
                # x overshot the total by rounding with no edge events possible
                slot = self.add_node(rng.draw(dist))
                return EventRecord(BIRTH, self.clock, (slot,))
            a = self._weighted_slot(rng)
            if params.version is Version.P:
                b = self._weighted_slot(rng)
            else:
                b = self._uniform_alive(rng)
            self.add_edge(a, b)
            return EventRecord(CREATE, self.clock, (a, b))
        k = min(int(rng.uniform() * len(self.edge_a)), len(self.edge_a) - 1)
        a, b = self.edge_a[k], self.edge_b[k]
        self.remove_edge(k)
        return EventRecord(DELETE, self.clock, (a, b))

    def snapshot(self, meta: dict | None = None) -> Snapshot:
        alive = self.alive
        ids = self.ids
        ends_a = [ids[s] for s in self.edge_a]
        ends_b = [ids[s] for s in self.edge_b]
        return Snapshot.from_edges(
            self.clock,
            [ids[s] for s in alive],
            [self.clock - self.birth[s] for s in alive],
            [self.sidx[s] for s in alive],
            ends_a, ends_b, meta=meta,
        )


def step(state: SimState, params: ModelParams, dist: SocialIndexDistribution,
         rng: RngStream) -> EventRecord:
    return state.step(params, dist, rng)


def audit(state: SimState, params: ModelParams | None = None, rtol: float = 1e-9) -> list[str]:
    """Recompute aggregates and the weight index from the raw collections.

    Returns a list of human-readable mismatches; empty means consistent.
    """
    report = []
    alive = state.alive
    alive_set = set(alive)
    if len(alive_set) != len(alive):
        report.append("duplicate slots in alive list")
    for pos, slot in enumerate(alive):
        if state.alive_pos[slot] != pos:
            report.append(f"alive_pos[{slot}]={state.alive_pos[slot]} != {pos}")
            break
    n_marked = sum(1 for p in state.alive_pos if p >= 0)
    if n_marked != len(alive):
        report.append(f"N mismatch: {n_marked} slots marked alive, list has {len(alive)}")

    true_sum = math.fsum(state.sidx[s] for s in alive)
    if not math.isclose(state.sum_s, true_sum, rel_tol=rtol, abs_tol=1e-12):
        report.append(f"sum S mismatch: maintained {state.sum_s!r}, recomputed {true_sum!r}")

    w = state.tree.weights
    for slot in range(len(w)):
        expected = state.sidx[slot] if slot in alive_set else 0.0
        if w[slot] != expected:
            report.append(f"weight index slot {slot}: {w[slot]!r} != {expected!r}")
            break
    ref = FenwickTree(state.tree.capacity)
    ref.weights = list(w)
    ref.rebuild()
    for j in range(1, state.tree.capacity + 1):
        if not math.isclose(ref._tree[j], state.tree._tree[j], rel_tol=rtol, abs_tol=1e-9):
            report.append(f"weight index node {j}: {state.tree._tree[j]!r} != {ref._tree[j]!r}")
            break

    m = len(state.edge_a)
    if len(state.edge_b) != m:
        report.append("edge endpoint arrays differ in length")
    inc_true: dict[int, set] = {}
    for k in range(m):
        for s in (state.edge_a[k], state.edge_b[k]):
            if s not in alive_set:
                report.append(f"edge {k} touches dead slot {s}")
            inc_true.setdefault(s, set()).add(k)
    for slot in range(len(state.incident)):
        if state.incident[slot] != inc_true.get(slot, set()) and (
                slot in alive_set or state.incident[slot]):
            report.append(f"incidence of slot {slot} inconsistent")
            break

    if params is not None:
        n = len(alive)
        fresh = ((params.lam + params.mu) * n + params.alpha * true_sum + params.beta * m)
        if not math.isclose(state.total_rate(params), fresh, rel_tol=rtol, abs_tol=1e-12):
            report.append(f"total rate {state.total_rate(params)!r} != recomputed {fresh!r}")
    return report


def run(params: ModelParams, dist: SocialIndexDistribution, stop: StopRule,
        rng: RngStream, max_restarts: int = 1000, return_state: bool = False):
    """Simulate from one node until ``stop`` fires, conditioned on survival.

    An extinct attempt is discarded and the next attempt uses the next
    substream of ``rng``.  The snapshot's ``meta`` records the discard count.
    """
    for attempt in range(max_restarts + 1):
        sub = rng.substream(attempt)
        state = SimState.initial(dist, sub)
        survived = _advance(state, params, dist, sub, stop)
        if survived:
            meta = {"discards": attempt, "seed": rng.seed, "stream": rng.stream,
                    "n_events": state.n_events, "clock": state.clock}
            snap = state.snapshot(meta)
            return (snap, state) if return_state else snap
    raise TooManyRestarts(
        f"population went extinct in {max_restarts + 1} consecutive attempts")


def _advance(state: SimState, params, dist, rng, stop: StopRule) -> bool:
    step_ = state.step
    if stop.n_target is not None:
        target = stop.n_target
        alive = state.alive
        while len(alive) < target:
            if not alive:
                return False
            step_(params, dist, rng)
        return True
    horizon = stop.t_target
    while state.clock < horizon:
        if not state.alive:
            return False
        if step_(params, dist, rng, horizon) is None:
            break
    return bool(state.alive)
