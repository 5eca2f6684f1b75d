"""Event-driven asynchronous simulator for Algorithm WA (wait-and-average).

Values are exact :class:`fractions.Fraction` throughout.  Time is an integer
clock; the event queue is keyed by ``(delivery_time, sequence number)`` so equal
times resolve in send order, which also makes every link FIFO.
"""

from __future__ import annotations

import csv
import heapq
import io
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .conditions import AsyncViolationWitness, reach_mask
from .errors import InvalidArgument
from .graph import DiGraph, from_mask, to_mask
from .sync_engine import Verdict


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


def fmt(x: Fraction) -> str:
    return str(x)


# ---------------------------------------------------------------------------
# configuration types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WaMessage:
    value: Fraction
    origin: int
    phase: int


@dataclass
class PhaseState:
    R_vals: set = field(default_factory=set)
    heard: set = field(default_factory=set)


DELAY_MODES = ("uniform-random", "gatekeeper-adversary", "fifo-fixed")


@dataclass(frozen=True)
class DelayPolicy:
    """How long each message spends on its link.

    ``fifo-fixed`` uses ``low`` for every message; ``uniform-random`` draws an
    integer in ``[low, high]``; ``gatekeeper-adversary`` does the same except that
    messages on ``delayed_edges`` or sent by ``slow_senders`` take ``slow``.
    """

    mode: str = "uniform-random"
    seed: int = 0
    low: int = 1
    high: int = 10
    slow: int = 10**9
    slow_senders: frozenset = frozenset()
    delayed_edges: frozenset = frozenset()

    def __post_init__(self):
        if self.mode not in DELAY_MODES:
            raise InvalidArgument(f"unknown delay mode {self.mode!r}")
        if not 1 <= self.low <= self.high:
            raise InvalidArgument("delay bounds need 1 <= low <= high")
        object.__setattr__(self, "slow_senders", frozenset(self.slow_senders))
        object.__setattr__(self, "delayed_edges", frozenset(tuple(e) for e in self.delayed_edges))

    def sampler(self):
        rng = np.random.default_rng(self.seed)
        if self.mode == "fifo-fixed":
            return lambda u, v: self.low
        if self.mode == "uniform-random":
            return lambda u, v: int(rng.integers(self.low, self.high + 1))

        def gate(u, v):
            base = int(rng.integers(self.low, self.high + 1))
            if u in self.slow_senders or (u, v) in self.delayed_edges:
                return self.slow + base
            return base

        return gate

    def to_json(self):
        return {
            "mode": self.mode,
            "seed": self.seed,
            "bounds": [self.low, self.high],
            "slow": self.slow,
            "slow_senders": sorted(self.slow_senders),
            "delayed_edges": sorted(list(e) for e in self.delayed_edges),
        }

    @classmethod
    def from_json(cls, data) -> "DelayPolicy":
        lo, hi = data.get("bounds", [1, 10])
        return cls(
            mode=data.get("mode", "uniform-random"),
            seed=int(data.get("seed", 0)),
            low=int(lo),
            high=int(hi),
            slow=int(data.get("slow", 10**9)),
            slow_senders=frozenset(data.get("slow_senders", ())),
            delayed_edges=frozenset(tuple(e) for e in data.get("delayed_edges", ())),
        )


@dataclass(frozen=True)
class AsyncCrash:
    """``node`` halts when the global event counter reaches ``event_index``.

    If that event is the node's own, the first broadcast it makes while handling
    it reaches only ``partial_send`` and any further sends are lost.
    """

    node: int
    event_index: int
    partial_send: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "partial_send", frozenset(self.partial_send))

    def to_json(self):
        return {"node": self.node, "event_index": self.event_index, "partial_send": sorted(self.partial_send)}

    @classmethod
    def from_json(cls, data) -> "AsyncCrash":
        return cls(int(data["node"]), int(data["event_index"]), frozenset(data.get("partial_send", ())))


@dataclass(frozen=True)
class WaConfig:
    epsilon: Fraction
    p_end: int | None = None
    M: Fraction | None = None
    m: Fraction | None = None

    def __post_init__(self):
        object.__setattr__(self, "epsilon", as_fraction(self.epsilon))
        if self.epsilon <= 0:
            raise InvalidArgument("epsilon must be positive")
        if self.p_end is not None and self.p_end < 1:
            raise InvalidArgument("p_end must be >= 1")
        for name in ("M", "m"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, as_fraction(val))


def p_end_bound(n: int, f: int, M, m, epsilon) -> int:
    """Smallest ``P >= 1`` with ``(1 - 1/n)^P (M - m) <= epsilon`` (1 when ``M == m``)."""
    M, m, epsilon = as_fraction(M), as_fraction(m), as_fraction(epsilon)
    if epsilon <= 0:
        raise InvalidArgument("epsilon must be positive")
    if M < m:
        raise InvalidArgument("need M >= m")
    if M == m:
        return 1
    shrink = Fraction(n - 1, n)
    span = M - m
    P = 1
    span *= shrink
    while span > epsilon:
        span *= shrink
        P += 1
    return P


# ---------------------------------------------------------------------------
# Condition WAIT
# ---------------------------------------------------------------------------


class WaitOracle:
    """Condition WAIT for one graph, caching reach masks per (node, candidate F)."""

    def __init__(self, G: DiGraph, f: int):
        self.G = G
        self.f = f
        self._cands: dict[int, list[tuple[tuple[int, ...], int]]] = {}

    def candidates(self, i: int):
        if i not in self._cands:
            others = [x for x in range(self.G.n) if x != i]
            rows = []
            for size in range(min(self.f, len(others)) + 1):
                for F in itertools.combinations(others, size):
                    rows.append((F, reach_mask(self.G, to_mask(F), i)))
            self._cands[i] = rows
        return self._cands[i]

    def check(self, i: int, heard_mask: int):
        for F, reach in self.candidates(i):
            if reach & ~heard_mask == 0:
                return frozenset(F)
        return None


def condition_wait(G: DiGraph, f: int, i: int, heard) -> tuple[bool, frozenset | None]:
    """Whether some ``F_i ⊆ V - {i}``, ``|F_i| <= f``, has ``reach_i(F_i) ⊆ heard``.

    Returns ``(holds, F_i)`` with the first such ``F_i`` in (size, lexicographic) order.
    """
    heard = frozenset(heard)
    if i not in heard:
        raise InvalidArgument(f"node {i} must be in its own heard set")
    F = WaitOracle(G, f).check(i, to_mask(heard))
    return F is not None, F


# ---------------------------------------------------------------------------
# trace
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AverageRecord:
    node: int
    phase: int
    time: int
    heard: frozenset
    values: tuple
    value: Fraction
    witness: frozenset


@dataclass
class AsyncTrace:
    graph: DiGraph
    f: int
    inputs: tuple
    p_end: int
    epsilon: Fraction
    outputs: list
    crashed: frozenset
    starved: frozenset
    averages: list
    events: list
    n_events: int

    @property
    def fault_free(self) -> frozenset:
        return frozenset(range(self.graph.n)) - self.crashed

    @property
    def terminated(self) -> bool:
        return not self.starved

    def phase_values(self) -> dict[int, dict[int, Fraction]]:
        """``{phase: {node: v[phase]}}`` with phase 0 holding the inputs."""
        table = {0: dict(enumerate(self.inputs))}
        for rec in self.averages:
            table.setdefault(rec.phase, {})[rec.node] = rec.value
        return table

    def phase_ranges(self) -> list[Fraction]:
        table = self.phase_values()
        out = []
        for p in range(self.p_end + 1):
            vals = table.get(p, {}).values()
            out.append(max(vals) - min(vals) if vals else Fraction(0))
        return out

    def rows(self):
        for ev in self.events:
            time, kind, src, dst, msg = ev
            if msg is None:
                yield time, kind, src, dst, "", "", ""
            else:
                yield time, kind, src, dst, fmt(msg.value), msg.origin, msg.phase

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "kind", "src", "dst", "value", "origin", "phase"])
        w.writerows(self.rows())
        return buf.getvalue()


# ---------------------------------------------------------------------------
# simulator
# ---------------------------------------------------------------------------


class _Node:
    __slots__ = ("i", "v", "phase", "done", "states", "seen", "output", "crashed", "send_budget")

    def __init__(self, i, value):
        self.i = i
        self.v = value
        self.phase = 0
        self.done = False
        self.states: dict[int, PhaseState] = {}
        self.seen: set = set()
        self.output = None
        self.crashed = False
        self.send_budget = None  # None: unrestricted; else targets of the one remaining broadcast


class _WaSim:
    def __init__(self, G, f, inputs, policy, crashes, p_end, epsilon, record_events, max_events):
        self.G = G
        self.f = f
        self.p_end = p_end
        self.wait = WaitOracle(G, f)
        self.delay = policy.sampler()
        self.nodes = [_Node(i, v) for i, v in enumerate(inputs)]
        self.heap: list = []
        self.seq = 0
        self.now = 0
        self.last_on_edge: dict = {}
        self.crash_at: dict[int, list[AsyncCrash]] = {}
        for c in crashes:
            self.crash_at.setdefault(c.event_index, []).append(c)
        self.averages: list[AverageRecord] = []
        self.events: list = []
        self.record = record_events
        self.max_events = max_events
        self.crashed: set = set()

    # -- plumbing --

    def log(self, kind, src, dst, msg):
        if self.record:
            self.events.append((self.now, kind, src, dst, msg))

    def push(self, time, kind, data):
        heapq.heappush(self.heap, (time, self.seq, kind, data))
        self.seq += 1

    def broadcast(self, node: _Node, msg: WaMessage):
        targets = from_mask(self.G.out_masks[node.i])
        if node.send_budget is not None:
            targets = targets & node.send_budget
            node.send_budget = frozenset()
        for v in sorted(targets):
            edge = (node.i, v)
            t = max(self.now + self.delay(*edge), self.last_on_edge.get(edge, 0))
            self.last_on_edge[edge] = t
            self.log("send", node.i, v, msg)
            self.push(t, "deliver", (node.i, v, msg))

    # -- algorithm --

    def enter_phase(self, node: _Node, p: int):
        node.phase = p
        st = node.states.setdefault(p, PhaseState())
        st.R_vals.add(node.v)
        st.heard.add(node.i)
        node.seen.add((node.i, p))
        self.broadcast(node, WaMessage(node.v, node.i, p))

    def try_advance(self, node: _Node):
        while not node.done:
            st = node.states[node.phase]
            F = self.wait.check(node.i, to_mask(st.heard))
            if F is None:
                return
            vals = tuple(sorted(st.R_vals))
            value = sum(vals, Fraction(0)) / len(vals)
            self.averages.append(AverageRecord(node.i, node.phase, self.now, frozenset(st.heard), vals, value, F))
            node.v = value
            if node.phase == self.p_end:
                node.done = True
                node.output = value
                self.log("output", node.i, None, WaMessage(value, node.i, node.phase))
                return
            self.enter_phase(node, node.phase + 1)

    def receive(self, node: _Node, msg: WaMessage):
        key = (msg.origin, msg.phase)
        if key in node.seen:
            return
        node.seen.add(key)
        st = node.states.setdefault(msg.phase, PhaseState())
        st.R_vals.add(msg.value)
        st.heard.add(msg.origin)
        self.broadcast(node, msg)
        if msg.phase == node.phase and not node.done:
            self.try_advance(node)

    # -- loop --

    def crash(self, node: _Node):
        node.crashed = True
        self.crashed.add(node.i)
        self.log("crash", node.i, None, None)

    def run(self):
        for node in self.nodes:
            self.push(0, "start", node.i)
        index = 0
        while self.heap:
            if index >= self.max_events:
                raise RuntimeError(f"event budget of {self.max_events} exhausted")
            time, _, kind, data = heapq.heappop(self.heap)
            self.now = time
            target = data if kind == "start" else data[1]
            dying = None
            for c in self.crash_at.pop(index, ()):
                node = self.nodes[c.node]
                if node.crashed:
                    continue
                if c.node == target:
                    dying = c
                else:
                    self.crash(node)
            index += 1
            node = self.nodes[target]
            if node.crashed:
                if kind == "deliver":
                    self.log("drop", data[0], target, data[2])
                continue
            if dying is not None:
                node.send_budget = dying.partial_send
            if kind == "start":
                self.log("start", target, None, None)
                self.enter_phase(node, 1)
                self.try_advance(node)
            else:
                src, dst, msg = data
                self.log("deliver", src, dst, msg)
                self.receive(node, msg)
            if dying is not None:
                node.send_budget = None
                self.crash(node)
        return index


def run_wa(
    G: DiGraph,
    f: int,
    inputs: Sequence,
    policy: DelayPolicy | None = None,
    crashes: Sequence[AsyncCrash] = (),
    config: WaConfig | None = None,
    *,
    record_events: bool = True,
    max_events: int = 10_000_000,
):
    """Run Algorithm WA; returns ``(outputs, trace)``.

    Nodes keep relaying after they output, since other nodes may depend on
    them to forward flooded values.  Quiescence with some fault-free node short
    of ``p_end`` phases is reported through ``trace.starved``.
    """
    inputs = tuple(as_fraction(x) for x in inputs)
    if len(inputs) != G.n:
        raise InvalidArgument(f"expected {G.n} inputs, got {len(inputs)}")
    crashes = tuple(crashes)
    if len(crashes) > f or len({c.node for c in crashes}) != len(crashes):
        raise InvalidArgument("at most f crashes, one per node")
    policy = policy or DelayPolicy()
    config = config or WaConfig(Fraction(1, 1000))
    M = config.M if config.M is not None else max(inputs)
    m = config.m if config.m is not None else min(inputs)
    p_end = config.p_end or p_end_bound(G.n, f, M, m, config.epsilon)
    sim = _WaSim(G, f, inputs, policy, crashes, p_end, config.epsilon, record_events, max_events)
    n_events = sim.run()
    outputs = [node.output if not node.crashed else None for node in sim.nodes]
    starved = frozenset(node.i for node in sim.nodes if not node.crashed and not node.done)
    trace = AsyncTrace(G, f, inputs, p_end, config.epsilon, outputs, frozenset(sim.crashed), starved, sim.averages, sim.events, n_events)
    return outputs, trace


# ---------------------------------------------------------------------------
# checkers
# ---------------------------------------------------------------------------


def check_epsilon_verdict(outputs: Sequence, inputs: Sequence, epsilon, fault_free=None) -> Verdict:
    """Epsilon-agreement, convex-hull validity and termination over fault-free nodes."""
    epsilon = as_fraction(epsilon)
    inputs = [as_fraction(x) for x in inputs]
    if fault_free is None:
        fault_free = [i for i, o in enumerate(outputs) if o is not None]
    fault_free = sorted(fault_free)
    decided = [(i, as_fraction(outputs[i])) for i in fault_free if outputs[i] is not None]
    details = {}
    termination = len(decided) == len(fault_free)
    if not termination:
        details["undecided"] = [i for i in fault_free if outputs[i] is None]
    agreement = True
    if decided:
        hi = max(decided, key=lambda x: x[1])
        lo = min(decided, key=lambda x: x[1])
        spread = hi[1] - lo[1]
        details["spread"] = fmt(spread)
        if spread > epsilon:
            agreement = False
            details["disagreeing_pair"] = [lo[0], hi[0]]
    lo_in, hi_in = min(inputs), max(inputs)
    validity = True
    for i, o in decided:
        if not lo_in <= o <= hi_in:
            validity = False
            details["invalid_output"] = {"node": i, "value": fmt(o)}
            break
    return Verdict(agreement, validity, termination, details)


def check_heard_intersection(trace: AsyncTrace) -> list[tuple[int, int, int]]:
    """``(phase, i, j)`` for every pair whose heard sets at averaging time are disjoint."""
    by_phase: dict[int, list[AverageRecord]] = {}
    for rec in trace.averages:
        by_phase.setdefault(rec.phase, []).append(rec)
    bad = []
    for p in sorted(by_phase):
        recs = sorted(by_phase[p], key=lambda r: r.node)
        for a, b in itertools.combinations(recs, 2):
            if not a.heard & b.heard:
                bad.append((p, a.node, b.node))
    return bad


def check_contraction(trace: AsyncTrace) -> list[dict]:
    """Phases where the value range fails to shrink by ``1 - 1/n`` (or grows)."""
    ranges = trace.phase_ranges()
    factor = Fraction(trace.graph.n - 1, trace.graph.n)
    bad = []
    for p in range(1, len(ranges)):
        if ranges[p] > factor * ranges[p - 1]:
            bad.append({"phase": p, "range": fmt(ranges[p]), "previous": fmt(ranges[p - 1])})
    return bad


def check_intermediate_validity(trace: AsyncTrace) -> list[AverageRecord]:
    lo, hi = min(trace.inputs), max(trace.inputs)
    return [rec for rec in trace.averages if not lo <= rec.value <= hi]


def check_fifo(trace: AsyncTrace) -> list[tuple[int, int]]:
    """Edges whose delivery order differs from their send order."""
    sent: dict = {}
    got: dict = {}
    for _, kind, src, dst, msg in trace.events:
        if kind == "send":
            sent.setdefault((src, dst), []).append(msg)
        elif kind in ("deliver", "drop"):
            got.setdefault((src, dst), []).append(msg)
    return sorted(e for e, seq in got.items() if sent.get(e, [])[: len(seq)] != seq)


def gatekeeper_scenario(G: DiGraph, witness: AsyncViolationWitness, epsilon, seed: int = 0, slow: int = 10**9):
    """Inputs and delay policy that stall the gatekeepers of a violating partition.

    ``L`` starts at 0, ``R`` at ``2 epsilon`` and ``C`` at ``epsilon``; every link
    from ``O(L)`` into ``L`` and from ``O(R)`` into ``R`` is slowed to ``slow``.
    """
    epsilon = as_fraction(epsilon)
    P = witness.partition
    inputs = []
    for i in range(G.n):
        inputs.append(Fraction(0) if i in P.L else 2 * epsilon if i in P.R else epsilon)
    delayed = {(o, x) for o in witness.O_L for x in P.L if G.has_edge(o, x)}
    delayed |= {(o, x) for o in witness.O_R for x in P.R if G.has_edge(o, x)}
    policy = DelayPolicy("gatekeeper-adversary", seed=seed, slow=slow, delayed_edges=frozenset(delayed))
    return inputs, policy
