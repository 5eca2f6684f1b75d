"""Synchronous round simulator with crash injection: Min-Max, MVC and trace checkers.

A run is ``iterations x (phases * d)`` rounds.  Min-Max is a single iteration of
``2f+2`` phases; MVC has ``K+1`` outer iterations of ``2f+2`` inner phases each.
Crash events address phases globally (MVC phases continue counting across outer
iterations) and rounds within a phase, both 1-based.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .conditions import rounds_per_phase
from .errors import InvalidInput, InvalidSchedule
from .graph import DiGraph, from_mask, to_mask
from .kernels import ACTIVE, CRASHED, EXITED

NEVER = 1 << 62


# ---------------------------------------------------------------------------
# schedules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SyncCrashEvent:
    node: int
    phase: int
    round_in_phase: int
    delivered_to: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "delivered_to", frozenset(int(x) for x in self.delivered_to))

    def global_round(self, d: int) -> int:
        return (self.phase - 1) * d + (self.round_in_phase - 1)

    def to_json(self):
        return {"node": self.node, "phase": self.phase, "round": self.round_in_phase, "delivered_to": sorted(self.delivered_to)}


@dataclass(frozen=True)
class CrashSchedule:
    events: tuple = ()
    f: int = 0

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(sorted(self.events, key=lambda e: (e.node, e.phase, e.round_in_phase))))

    @property
    def crashed(self) -> frozenset:
        return frozenset(e.node for e in self.events)

    def validate(self, G: DiGraph, d: int, n_phases: int) -> None:
        if len(self.events) > self.f:
            raise InvalidSchedule(f"{len(self.events)} crash events exceed f={self.f}")
        nodes = [e.node for e in self.events]
        if len(set(nodes)) != len(nodes):
            raise InvalidSchedule("a node may crash at most once")
        for e in self.events:
            if not 0 <= e.node < G.n:
                raise InvalidSchedule(f"crash of unknown node {e.node}")
            if not 1 <= e.phase <= n_phases:
                raise InvalidSchedule(f"phase {e.phase} outside 1..{n_phases}")
            if not 1 <= e.round_in_phase <= d:
                raise InvalidSchedule(f"round {e.round_in_phase} outside 1..{d}")
            extra = e.delivered_to - (G.out_neighbors(e.node) - {e.node})
            if extra:
                raise InvalidSchedule(f"node {e.node} cannot deliver to {sorted(extra)}")

    def as_arrays(self, n: int, d: int) -> tuple[np.ndarray, np.ndarray]:
        crash_round = np.full(n, NEVER, dtype=np.int64)
        crash_mask = np.zeros(n, dtype=np.int64)
        for e in self.events:
            crash_round[e.node] = e.global_round(d)
            crash_mask[e.node] = to_mask(e.delivered_to)
        return crash_round, crash_mask

    @classmethod
    def from_arrays(cls, crash_round, crash_mask, d: int, f: int) -> "CrashSchedule":
        events = []
        for node, g in enumerate(crash_round):
            if g < NEVER:
                g = int(g)
                events.append(SyncCrashEvent(node, g // d + 1, g % d + 1, from_mask(int(crash_mask[node]))))
        return cls(tuple(events), f)

    def to_json(self):
        return [e.to_json() for e in self.events]

    @classmethod
    def from_json(cls, data, f: int) -> "CrashSchedule":
        if isinstance(data, dict):
            data = data.get("events", [])
        try:
            events = [SyncCrashEvent(int(e["node"]), int(e["phase"]), int(e["round"]), e.get("delivered_to", ())) for e in data]
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidSchedule(f"malformed schedule entry: {exc}") from None
        return cls(tuple(events), f)


def random_schedule_arrays(G: DiGraph, f: int, d: int, n_phases: int, rng: np.random.Generator, count: int):
    """``count`` random schedules as ``(crash_round, crash_mask)`` arrays of shape ``(count, n)``.

    Each schedule crashes a uniform number of nodes in ``0..f``, each at a
    uniform (phase, round) with a uniform subset of its out-neighbours receiving
    the final broadcast.
    """
    n = G.n
    f_eff = min(f, n)
    n_crash = rng.integers(0, f_eff + 1, size=count)
    keys = rng.random((count, n))
    rank = np.argsort(np.argsort(keys, axis=1), axis=1)
    chosen = rank < n_crash[:, None]
    phase = rng.integers(1, n_phases + 1, size=(count, n))
    rnd = rng.integers(1, d + 1, size=(count, n))
    subset = rng.integers(0, 1 << n, size=(count, n)) & np.asarray(G.out_masks, dtype=np.int64)[None, :]
    crash_round = np.where(chosen, (phase - 1) * d + (rnd - 1), NEVER).astype(np.int64)
    crash_mask = np.where(chosen, subset, 0).astype(np.int64)
    return crash_round, crash_mask


def _crash_points(G: DiGraph, u: int, d: int, n_phases: int, mid_round: bool):
    pts = {(p, 1, frozenset()) for p in range(1, n_phases + 1)}
    if mid_round:
        outs = sorted(G.out_neighbors(u) - {u})
        for p in range(1, n_phases + 1):
            for r in range(1, d + 1):
                for k in range(len(outs) + 1):
                    for sub in itertools.combinations(outs, k):
                        pts.add((p, r, frozenset(sub)))
    return sorted(pts, key=lambda x: (x[0], x[1], sorted(x[2]), len(x[2])))


def generate_schedules(
    G: DiGraph,
    f: int,
    mode: str = "seeded-random",
    seed: int = 0,
    count: int = 1,
    *,
    d: int | None = None,
    n_phases: int | None = None,
) -> list[CrashSchedule]:
    """Crash schedules for runs on ``G``.

    ``exhaustive-small`` yields the empty schedule plus every combination of up to
    ``f`` crashing nodes, each crashing at a phase boundary or (when ``n <= 4``)
    at any round with any delivered subset.  ``seeded-random`` draws ``count``
    schedules from ``seed``; a longer list extends a shorter one with the same seed.
    """
    if d is None:
        d = rounds_per_phase(G, f)
    if n_phases is None:
        n_phases = 2 * f + 2
    if mode == "seeded-random":
        if count < 1:
            raise InvalidSchedule("count must be >= 1")
        rng = np.random.default_rng(seed)
        out = []
        for _ in range(count):
            cr, cm = random_schedule_arrays(G, f, d, n_phases, rng, 1)
            out.append(CrashSchedule.from_arrays(cr[0], cm[0], d, f))
        return out
    if mode == "exhaustive-small":
        mid = G.n <= 4
        out = [CrashSchedule((), f)]
        for c in range(1, min(f, G.n - 1) + 1):
            for nodes in itertools.combinations(range(G.n), c):
                per_node = [_crash_points(G, u, d, n_phases, mid) for u in nodes]
                for pts in itertools.product(*per_node):
                    out.append(CrashSchedule(tuple(SyncCrashEvent(u, p, r, s) for u, (p, r, s) in zip(nodes, pts)), f))
        return out
    raise InvalidSchedule(f"unknown schedule mode {mode!r}")


def has_clean_phase_pair(crash_round: Iterable[int], d: int, n_phases: int) -> bool:
    """Whether two consecutive phases see no crash event."""
    dirty = set()
    for g in crash_round:
        if g < n_phases * d:
            dirty.add(int(g) // d + 1)
    return any(p not in dirty and p + 1 not in dirty for p in range(1, n_phases))


# ---------------------------------------------------------------------------
# traces
# ---------------------------------------------------------------------------


@dataclass
class SyncTrace:
    """Per-round record of one execution.

    ``v``, ``t`` and ``status`` have shape ``(iterations, phases*d + 1, n)``: index
    ``[l, 0]`` is the state entering iteration ``l`` (after STEP I for MVC) and
    ``[l, k]`` the state after its ``k``-th round.  Min-Max runs have one
    iteration and no ``t``.
    """

    algorithm: str
    graph: DiGraph
    f: int
    d: int
    n_phases: int
    inputs: tuple
    v: np.ndarray
    status: np.ndarray
    crash_round: np.ndarray
    crash_mask: np.ndarray
    outputs: list
    t: np.ndarray | None = None
    K: int | None = None

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def rounds_per_iteration(self) -> int:
        return self.n_phases * self.d

    @property
    def faulty(self) -> frozenset:
        return frozenset(i for i, o in enumerate(self.outputs) if o is None)

    def phase_of(self, k: int) -> tuple[int, int]:
        """(phase within iteration, round within phase) of step ``k >= 1``."""
        return (k - 1) // self.d + 1, (k - 1) % self.d + 1

    def deliveries(self, l: int, k: int) -> np.ndarray:
        """``(n, n)`` bool: sender ``u`` delivered to live receiver ``w`` in step ``k`` of iteration ``l``."""
        n = self.n
        g = l * self.rounds_per_iteration + k - 1
        out = np.zeros((n, n), dtype=bool)
        before = self.status[l, k - 1]
        for u in range(n):
            if before[u] == EXITED or self.crash_round[u] < g:
                continue
            mask = self.graph.out_masks[u] if self.crash_round[u] > g else int(self.crash_mask[u])
            targets = from_mask(mask) | {u}
            for w in targets:
                if before[w] == ACTIVE and self.crash_round[w] > g:
                    out[u, w] = True
        return out

    def rows(self):
        """(iteration, phase, round, sender, receiver, payload) per delivery."""
        for l in range(self.v.shape[0]):
            for k in range(1, self.rounds_per_iteration + 1):
                phase, rnd = self.phase_of(k)
                D = self.deliveries(l, k)
                for u, w in zip(*np.nonzero(D)):
                    payload = int(self.v[l, k - 1, u])
                    if self.t is not None:
                        payload = f"({payload},{int(self.t[l, k - 1, u])})"
                    yield l, l * self.n_phases + phase, rnd, int(u), int(w), payload

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "phase", "round", "sender", "receiver", "payload"])
        w.writerows(self.rows())
        return buf.getvalue()

    def to_json(self):
        data = {
            "algorithm": self.algorithm,
            "n": self.n,
            "f": self.f,
            "d": self.d,
            "phases_per_iteration": self.n_phases,
            "inputs": list(self.inputs),
            "outputs": self.outputs,
            "schedule": CrashSchedule.from_arrays(self.crash_round, self.crash_mask, self.d, self.f).to_json()
            if self.algorithm == "minmax"
            else _mvc_schedule_json(self),
            "v": self.v.tolist(),
            "status": self.status.tolist(),
        }
        if self.t is not None:
            data["t"] = self.t.tolist()
            data["K"] = self.K
        return data


def _mvc_schedule_json(trace: SyncTrace):
    per_iter = trace.n_phases
    total_phases = per_iter * trace.v.shape[0]
    sched = CrashSchedule.from_arrays(trace.crash_round, trace.crash_mask, trace.d, trace.f)
    return [e.to_json() for e in sched.events if e.phase <= total_phases]


@dataclass(frozen=True)
class Verdict:
    agreement: bool
    validity: bool
    termination: bool
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.agreement and self.validity and self.termination

    def to_json(self):
        return {"agreement": self.agreement, "validity": self.validity, "termination": self.termination, "details": self.details}


def check_verdict(trace: SyncTrace | None, inputs: Sequence, outputs: Sequence) -> Verdict:
    """Agreement, validity and termination over fault-free nodes.

    Fault-free nodes are those the trace does not mark as crashed before
    deciding; without a trace, every node with a non-``None`` output.
    """
    if trace is not None:
        fault_free = [i for i in range(trace.n) if trace.crash_round[i] >= _decision_round(trace, i)]
    else:
        fault_free = [i for i, o in enumerate(outputs) if o is not None]
    details = {}
    decided = [(i, outputs[i]) for i in fault_free if outputs[i] is not None]
    termination = len(decided) == len(fault_free)
    if not termination:
        details["undecided"] = [i for i in fault_free if outputs[i] is None]
    agreement = True
    for (i, a), (j, b) in itertools.combinations(decided, 2):
        if a != b:
            agreement = False
            details["disagreeing_pair"] = [i, j]
            break
    allowed = set(inputs)
    validity = True
    for i, o in decided:
        if o not in allowed:
            validity = False
            details["invalid_output"] = {"node": i, "value": o}
            break
    return Verdict(agreement, validity, termination, details)


def _decision_round(trace: SyncTrace, i: int) -> int:
    if trace.algorithm == "minmax":
        return trace.rounds_per_iteration
    PD = trace.rounds_per_iteration
    exits = np.nonzero(trace.status[:, 0, i] == EXITED)[0]
    if exits.size:
        return int(exits[0]) * PD
    return trace.v.shape[0] * PD


# ---------------------------------------------------------------------------
# Min-Max
# ---------------------------------------------------------------------------


def _check_bits(inputs, n):
    inputs = tuple(int(x) for x in inputs)
    if len(inputs) != n or any(x not in (0, 1) for x in inputs):
        raise InvalidInput(f"Min-Max needs {n} binary inputs, got {inputs}")
    return inputs


def _status_from_crashes(crash_round, n_steps):
    steps = np.arange(n_steps + 1)[:, None]
    return np.where(crash_round[None, :] < steps, CRASHED, ACTIVE).astype(np.int8)


def run_min_max(G: DiGraph, f: int, inputs: Sequence[int], schedule: CrashSchedule | None = None, d: int | None = None):
    """Run Algorithm Min-Max; returns ``(outputs, trace)``, ``None`` output for crashed nodes."""
    inputs = _check_bits(inputs, G.n)
    if d is None:
        d = rounds_per_phase(G, f)
    n_phases = 2 * f + 2
    schedule = schedule or CrashSchedule((), f)
    schedule.validate(G, d, n_phases)
    cr, cm = schedule.as_arrays(G.n, d)
    v0 = np.array([inputs], dtype=np.uint64)
    hist = kernels.minmax_bits(G.out_masks, cr[None, :], cm[None, :], v0, n_phases, d)
    R = n_phases * d
    v = (hist[:, 0, :] & np.uint64(1)).astype(np.int8)
    outputs = [int(v[R, i]) if cr[i] >= R else None for i in range(G.n)]
    trace = SyncTrace("minmax", G, f, d, n_phases, inputs, v[None], _status_from_crashes(cr, R)[None], cr, cm, outputs)
    return outputs, trace


def input_planes(input_vectors: np.ndarray) -> np.ndarray:
    """Pack up to 64 binary input vectors ``(B, n)`` into per-node uint64 bit planes ``(n,)``."""
    input_vectors = np.asarray(input_vectors, dtype=np.uint64)
    B = input_vectors.shape[0]
    if B > 64:
        raise InvalidInput("at most 64 input vectors fit one bit plane")
    shifts = np.arange(B, dtype=np.uint64)[:, None]
    return np.bitwise_or.reduce(input_vectors << shifts, axis=0)


def all_binary_inputs(n: int) -> np.ndarray:
    b = np.arange(1 << n)[:, None]
    return ((b >> np.arange(n)[None, :]) & 1).astype(np.int8)


@dataclass
class MinMaxSweep:
    """Verdict counts of Min-Max over schedules x input vectors, computed on bit planes."""

    runs: int
    failed_runs: int
    agreement_failures: int
    validity_failures: int
    termination_failures: int
    clean_phase_failures: int
    first_failure: dict | None = None

    @property
    def all_true(self) -> int:
        return self.runs - self.failed_runs

    def to_json(self):
        return {
            "runs": self.runs,
            "all_true": self.all_true,
            "agreement_failures": self.agreement_failures,
            "validity_failures": self.validity_failures,
            "termination_failures": self.termination_failures,
            "clean_phase_failures": self.clean_phase_failures,
            "first_failure": self.first_failure,
        }


def clean_phase_pairs(crash_round: np.ndarray, d: int, n_phases: int) -> np.ndarray:
    """Vectorised :func:`has_clean_phase_pair` over schedule rows ``(S, n)``."""
    crash_round = np.asarray(crash_round, dtype=np.int64)
    in_run = crash_round < n_phases * d
    bit = np.where(in_run, np.left_shift(1, np.where(in_run, crash_round // d, 0)), 0)
    dirty = np.bitwise_or.reduce(bit, axis=1)
    window = (1 << (n_phases - 1)) - 1
    return (~dirty & ~(dirty >> 1) & window) != 0


def _popcount_total(x) -> int:
    return int(np.bitwise_count(np.asarray(x, dtype=np.uint64)).sum())


def sweep_min_max(G: DiGraph, f: int, crash_round: np.ndarray, crash_mask: np.ndarray, d: int, input_vectors: np.ndarray | None = None) -> MinMaxSweep:
    """Run Min-Max for every schedule row against every input vector (all ``2^n`` by default)."""
    n = G.n
    if input_vectors is None:
        input_vectors = all_binary_inputs(n)
    input_vectors = np.asarray(input_vectors, dtype=np.int8)
    crash_round = np.asarray(crash_round, dtype=np.int64)
    crash_mask = np.asarray(crash_mask, dtype=np.int64)
    n_phases = 2 * f + 2
    R = n_phases * d
    S = crash_round.shape[0]
    agree = valid = failed = 0
    first = None
    ff = crash_round >= R
    for start in range(0, len(input_vectors), 64):
        chunk = input_vectors[start : start + 64]
        B = len(chunk)
        planes = input_planes(chunk)
        v0 = np.broadcast_to(planes, (S, n))
        final = kernels.minmax_bits(G.out_masks, crash_round, crash_mask, v0, n_phases, d)[R]
        used = np.uint64((1 << B) - 1) if B < 64 else kernels.ALL_ONES
        any_one = np.bitwise_or.reduce(np.where(ff, final, np.uint64(0)), axis=1) & used
        any_zero = np.bitwise_or.reduce(np.where(ff, ~final, np.uint64(0)), axis=1) & used
        bad_agree = any_one & any_zero
        bad_valid = ((any_one & ~planes_any(chunk, 1)) | (any_zero & ~planes_any(chunk, 0))) & used
        both = bad_agree | bad_valid
        agree += _popcount_total(bad_agree)
        valid += _popcount_total(bad_valid)
        failed += _popcount_total(both)
        if first is None and both.any():
            s = int(np.flatnonzero(both)[0])
            low = int(both[s])
            b = (low & -low).bit_length() - 1
            first = {
                "inputs": chunk[b].tolist(),
                "schedule": CrashSchedule.from_arrays(crash_round[s], crash_mask[s], d, f).to_json(),
            }
    clean = int((~clean_phase_pairs(crash_round, d, n_phases)).sum())
    return MinMaxSweep(S * len(input_vectors), failed, agree, valid, 0, clean, first)


def planes_any(input_vectors: np.ndarray, value: int) -> np.uint64:
    """Bit ``b`` set iff input vector ``b`` contains ``value`` somewhere."""
    hit = (np.asarray(input_vectors) == value).any(axis=1)
    return np.uint64(sum(1 << b for b in np.flatnonzero(hit)))


# ---------------------------------------------------------------------------
# MVC
# ---------------------------------------------------------------------------


def _check_mvc_inputs(inputs, n, K):
    if K < 1:
        raise InvalidInput(f"K must be >= 1, got {K}")
    out = []
    for x in inputs:
        if isinstance(x, bool) or int(x) != x:
            raise InvalidInput(f"input {x!r} is not an integer")
        if not 0 <= int(x) <= K:
            raise InvalidInput(f"input {x} outside [0, {K}]")
        out.append(int(x))
    if len(out) != n:
        raise InvalidInput(f"expected {n} inputs, got {len(out)}")
    return tuple(out)


@dataclass
class MvcBatch:
    graph: DiGraph
    f: int
    K: int
    d: int
    inputs: np.ndarray
    crash_round: np.ndarray
    crash_mask: np.ndarray
    v: np.ndarray
    t: np.ndarray
    status: np.ndarray
    outputs: np.ndarray

    def __len__(self):
        return self.inputs.shape[0]

    def trace(self, b: int) -> SyncTrace:
        outs = [int(o) if o >= 0 else None for o in self.outputs[b]]
        return SyncTrace(
            "mvc",
            self.graph,
            self.f,
            self.d,
            2 * self.f + 2,
            tuple(int(x) for x in self.inputs[b]),
            self.v[:, :, b, :],
            self.status[:, :, b, :],
            self.crash_round[b],
            self.crash_mask[b],
            outs,
            t=self.t[:, :, b, :],
            K=self.K,
        )

    def verdict_failures(self) -> np.ndarray:
        """Bool ``(B,)``: run violates agreement or validity (termination holds by construction)."""
        decided = self.outputs >= 0
        hi = np.where(decided, self.outputs, -1).max(axis=1)
        lo = np.where(decided, self.outputs, self.K + 1).min(axis=1)
        disagree = decided.any(axis=1) & (hi != lo)
        in_inputs = (self.outputs[:, :, None] == self.inputs[:, None, :]).any(axis=2)
        invalid = (decided & ~in_inputs).any(axis=1)
        return disagree | invalid


def run_mvc_batch(G: DiGraph, f: int, K: int, inputs, crash_round, crash_mask, d: int | None = None) -> MvcBatch:
    inputs = np.asarray(inputs, dtype=np.int64)
    if inputs.ndim != 2 or inputs.shape[1] != G.n:
        raise InvalidInput(f"inputs must have shape (batch, {G.n})")
    if K < 1 or (inputs < 0).any() or (inputs > K).any():
        raise InvalidInput(f"inputs must lie in [0, {K}]")
    if d is None:
        d = rounds_per_phase(G, f)
    n_inner = 2 * f + 2
    crash_round = np.asarray(crash_round, dtype=np.int64)
    crash_mask = np.asarray(crash_mask, dtype=np.int64)
    v, t, st, outputs = kernels.mvc(G.out_masks, crash_round, crash_mask, inputs, K, n_inner, d)
    return MvcBatch(G, f, K, d, inputs, crash_round, crash_mask, v, t, st, outputs)


def run_mvc(G: DiGraph, f: int, K: int, inputs: Sequence[int], schedule: CrashSchedule | None = None, d: int | None = None):
    """Run Algorithm MVC on integer inputs in ``[0, K]``; returns ``(outputs, trace)``."""
    inputs = _check_mvc_inputs(inputs, G.n, K)
    if d is None:
        d = rounds_per_phase(G, f)
    n_inner = 2 * f + 2
    schedule = schedule or CrashSchedule((), f)
    schedule.validate(G, d, (K + 1) * n_inner)
    cr, cm = schedule.as_arrays(G.n, d)
    batch = run_mvc_batch(G, f, K, [inputs], cr[None, :], cm[None, :], d)
    trace = batch.trace(0)
    return trace.outputs, trace


# ---------------------------------------------------------------------------
# trace checkers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InvariantViolation:
    assertion: str
    iteration: int
    node: int | None
    detail: str = ""
    run: int | None = None

    def to_json(self):
        return {"assertion": self.assertion, "iteration": self.iteration, "node": self.node, "detail": self.detail, "run": self.run}


MVC_ASSERTIONS = {
    "a": "live node with v = 1 has t > l",
    "b": "nodes finishing the inner loop share v",
    "c": "an exit at l needs some node beginning l with t = l",
    "d": "t equals some input",
}


def check_mvc_invariants(trace) -> list[InvariantViolation]:
    """Check the MVC trace invariants on a :class:`SyncTrace` or a whole :class:`MvcBatch`.

    (a) for ``l < K``, any active node with ``v = 1`` has ``t > l``;
    (b) nodes still active at the end of iteration ``l`` share one ``v``;
    (c) if a node exits at ``l``, some node began ``l`` with ``t = l``;
    (d) ``t`` always equals some input.
    """
    if isinstance(trace, MvcBatch):
        v, t, st, inputs = trace.v, trace.t, trace.status, trace.inputs
        K = trace.K
    else:
        if trace.t is None:
            raise ValueError("MVC invariants need a trace with tentative states")
        v, t, st = trace.v[:, :, None, :], trace.t[:, :, None, :], trace.status[:, :, None, :]
        inputs = np.asarray([trace.inputs])
        K = trace.K
    found: list[InvariantViolation] = []
    active = st == ACTIVE
    iters = v.shape[0]

    def emit(tag, l, b, i, detail):
        found.append(InvariantViolation(tag, int(l), None if i is None else int(i), detail, int(b)))

    # (a)
    l_idx = np.arange(iters)[:, None, None, None]
    bad = active & (v == 1) & (t <= l_idx) & (l_idx < K)
    for l, k, b, i in zip(*np.nonzero(bad)):
        emit("a", l, b, i, f"step {k}: v=1 with t={int(t[l, k, b, i])}")
    # (b)
    end_active = active[:, -1]
    end_v = v[:, -1]
    hi = np.where(end_active, end_v, -1).max(axis=2)
    lo = np.where(end_active, end_v, 2).min(axis=2)
    for l, b in zip(*np.nonzero(end_active.any(axis=2) & (hi != lo))):
        emit("b", l, b, None, "inner loop ended with mixed v")
    # (c)
    exits = end_active & (end_v == 0)
    began_at_l = (active[:, 0] & (t[:, 0] == np.arange(iters)[:, None, None])).any(axis=2)
    for l, b in zip(*np.nonzero(exits.any(axis=2) & ~began_at_l)):
        emit("c", l, b, int(np.flatnonzero(exits[l, b])[0]), "no node began the iteration with t = l")
    # (d)
    member = (t[..., None] == inputs[None, None, :, None, :]).any(axis=-1)
    for l, k, b, i in zip(*np.nonzero(active & ~member)):
        emit("d", l, b, i, f"step {k}: t={int(t[l, k, b, i])} is not an input")
    return found


def check_round_consistency(trace: SyncTrace) -> list[str]:
    """Replay every round from the recorded states with plain set logic.

    Confirms each recorded update is the min/max of values actually delivered
    along graph edges by live senders (and, for MVC, the tentative-state rule).
    Returns human-readable mismatches.
    """
    problems = []
    G = trace.graph
    iters, steps, n = trace.v.shape
    for l in range(iters):
        for k in range(1, steps):
            phase, _ = trace.phase_of(k)
            is_min = phase % 2 == 0
            g = l * trace.rounds_per_iteration + k - 1
            for w in range(n):
                if trace.status[l, k - 1, w] != ACTIVE or trace.crash_round[w] <= g:
                    if trace.v[l, k, w] != trace.v[l, k - 1, w]:
                        problems.append(f"iteration {l} step {k}: inactive node {w} changed state")
                    continue
                senders = []
                for u in G.in_neighbors(w):
                    if trace.status[l, k - 1, u] == EXITED or trace.crash_round[u] < g:
                        continue
                    if u != w and trace.crash_round[u] == g and not int(trace.crash_mask[u]) >> w & 1:
                        continue
                    senders.append(u)
                vals = [int(trace.v[l, k - 1, u]) for u in senders]
                expect = min(vals) if is_min else max(vals)
                if int(trace.v[l, k, w]) != expect:
                    problems.append(f"iteration {l} step {k}: node {w} has v={int(trace.v[l, k, w])}, expected {expect}")
                if trace.t is not None:
                    bigger = [int(trace.t[l, k - 1, u]) for u in senders if trace.t[l, k - 1, u] > l]
                    expect_t = min(bigger) if bigger else int(trace.t[l, k - 1, w])
                    if int(trace.t[l, k, w]) != expect_t:
                        problems.append(f"iteration {l} step {k}: node {w} has t={int(trace.t[l, k, w])}, expected {expect_t}")
    return problems


def information_flow(trace: SyncTrace, origins) -> np.ndarray:
    """Bool ``(iterations, steps+1, n)``: node holds information originating in ``origins``."""
    iters, steps, n = trace.v.shape
    taint = np.zeros((iters, steps, n), dtype=bool)
    cur = np.zeros(n, dtype=bool)
    cur[list(origins)] = True
    for l in range(iters):
        taint[l, 0] = cur
        for k in range(1, steps):
            D = trace.deliveries(l, k)
            cur = cur | (D & cur[:, None]).any(axis=0)
            taint[l, k] = cur
    return taint


def check_information_flow(trace: SyncTrace, origins, protected) -> list[tuple[int, int, int]]:
    """``(iteration, step, node)`` for each first time a node of ``protected`` learns from ``origins``."""
    taint = information_flow(trace, origins)
    hits = []
    for x in sorted(protected):
        where = np.argwhere(taint[:, :, x])
        if where.size:
            l, k = where[0]
            hits.append((int(l), int(k), x))
    return hits


def dumps_trace(trace: SyncTrace) -> str:
    return json.dumps(trace.to_json(), sort_keys=True)
