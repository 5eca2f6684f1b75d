"""Exhaustive check that no fixed anonymous transition function solves binary
consensus on the clique-with-source-and-leaf graph.

A table ``Z`` maps a binary multiset (own value plus received values) to a bit.
Every table is run against a fixed scenario family; it is falsified when some
scenario never settles into a unanimous fixed state holding some node's input.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from . import kernels
from .errors import IncompleteTable, InvalidArgument, VerificationFailure
from .graph import DiGraph, to_mask


@dataclass(frozen=True, order=True)
class BinaryMultiset:
    zeros: int
    ones: int

    def __post_init__(self):
        if self.zeros < 0 or self.ones < 0 or self.zeros + self.ones < 1:
            raise InvalidArgument("multiset needs non-negative counts and at least one element")

    @property
    def size(self) -> int:
        return self.zeros + self.ones

    @property
    def mixed(self) -> bool:
        return self.zeros > 0 and self.ones > 0

    def __str__(self):
        return "{" + ",".join(["0"] * self.zeros + ["1"] * self.ones) + "}"


def mixed_multisets(max_size: int) -> list[BinaryMultiset]:
    """Mixed multisets of size 2..max_size, ordered by size then number of ones."""
    return [BinaryMultiset(k - o, o) for k in range(2, max_size + 1) for o in range(1, k)]


@dataclass(frozen=True)
class TransitionTable:
    """Bit assigned to each multiset of size ``1..max_size``.

    ``index`` packs the mixed entries: bit ``b`` is the output for the ``b``-th
    element of :func:`mixed_multisets`.  Unanimous multisets map to their value.
    """

    max_size: int
    index: int

    def __post_init__(self):
        if self.max_size < 1:
            raise InvalidArgument("max_size must be >= 1")
        if not 0 <= self.index < 1 << len(mixed_multisets(self.max_size)):
            raise InvalidArgument(f"table index {self.index} out of range")

    def __call__(self, ms: BinaryMultiset) -> int:
        if ms.size > self.max_size:
            raise IncompleteTable(f"no entry for {ms} in a table of max size {self.max_size}")
        if ms.zeros == 0:
            return 1
        if ms.ones == 0:
            return 0
        b = (ms.size - 1) * (ms.size - 2) // 2 + ms.ones - 1
        return self.index >> b & 1

    @property
    def entries(self) -> dict[BinaryMultiset, int]:
        out = {}
        for k in range(1, self.max_size + 1):
            for o in range(k + 1):
                ms = BinaryMultiset(k - o, o)
                out[ms] = self(ms)
        return out

    def lut(self) -> np.ndarray:
        return table_luts(self.max_size, np.array([self.index]))[0]

    def to_json(self):
        return {"index": self.index, "mixed": {str(ms): self(ms) for ms in mixed_multisets(self.max_size)}}


def table_count(max_size: int) -> int:
    return 1 << len(mixed_multisets(max_size))


def enumerate_transition_tables(max_size: int) -> Iterator[TransitionTable]:
    """Every table over multisets of size ``1..max_size`` with unanimity entries forced."""
    if max_size < 2:
        raise InvalidArgument("max_size must be >= 2")
    for idx in range(table_count(max_size)):
        yield TransitionTable(max_size, idx)


def table_luts(max_size: int, indices) -> np.ndarray:
    """``(T, max_size+1, max_size+1)`` lookup arrays ``[size, ones]``; ``-1`` where undefined."""
    indices = np.asarray(indices, dtype=np.int64)
    lut = np.full((indices.size, max_size + 1, max_size + 1), -1, dtype=np.int8)
    for k in range(1, max_size + 1):
        lut[:, k, 0] = 0
        lut[:, k, k] = 1
    for b, ms in enumerate(mixed_multisets(max_size)):
        lut[:, ms.size, ms.ones] = (indices >> b) & 1
    return lut


# ---------------------------------------------------------------------------
# graph and runs
# ---------------------------------------------------------------------------


def counterexample_graph(f: int) -> DiGraph:
    """Source ``0``, clique ``1..f+1``, leaf ``f+2``.

    The source links to every clique node and every clique node links to the leaf.
    """
    if f < 1:
        raise InvalidArgument(f"f must be >= 1, got {f}")
    clique = range(1, f + 2)
    leaf = f + 2
    edges = [(a, b) for a in clique for b in clique if a != b]
    edges += [(0, c) for c in clique] + [(c, leaf) for c in clique]
    return DiGraph(f + 3, edges)


def clique_nodes(f: int) -> range:
    return range(1, f + 2)


@dataclass
class IterativeRun:
    states: list[tuple[int, ...]]
    live: frozenset
    cycle_start: int | None
    cycle_length: int | None

    @property
    def settled_value(self) -> int | None:
        """Common live value if the run ends in a unanimous fixed point, else ``None``."""
        if self.cycle_length != 1:
            return None
        last = self.states[self.cycle_start]
        vals = {last[i] for i in self.live}
        return vals.pop() if len(vals) == 1 else None

    def solves(self, inputs: Sequence[int]) -> bool:
        v = self.settled_value
        return v is not None and v in set(inputs)

    def to_json(self):
        return {
            "cycle_start": self.cycle_start,
            "cycle_length": self.cycle_length,
            "cycle": ["".join(map(str, s)) for s in self.states[self.cycle_start :]] if self.cycle_start is not None else None,
        }


def run_fixed_iterative(G: DiGraph, Z: TransitionTable, inputs: Sequence[int], crashed_at_start=(), max_iters: int = 1024) -> IterativeRun:
    """Iterate ``Z`` synchronously; stop when the global state repeats or after ``max_iters`` steps.

    Crashed nodes keep their input in the state vector but send nothing and are
    not counted as live.
    """
    if len(inputs) != G.n or any(x not in (0, 1) for x in inputs):
        raise InvalidArgument("inputs must be a bit per node")
    crashed = frozenset(crashed_at_start)
    live = frozenset(range(G.n)) - crashed
    x = tuple(int(v) for v in inputs)
    states = [x]
    first_seen = {x: 0}
    for it in range(1, max_iters + 1):
        nxt = list(x)
        for i in sorted(live):
            vals = [x[i]] + [x[j] for j in G.in_neighbors(i) if j != i and j in live]
            ones = sum(vals)
            nxt[i] = Z(BinaryMultiset(len(vals) - ones, ones))
        x = tuple(nxt)
        if x in first_seen:
            start = first_seen[x]
            return IterativeRun(states, live, start, it - start)
        first_seen[x] = it
        states.append(x)
    return IterativeRun(states, live, None, None)


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    inputs: tuple[int, ...]
    crashed: frozenset

    @property
    def label(self) -> str:
        c = ",".join(map(str, sorted(self.crashed))) or "-"
        return f"inputs={''.join(map(str, self.inputs))} crashed={c}"

    def to_json(self):
        return {"inputs": list(self.inputs), "crashed": sorted(self.crashed)}


def scenario_family(f: int, all_inputs: bool = False) -> list[Scenario]:
    """Inputs constant on source, clique and leaf (or all ``2^n`` vectors), each
    with no crash and with each single clique node crashed at start."""
    n = f + 3
    if all_inputs:
        vecs = [tuple(v) for v in itertools.product((0, 1), repeat=n)]
    else:
        vecs = [(s,) + (c,) * (f + 1) + (l,) for s, c, l in itertools.product((0, 1), repeat=3)]
    crash_options = [frozenset()] + [frozenset({c}) for c in clique_nodes(f)]
    return [Scenario(v, c) for v in vecs for c in crash_options]


@dataclass
class TableVerdict:
    table: TransitionTable
    falsifying: list[int]
    witness: Scenario | None
    witness_run: IterativeRun | None

    def to_json(self):
        return {
            "index": self.table.index,
            "falsified": bool(self.falsifying),
            "witness": self.witness.to_json() if self.witness else None,
            "iteration": self.witness_run.to_json() if self.witness_run else None,
            "falsifying_scenarios": len(self.falsifying),
        }


@dataclass
class ImpossibilityReport:
    f: int
    max_size: int
    graph: DiGraph
    scenarios: list[Scenario]
    tables: list[TableVerdict]
    case_witnesses: dict | None = field(default=None)

    @property
    def n_tables(self) -> int:
        return len(self.tables)

    @property
    def n_falsified(self) -> int:
        return sum(1 for t in self.tables if t.falsifying)

    def summary(self) -> str:
        return f"tables={self.n_tables} falsified={self.n_falsified}"

    def to_json(self, include_tables: bool = True):
        out = {
            "f": self.f,
            "max_size": self.max_size,
            "multiset_order": [str(ms) for ms in mixed_multisets(self.max_size)],
            "graph_edges": [list(e) for e in self.graph.sorted_edges()],
            "scenarios": [s.to_json() for s in self.scenarios],
            "tables": self.n_tables,
            "falsified": self.n_falsified,
            "case_witnesses": self.case_witnesses,
        }
        if include_tables:
            out["per_table"] = [t.to_json() for t in self.tables]
        return out


def falsification_matrix(G: DiGraph, max_size: int, scenarios: Sequence[Scenario], steps: int, indices=None) -> np.ndarray:
    """``(tables, scenarios)`` bool: the scenario's run fails to settle on a valid unanimous value."""
    if indices is None:
        indices = np.arange(table_count(max_size), dtype=np.int64)
    luts = table_luts(max_size, indices)
    in_masks = np.array(G.in_masks, dtype=np.int64)
    out = np.zeros((luts.shape[0], len(scenarios)), dtype=bool)
    for k, sc in enumerate(scenarios):
        live = [i for i in range(G.n) if i not in sc.crashed]
        live_mask = to_mask(live)
        x0 = np.array(sc.inputs, dtype=np.int8)
        states, succ, missing = kernels.fixed_iterative(in_masks, live_mask, luts, x0, steps)
        if missing.any():
            raise IncompleteTable(f"tables of max size {max_size} miss entries needed by {sc.label}")
        s_live = states[:, live]
        fixed = (s_live == succ[:, live]).all(axis=1)
        unanimous = (s_live == s_live[:, :1]).all(axis=1)
        valid = np.isin(s_live[:, 0], list(set(sc.inputs)))
        out[:, k] = ~(fixed & unanimous & valid)
    return out


def _case_witnesses(f: int, scenarios: list[Scenario], tables: list[TableVerdict]) -> dict:
    """For f = 1: tables with Z({0,1}) = 0 fall to "source 1, rest 0" and tables
    with Z({0,1}) = 1 to "source 0, rest 1", each with a clique node crashed."""
    mixed = BinaryMultiset(1, 1)
    n = f + 3
    want = {0: (1,) + (0,) * (n - 1), 1: (0,) + (1,) * (n - 1)}
    result = {}
    for z, vec in want.items():
        ids = [k for k, s in enumerate(scenarios) if s.inputs == vec and s.crashed]
        group = [t for t in tables if t.table(mixed) == z]
        hit = [t for t in group if any(k in t.falsifying for k in ids)]
        result[f"Z({{0,1}})={z}"] = {
            "scenario": "".join(map(str, vec)),
            "tables": len(group),
            "falsified_by_scenario": len(hit),
            "holds": len(hit) == len(group) > 0,
        }
    return result


def verify_impossibility(f: int, max_iters: int | None = None, max_size: int | None = None, *, all_inputs: bool = False) -> ImpossibilityReport:
    """Falsify every transition table on :func:`counterexample_graph`.

    Tables span multisets of size ``1..2f+2`` by default.  Each run is advanced
    ``max_iters`` steps (default ``2^n``, enough for a binary state to enter its
    cycle) before its state is judged.
    """
    if f < 1:
        raise InvalidArgument(f"f must be >= 1, got {f}")
    G = counterexample_graph(f)
    max_size = max_size or 2 * f + 2
    need = max(G.in_degree(i) for i in range(G.n)) + 1
    if max_size < need:
        raise InvalidArgument(f"max_size must be at least {need} for this graph")
    steps = max_iters if max_iters is not None else 1 << G.n
    if steps < 1 << G.n:
        raise InvalidArgument(f"max_iters must be >= 2^n = {1 << G.n} for cycle detection to be complete")
    scenarios = scenario_family(f, all_inputs)
    fals = falsification_matrix(G, max_size, scenarios, steps)
    verdicts = []
    for idx in range(fals.shape[0]):
        hits = np.flatnonzero(fals[idx]).tolist()
        table = TransitionTable(max_size, idx)
        if hits:
            sc = scenarios[hits[0]]
            run = run_fixed_iterative(G, table, sc.inputs, sc.crashed, steps)
            verdicts.append(TableVerdict(table, hits, sc, run))
        else:
            verdicts.append(TableVerdict(table, [], None, None))
    report = ImpossibilityReport(f, max_size, G, scenarios, verdicts)
    if f == 1:
        report.case_witnesses = _case_witnesses(f, scenarios, verdicts)
    survivors = [t.table.index for t in verdicts if not t.falsifying]
    if survivors:
        raise VerificationFailure(f"tables without a falsifying scenario: {survivors[:10]}")
    return report
