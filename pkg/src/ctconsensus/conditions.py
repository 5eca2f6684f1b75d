"""Feasibility conditions, fault-tolerant diameter and violation witnesses."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InfeasibleGraph, InvalidArgument, InvalidPartition, NotARoot
from .graph import (
    DiGraph,
    FaultSet,
    ReducedGraph,
    fault_mask,
    fault_sets,
    from_mask,
    popcount,
    reduced_graph,
    to_mask,
)


def _forward(out_masks, keep: int, s: int) -> int:
    seen = 1 << s
    frontier = seen
    while frontier:
        nxt = 0
        i = 0
        f = frontier
        while f:
            if f & 1:
                nxt |= out_masks[i]
            f >>= 1
            i += 1
        nxt &= keep & ~seen
        seen |= nxt
        frontier = nxt
    return seen


def _levels(out_masks, keep: int, s: int) -> list[int]:
    """BFS layers from ``s`` inside ``keep``, as masks."""
    seen = 1 << s
    layers = [seen]
    while True:
        nxt = 0
        for i in from_mask(layers[-1]):
            nxt |= out_masks[i]
        nxt &= keep & ~seen
        if not nxt:
            return layers
        seen |= nxt
        layers.append(nxt)


def reach_mask(G: DiGraph, fmask: int, i: int) -> int:
    keep = G.all_mask & ~fmask
    return _forward(G.in_masks, keep, i)


def reach_set(G: DiGraph, F, i: int) -> frozenset[int]:
    """Nodes with a directed path to ``i`` in the reduced graph ``G_F`` (``i`` included)."""
    fm = fault_mask(G, F)
    if fm >> i & 1:
        raise InvalidArgument(f"node {i} is in the fault set")
    return from_mask(reach_mask(G, fm, i))


def _source_mask(G: DiGraph, fmask: int) -> int:
    keep = G.all_mask & ~fmask
    found = 0
    for s in from_mask(keep):
        if _forward(G.out_masks, keep, s) == keep:
            found |= 1 << s
    return found


def sources(H: ReducedGraph) -> frozenset[int]:
    """Roots of directed rooted spanning trees of ``H``; empty iff there is none."""
    return from_mask(_source_mask(H.base, to_mask(H.removed)))


def ct_node_connectivity(G: DiGraph, k: int) -> bool:
    """True iff every reduced graph ``G_F`` with ``|F| <= k`` has a source.

    Fault sets range over proper subsets of the nodes only.
    """
    if k < 0:
        raise InvalidArgument(f"k must be >= 0, got {k}")
    return all(_source_mask(G, to_mask(F)) for F in fault_sets(G.n, k))


def height(H: ReducedGraph, r: int) -> int:
    """Minimum height over spanning trees of ``H`` rooted at ``r`` (the BFS eccentricity)."""
    keep = H.node_mask
    if not keep >> r & 1 or _forward(H.base.out_masks, keep, r) != keep:
        raise NotARoot(f"node {r} is not a source of the reduced graph")
    return len(_levels(H.base.out_masks, keep, r)) - 1


def fault_diameter(G: DiGraph, f: int) -> int:
    """Largest root height over all reduced graphs with at most ``f`` faults."""
    if f < 0:
        raise InvalidArgument(f"f must be >= 0, got {f}")
    d = 0
    for F in fault_sets(G.n, f):
        fm = to_mask(F)
        keep = G.all_mask & ~fm
        roots = _source_mask(G, fm)
        if not roots:
            raise InfeasibleGraph(f"G_F has no source for F={set(F)}; graph lacks {f} CT node connectivity")
        for s in from_mask(roots):
            d = max(d, len(_levels(G.out_masks, keep, s)) - 1)
    return d


def rounds_per_phase(G: DiGraph, f: int) -> int:
    """``fault_diameter`` when defined, else ``n - 1`` so infeasible graphs still run."""
    try:
        return max(1, fault_diameter(G, f))
    except InfeasibleGraph:
        return G.n - 1


def boundary(G: DiGraph, A, B) -> frozenset[int]:
    """Nodes of ``A`` with an outgoing link into ``B``."""
    bm = to_mask(B)
    return frozenset(i for i in A if G.out_masks[i] & bm)


def propagates(G: DiGraph, A, B, f: int) -> bool:
    A, B = frozenset(A), frozenset(B)
    if A & B:
        raise InvalidPartition(f"sets overlap on {sorted(A & B)}")
    return bool(B) and len(boundary(G, A, B)) >= f + 1


# ---------------------------------------------------------------------------
# witnesses
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Partition3:
    L: frozenset
    C: frozenset
    R: frozenset

    def __post_init__(self):
        for name in ("L", "C", "R"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))
        if self.L & self.C or self.L & self.R or self.C & self.R:
            raise InvalidPartition("partition blocks overlap")

    def covers(self, n: int) -> bool:
        return self.L | self.C | self.R == frozenset(range(n))


@dataclass(frozen=True)
class AsyncViolationWitness:
    """A partition on which neither side propagates; evaluates false in boolean context."""

    partition: Partition3
    O_L: frozenset
    O_R: frozenset

    def __bool__(self):
        return False

    def to_json(self):
        p = self.partition
        return {
            "L": sorted(p.L),
            "C": sorted(p.C),
            "R": sorted(p.R),
            "O_L": sorted(self.O_L),
            "O_R": sorted(self.O_R),
        }


@dataclass(frozen=True)
class CtViolationWitness:
    F: FaultSet
    S_i: frozenset
    S_j: frozenset
    Rem: frozenset

    def to_json(self):
        return {"F": sorted(self.F.members), "S_i": sorted(self.S_i), "S_j": sorted(self.S_j), "Rem": sorted(self.Rem)}


def decode_partition(n: int, code: int) -> Partition3:
    blocks = ([], [], [])
    for pos in range(n - 1, -1, -1):
        blocks[code % 3].append(pos)
        code //= 3
    return Partition3(*blocks)


def async_witness(G: DiGraph, partition: Partition3) -> AsyncViolationWitness:
    L, C, R = partition.L, partition.C, partition.R
    return AsyncViolationWitness(partition, boundary(G, C | R, L), boundary(G, L | C, R))


def async_condition(G: DiGraph, f: int) -> bool | AsyncViolationWitness:
    """``True`` when every 3-partition with ``L, R`` nonempty has ``L∪C ⇒ R`` or ``C∪R ⇒ L``.

    Otherwise returns the witness for the smallest failing partition code
    (node 0 is the most significant base-3 digit, labels L=0, C=1, R=2).
    """
    if f < 0:
        raise InvalidArgument(f"f must be >= 0, got {f}")
    code = int(kernels.first_failing_partition(np.array([G.out_masks], dtype=np.int64), f)[0])
    if code < 0:
        return True
    return async_witness(G, decode_partition(G.n, code))


def ct_violation_witness(G: DiGraph, f: int) -> CtViolationWitness | None:
    """Partition ``F, S_i, S_j, Rem`` certifying that ``f`` CT node connectivity fails.

    Picks the first failing ``F`` in (size, lexicographic) order, then the
    lexicographically smallest pair ``i < j`` with disjoint reverse-reachable sets.
    """
    for F in fault_sets(G.n, f):
        fm = to_mask(F)
        if _source_mask(G, fm):
            continue
        alive = [x for x in range(G.n) if not fm >> x & 1]
        back = {x: reach_mask(G, fm, x) for x in alive}
        for a_idx, i in enumerate(alive):
            for j in alive[a_idx + 1 :]:
                if back[i] & back[j] == 0:
                    rem = G.all_mask & ~fm & ~back[i] & ~back[j]
                    return CtViolationWitness(FaultSet(frozenset(F), f), from_mask(back[i]), from_mask(back[j]), from_mask(rem))
        raise AssertionError("reduced graph without a source must contain a disjoint pair")  # pragma: no cover
    return None


def ct_connectivity_many(out_masks: np.ndarray, k: int) -> np.ndarray:
    """Vectorised ``ct_node_connectivity`` over a ``(graphs, n)`` array of out-masks."""
    out_masks = np.asarray(out_masks, dtype=np.int64)
    n = out_masks.shape[1]
    return kernels.ct_connectivity(out_masks, kernels.subset_masks(n, k))


def async_condition_many(out_masks: np.ndarray, f: int) -> np.ndarray:
    """Smallest failing partition code per graph, ``-1`` where the condition holds."""
    return kernels.first_failing_partition(np.asarray(out_masks, dtype=np.int64), f)


__all__ = [
    "AsyncViolationWitness",
    "CtViolationWitness",
    "Partition3",
    "async_condition",
    "async_condition_many",
    "boundary",
    "ct_connectivity_many",
    "ct_node_connectivity",
    "ct_violation_witness",
    "fault_diameter",
    "height",
    "popcount",
    "propagates",
    "reach_set",
    "reduced_graph",
    "rounds_per_phase",
    "sources",
]
