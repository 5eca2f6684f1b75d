"""Directed graph type, fault sets, reduced graphs and the edge-list file format.

Node sets are handled internally as integer bitmasks (bit ``i`` set means node
``i`` is a member); the public API speaks ``frozenset``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from .errors import GraphFormatError, InvalidArgument, InvalidFaultSet


def to_mask(nodes: Iterable[int]) -> int:
    m = 0
    for i in nodes:
        m |= 1 << i
    return m


def from_mask(mask: int) -> frozenset[int]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return frozenset(out)


def popcount(mask: int) -> int:
    return bin(mask).count("1")


class DiGraph:
    """Static simple directed graph on nodes ``0..n-1``.

    Self-loops are never stored, but every neighborhood query includes the node
    itself: a node always hears its own broadcast.
    """

    __slots__ = ("n", "edges", "_out", "_in")

    def __init__(self, n: int, edges: Iterable[tuple[int, int]] = ()):
        if n < 2:
            raise InvalidArgument(f"graphs need at least 2 nodes, got n={n}")
        out = [0] * n
        inn = [0] * n
        seen = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if not (0 <= u < n and 0 <= v < n):
                raise InvalidArgument(f"edge ({u}, {v}) out of range for n={n}")
            if u == v:
                raise InvalidArgument(f"self-loop ({u}, {u}) is implicit and may not be stored")
            seen.add((u, v))
            out[u] |= 1 << v
            inn[v] |= 1 << u
        self.n = n
        self.edges = frozenset(seen)
        self._out = tuple(out)
        self._in = tuple(inn)

    # masks exclude the implicit self-loop
    @property
    def out_masks(self) -> tuple[int, ...]:
        return self._out

    @property
    def in_masks(self) -> tuple[int, ...]:
        return self._in

    @property
    def all_mask(self) -> int:
        return (1 << self.n) - 1

    def nodes(self) -> range:
        return range(self.n)

    def out_neighbors(self, i: int) -> frozenset[int]:
        """``N_i^+``, including ``i``."""
        return from_mask(self._out[i] | (1 << i))

    def in_neighbors(self, i: int) -> frozenset[int]:
        """``N_i^-``, including ``i``."""
        return from_mask(self._in[i] | (1 << i))

    def has_edge(self, u: int, v: int) -> bool:
        return bool(self._out[u] >> v & 1)

    def in_degree(self, i: int) -> int:
        return popcount(self._in[i])

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def __eq__(self, other):
        return isinstance(other, DiGraph) and self.n == other.n and self.edges == other.edges

    def __hash__(self):
        return hash((self.n, self.edges))

    def __repr__(self):
        return f"DiGraph(n={self.n}, edges={self.sorted_edges()})"

    # -- file format --------------------------------------------------------

    def dumps(self, comment: str | None = None) -> str:
        lines = []
        if comment:
            lines.extend(f"# {c}" for c in comment.splitlines())
        lines.append(f"n {self.n}")
        lines.extend(f"{u} {v}" for u, v in self.sorted_edges())
        return "\n".join(lines) + "\n"

    def save(self, path, comment: str | None = None) -> None:
        Path(path).write_text(self.dumps(comment), encoding="utf-8")


def loads(text: str) -> DiGraph:
    """Parse the edge-list format: ``n <count>`` then one ``<u> <v>`` per line; ``#`` comments."""
    n = None
    edges: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if n is None:
            if len(parts) != 2 or parts[0] != "n":
                raise GraphFormatError("expected header 'n <count>'", lineno)
            try:
                n = int(parts[1])
            except ValueError:
                raise GraphFormatError(f"node count {parts[1]!r} is not an integer", lineno) from None
            if n < 2:
                raise GraphFormatError(f"node count must be >= 2, got {n}", lineno)
            continue
        if len(parts) != 2:
            raise GraphFormatError(f"expected '<u> <v>', got {line!r}", lineno)
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphFormatError(f"non-integer endpoint in {line!r}", lineno) from None
        if not (0 <= u < n and 0 <= v < n):
            raise GraphFormatError(f"edge ({u}, {v}) out of range for n={n}", lineno)
        if u == v:
            raise GraphFormatError(f"explicit self-loop ({u}, {v})", lineno)
        if (u, v) in seen:
            raise GraphFormatError(f"duplicate edge ({u}, {v})", lineno)
        seen.add((u, v))
        edges.append((u, v))
    if n is None:
        raise GraphFormatError("missing 'n <count>' header")
    return DiGraph(n, edges)


def load(path) -> DiGraph:
    return loads(Path(path).read_text(encoding="utf-8"))


# -- fault sets and reduced graphs ------------------------------------------


@dataclass(frozen=True)
class FaultSet:
    members: frozenset
    bound: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "members", frozenset(int(x) for x in self.members))
        if self.bound is not None:
            if self.bound < 0:
                raise InvalidFaultSet(f"fault bound must be >= 0, got {self.bound}")
            if len(self.members) > self.bound:
                raise InvalidFaultSet(f"{len(self.members)} faults exceed bound f={self.bound}")

    def __iter__(self):
        return iter(sorted(self.members))

    def __len__(self):
        return len(self.members)


def fault_mask(G: DiGraph, F) -> int:
    members = F.members if isinstance(F, FaultSet) else frozenset(F)
    for x in members:
        if not (isinstance(x, int) and 0 <= x < G.n):
            raise InvalidFaultSet(f"fault set member {x!r} is not a node of a graph with n={G.n}")
    return to_mask(members)


@dataclass(frozen=True)
class ReducedGraph:
    """``G`` with the nodes of ``removed`` and every edge touching them deleted."""

    base: DiGraph
    removed: frozenset

    @property
    def node_mask(self) -> int:
        return self.base.all_mask & ~to_mask(self.removed)

    @property
    def nodes(self) -> frozenset[int]:
        return from_mask(self.node_mask)

    @property
    def out_masks(self) -> tuple[int, ...]:
        keep = self.node_mask
        return tuple(m & keep if keep >> i & 1 else 0 for i, m in enumerate(self.base.out_masks))

    @property
    def in_masks(self) -> tuple[int, ...]:
        keep = self.node_mask
        return tuple(m & keep if keep >> i & 1 else 0 for i, m in enumerate(self.base.in_masks))

    @property
    def edges(self) -> frozenset[tuple[int, int]]:
        gone = self.removed
        return frozenset((u, v) for u, v in self.base.edges if u not in gone and v not in gone)


def reduced_graph(G: DiGraph, F) -> ReducedGraph:
    fault_mask(G, F)
    members = F.members if isinstance(F, FaultSet) else frozenset(F)
    return ReducedGraph(G, frozenset(members))


def fault_sets(n: int, k: int, *, proper: bool = True) -> Iterator[tuple[int, ...]]:
    """All ``F`` with ``|F| <= k`` in (size, lexicographic) order.

    With ``proper`` the full node set is excluded, since a condition over an
    empty reduced graph is meaningless.
    """
    top = min(k, n - 1 if proper else n)
    for size in range(top + 1):
        yield from itertools.combinations(range(n), size)


# -- constructors -----------------------------------------------------------


def complete(n: int) -> DiGraph:
    return DiGraph(n, [(u, v) for u in range(n) for v in range(n) if u != v])


def cycle(n: int) -> DiGraph:
    return DiGraph(n, [(i, (i + 1) % n) for i in range(n)])


def empty(n: int) -> DiGraph:
    return DiGraph(n, [])


def pair_index(n: int) -> list[tuple[int, int]]:
    """Ordered node pairs backing the integer edge-code encoding of digraphs."""
    return [(u, v) for u in range(n) for v in range(n) if u != v]


def from_code(n: int, code: int) -> DiGraph:
    pairs = pair_index(n)
    return DiGraph(n, [p for b, p in enumerate(pairs) if code >> b & 1])


def to_code(G: DiGraph) -> int:
    index = {p: b for b, p in enumerate(pair_index(G.n))}
    code = 0
    for e in G.edges:
        code |= 1 << index[e]
    return code
