"""Deliberately naive reference implementations used to cross-check the fast paths.

Everything here works on plain Python sets and adjacency matrices and shares
no code with :mod:`conditions` or :mod:`kernels`.
"""

from __future__ import annotations

import itertools

INF = float("inf")


def _edges_without(G, F):
    F = set(F)
    return {(u, v) for u, v in G.edges if u not in F and v not in F}


def transitive_closure(nodes, edges):
    """Warshall closure; ``reach[a][b]`` is true iff there is a path ``a -> b`` (or ``a == b``)."""
    nodes = sorted(nodes)
    reach = {a: {b: a == b or (a, b) in edges for b in nodes} for a in nodes}
    for k in nodes:
        for a in nodes:
            if reach[a][k]:
                row_k = reach[k]
                row_a = reach[a]
                for b in nodes:
                    if row_k[b]:
                        row_a[b] = True
    return reach


def has_rooted_spanning_tree(nodes, edges) -> bool:
    reach = transitive_closure(nodes, edges)
    return any(all(reach[r].values()) for r in reach)


def ct_connectivity(G, k: int) -> bool:
    """Every proper fault set of size at most ``k`` leaves a graph with a rooted spanning tree."""
    V = list(range(G.n))
    for size in range(min(k, G.n - 1) + 1):
        for F in itertools.combinations(V, size):
            keep = [x for x in V if x not in F]
            if not has_rooted_spanning_tree(keep, _edges_without(G, F)):
                return False
    return True


def reach_set(G, F, i):
    keep = [x for x in range(G.n) if x not in set(F)]
    reach = transitive_closure(keep, _edges_without(G, F))
    return frozenset(a for a in keep if reach[a][i])


def distances(nodes, edges):
    """Floyd-Warshall hop distances."""
    nodes = sorted(nodes)
    dist = {a: {b: 0 if a == b else (1 if (a, b) in edges else INF) for b in nodes} for a in nodes}
    for k in nodes:
        for a in nodes:
            for b in nodes:
                if dist[a][k] + dist[k][b] < dist[a][b]:
                    dist[a][b] = dist[a][k] + dist[k][b]
    return dist


def fault_diameter(G, f: int):
    """Largest eccentricity of any root over reduced graphs with ``|F| <= f``; ``None`` if some has no root."""
    V = list(range(G.n))
    best = 0
    for size in range(min(f, G.n - 1) + 1):
        for F in itertools.combinations(V, size):
            keep = [x for x in V if x not in F]
            dist = distances(keep, _edges_without(G, F))
            ecc = [max(dist[r].values()) for r in keep]
            roots = [e for e in ecc if e < INF]
            if not roots:
                return None
            best = max(best, max(roots))
    return best


def _propagates(G, A, B, f):
    if not B:
        return False
    gate = {u for u in A if any((u, b) in G.edges for b in B)}
    return len(gate) >= f + 1


def async_condition(G, f: int):
    """``True`` or the first failing ``(L, C, R)`` with node 0 as the leading label."""
    V = range(G.n)
    for labels in itertools.product("LCR", repeat=G.n):
        L = {x for x in V if labels[x] == "L"}
        C = {x for x in V if labels[x] == "C"}
        R = {x for x in V if labels[x] == "R"}
        if not L or not R:
            continue
        if not _propagates(G, L | C, R, f) and not _propagates(G, C | R, L, f):
            return (frozenset(L), frozenset(C), frozenset(R))
    return True


def condition_wait(G, f: int, i: int, heard):
    others = [x for x in range(G.n) if x != i]
    for size in range(min(f, len(others)) + 1):
        for F in itertools.combinations(others, size):
            if reach_set(G, F, i) <= set(heard):
                return True, frozenset(F)
    return False, None
