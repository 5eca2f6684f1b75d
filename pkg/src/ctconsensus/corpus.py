"""Enumeration of small digraphs, labelled or up to isomorphism.

A digraph on ``n`` nodes is encoded as an integer whose bit ``b`` marks the
``b``-th ordered pair of :func:`graph.pair_index`.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

from . import _accel
from ._accel import njit
from .graph import DiGraph, from_code, pair_index


@lru_cache(maxsize=None)
def _pair_permutations(n: int) -> np.ndarray:
    """``(n!, n(n-1))`` table: where each pair bit lands under each node permutation."""
    pairs = pair_index(n)
    index = {p: b for b, p in enumerate(pairs)}
    rows = []
    for perm in itertools.permutations(range(n)):
        rows.append([index[(perm[u], perm[v])] for u, v in pairs])
    return np.array(rows, dtype=np.int64)


@njit
def _orbit_reps_loops(n_bits, pmap):
    total = 1 << n_bits
    seen = np.zeros(total, dtype=np.bool_)
    reps = []
    for code in range(total):
        if seen[code]:
            continue
        reps.append(code)
        for p in range(pmap.shape[0]):
            img = 0
            for b in range(n_bits):
                if code >> b & 1:
                    img |= 1 << pmap[p, b]
            seen[img] = True
    return np.array(reps, dtype=np.int64)


def _orbit_reps_numpy(n_bits, pmap):
    total = 1 << n_bits
    seen = np.zeros(total, dtype=bool)
    weights = np.int64(1) << pmap  # (perms, bits)
    bit_of = np.int64(1) << np.arange(n_bits, dtype=np.int64)
    reps = []
    for code in range(total):
        if seen[code]:
            continue
        reps.append(code)
        on = (code & bit_of) != 0
        seen[weights[:, on].sum(axis=1)] = True
    return np.array(reps, dtype=np.int64)


def isomorphism_class_codes(n: int) -> np.ndarray:
    """Smallest code of every isomorphism class of digraphs on ``n`` nodes, ascending."""
    pmap = _pair_permutations(n)
    impl = _orbit_reps_loops if _accel.USE_NUMBA else _orbit_reps_numpy
    return impl(n * (n - 1), pmap)


def labelled_codes(n: int) -> np.ndarray:
    return np.arange(1 << (n * (n - 1)), dtype=np.int64)


def codes_to_out_masks(n: int, codes) -> np.ndarray:
    """``(len(codes), n)`` out-neighbour masks for a batch of graph codes."""
    codes = np.asarray(codes, dtype=np.int64)
    out = np.zeros((codes.size, n), dtype=np.int64)
    for b, (u, v) in enumerate(pair_index(n)):
        out[:, u] |= ((codes >> b) & 1) << v
    return out


@lru_cache(maxsize=None)
def from_code_cached(n: int, code: int) -> DiGraph:
    return from_code(n, code)


def graphs(n: int, codes) -> list[DiGraph]:
    return [from_code_cached(n, int(c)) for c in codes]
