"""Hot inner loops, each in two flavours.

Every kernel exists as an explicit-loop implementation compiled with numba
(``*_loops``) and as an independent numpy-vectorised implementation
(``*_numpy``).  The module-level names dispatch on :data:`_accel.USE_NUMBA`;
:func:`backend` returns either set explicitly so tests can cross-check them.

Conventions shared by all kernels:

* node sets are int64 bitmasks, ``out_masks[u]`` excludes the implicit self-loop;
* a crash at global round ``g`` (0-based) means the node delivers round ``g``'s
  broadcast only to ``crash_mask`` (plus itself) and is dead from then on;
  ``crash_round >= total rounds`` means the node never crashes;
* synchronous phase ``p`` (1-based) is a Min phase iff ``p % 2 == 0``.
"""

from __future__ import annotations

import types

import numpy as np

from . import _accel
from ._accel import njit

ALL_ONES = np.uint64(0xFFFFFFFFFFFFFFFF)

ACTIVE = 0
CRASHED = 1
EXITED = 2


# ---------------------------------------------------------------------------
# reachability / CT node connectivity over batches of graphs
# ---------------------------------------------------------------------------


def _subset_masks(n, k):
    """Masks of all proper subsets of size <= k, in (size, lexicographic) order."""
    from itertools import combinations

    out = []
    for size in range(min(k, n - 1) + 1):
        for c in combinations(range(n), size):
            m = 0
            for x in c:
                m |= 1 << x
            out.append(m)
    return np.array(out, dtype=np.int64)


@njit
def _ct_connectivity_loops(out_masks, subsets):
    G, n = out_masks.shape
    result = np.ones(G, dtype=np.bool_)
    reach = np.zeros(n, dtype=np.int64)
    full = (1 << n) - 1
    for g in range(G):
        for si in range(subsets.shape[0]):
            keep = full & ~subsets[si]
            for i in range(n):
                if keep >> i & 1:
                    reach[i] = (out_masks[g, i] & keep) | (1 << i)
                else:
                    reach[i] = 0
            changed = True
            while changed:
                changed = False
                for i in range(n):
                    r = reach[i]
                    acc = r
                    for j in range(n):
                        if r >> j & 1:
                            acc |= reach[j]
                    if acc != r:
                        reach[i] = acc
                        changed = True
            found = False
            for i in range(n):
                if keep >> i & 1 and reach[i] == keep:
                    found = True
                    break
            if not found:
                result[g] = False
                break
    return result


def _ct_connectivity_numpy(out_masks, subsets):
    out_masks = np.asarray(out_masks, dtype=np.int64)
    G, n = out_masks.shape
    full = (1 << n) - 1
    bits = np.int64(1) << np.arange(n, dtype=np.int64)
    result = np.ones(G, dtype=bool)
    for F in subsets:
        keep = np.int64(full & ~int(F))
        alive = (keep & bits) != 0
        reach = np.where(alive[None, :], (out_masks & keep) | bits[None, :], 0)
        # squaring: after ceil(log2 n)+1 rounds every path length is covered
        for _ in range(n.bit_length() + 1):
            nxt = reach.copy()
            for j in range(n):
                has_j = (reach & bits[j]) != 0
                nxt |= np.where(has_j, reach[:, j : j + 1], 0)
            reach = nxt
        has_source = ((reach == keep) & alive[None, :]).any(axis=1)
        result &= has_source
    return result


# ---------------------------------------------------------------------------
# asynchronous partition condition
# ---------------------------------------------------------------------------


@njit
def _first_failing_partition_loops(out_masks, f):
    """Per graph, the smallest base-3 partition code violating the condition, or -1.

    Digit of node ``i`` is ``label // 3**(n-1-i) % 3`` with 0 = L, 1 = C, 2 = R.
    """
    G, n = out_masks.shape
    total = 1
    for _ in range(n):
        total *= 3
    result = np.full(G, -1, dtype=np.int64)
    labels = np.zeros(n, dtype=np.int64)
    for g in range(G):
        for code in range(total):
            c = code
            L = 0
            R = 0
            for pos in range(n - 1, -1, -1):
                labels[pos] = c % 3
                c //= 3
            for i in range(n):
                if labels[i] == 0:
                    L |= 1 << i
                elif labels[i] == 2:
                    R |= 1 << i
            if L == 0 or R == 0:
                continue
            into_r = 0
            into_l = 0
            for i in range(n):
                m = out_masks[g, i]
                if labels[i] != 2 and m & R:
                    into_r += 1
                if labels[i] != 0 and m & L:
                    into_l += 1
            if into_r < f + 1 and into_l < f + 1:
                result[g] = code
                break
    return result


_PARTITION_CACHE: dict = {}


def _partition_tables(n):
    if n not in _PARTITION_CACHE:
        codes = np.arange(3**n, dtype=np.int64)
        weights = 3 ** np.arange(n - 1, -1, -1, dtype=np.int64)
        labels = (codes[:, None] // weights[None, :]) % 3
        bits = np.int64(1) << np.arange(n, dtype=np.int64)
        L = ((labels == 0) * bits).sum(axis=1)
        R = ((labels == 2) * bits).sum(axis=1)
        _PARTITION_CACHE[n] = (labels, L, R)
    return _PARTITION_CACHE[n]


def _first_failing_partition_numpy(out_masks, f):
    out_masks = np.asarray(out_masks, dtype=np.int64)
    G, n = out_masks.shape
    labels, L, R = _partition_tables(n)
    valid = (L != 0) & (R != 0)
    result = np.full(G, -1, dtype=np.int64)
    for g in range(G):
        m = out_masks[g]
        into_r = ((labels != 2) & ((m[None, :] & R[:, None]) != 0)).sum(axis=1)
        into_l = ((labels != 0) & ((m[None, :] & L[:, None]) != 0)).sum(axis=1)
        bad = valid & (into_r < f + 1) & (into_l < f + 1)
        hits = np.flatnonzero(bad)
        if hits.size:
            result[g] = hits[0]
    return result


# ---------------------------------------------------------------------------
# synchronous Min-Max on bit planes
# ---------------------------------------------------------------------------


@njit
def _minmax_bits_loops(out_masks, crash_round, crash_mask, v0, n_phases, d):
    S, n = v0.shape
    R = n_phases * d
    hist = np.zeros((R + 1, S, n), dtype=np.uint64)
    all_ones = np.uint64(0xFFFFFFFFFFFFFFFF)
    for s in range(S):
        v = v0[s].copy()
        hist[0, s] = v
        new = np.zeros(n, dtype=np.uint64)
        for g in range(R):
            is_min = ((g // d) + 1) % 2 == 0
            for w in range(n):
                if crash_round[s, w] <= g:
                    new[w] = v[w]
                    continue
                acc = all_ones if is_min else np.uint64(0)
                for u in range(n):
                    cr = crash_round[s, u]
                    if cr < g:
                        continue
                    if u == w:
                        hit = True
                    elif cr == g:
                        hit = (crash_mask[s, u] >> w) & 1 == 1
                    else:
                        hit = (out_masks[u] >> w) & 1 == 1
                    if hit:
                        if is_min:
                            acc &= v[u]
                        else:
                            acc |= v[u]
                new[w] = acc
            for w in range(n):
                v[w] = new[w]
            hist[g + 1, s] = v
    return hist


def _adjacency_with_self(out_masks, n):
    bits = np.int64(1) << np.arange(n, dtype=np.int64)
    A = (np.asarray(out_masks, dtype=np.int64)[:, None] & bits[None, :]) != 0
    A[np.arange(n), np.arange(n)] = True
    return A


def _crash_matrices(crash_mask, n):
    bits = np.int64(1) << np.arange(n, dtype=np.int64)
    CM = (np.asarray(crash_mask, dtype=np.int64)[:, :, None] & bits[None, None, :]) != 0
    CM[:, np.arange(n), np.arange(n)] = True
    return CM


def _deliveries_numpy(A, CM, crash_round, g, sender_ok):
    """``deliver[b, u, w]`` for round ``g``; ``sender_ok`` masks out silent senders."""
    normal = (crash_round > g)[:, :, None] & A[None, :, :]
    partial = (crash_round == g)[:, :, None] & CM
    return (normal | partial) & sender_ok[:, :, None]


def _minmax_bits_numpy(out_masks, crash_round, crash_mask, v0, n_phases, d):
    v = np.asarray(v0, dtype=np.uint64).copy()
    crash_round = np.asarray(crash_round, dtype=np.int64)
    S, n = v.shape
    R = n_phases * d
    A = _adjacency_with_self(out_masks, n)
    CM = _crash_matrices(crash_mask, n)
    hist = np.zeros((R + 1, S, n), dtype=np.uint64)
    hist[0] = v
    for g in range(R):
        is_min = ((g // d) + 1) % 2 == 0
        deliver = _deliveries_numpy(A, CM, crash_round, g, crash_round >= g)
        if is_min:
            agg = np.bitwise_and.reduce(np.where(deliver, v[:, :, None], ALL_ONES), axis=1)
        else:
            agg = np.bitwise_or.reduce(np.where(deliver, v[:, :, None], np.uint64(0)), axis=1)
        v = np.where(crash_round > g, agg, v)
        hist[g + 1] = v
    return hist


# ---------------------------------------------------------------------------
# synchronous MVC
# ---------------------------------------------------------------------------


@njit
def _mvc_loops(out_masks, crash_round, crash_mask, inputs, K, n_inner, d):
    B, n = inputs.shape
    PD = n_inner * d
    v_hist = np.zeros((K + 1, PD + 1, B, n), dtype=np.int8)
    t_hist = np.zeros((K + 1, PD + 1, B, n), dtype=np.int64)
    st_hist = np.zeros((K + 1, PD + 1, B, n), dtype=np.int8)
    outputs = np.full((B, n), -1, dtype=np.int64)
    for b in range(B):
        t = inputs[b].copy()
        v = np.zeros(n, dtype=np.int8)
        exited = np.zeros(n, dtype=np.bool_)
        new_v = np.zeros(n, dtype=np.int8)
        new_t = np.zeros(n, dtype=np.int64)
        for l in range(K + 1):
            base = l * PD
            for i in range(n):
                if not exited[i] and crash_round[b, i] >= base:
                    v[i] = 0 if t[i] == l else 1
            for i in range(n):
                v_hist[l, 0, b, i] = v[i]
                t_hist[l, 0, b, i] = t[i]
                if exited[i]:
                    st_hist[l, 0, b, i] = 2
                elif crash_round[b, i] < base:
                    st_hist[l, 0, b, i] = 1
            for k in range(PD):
                g = base + k
                is_min = ((k // d) + 1) % 2 == 0
                for w in range(n):
                    new_v[w] = v[w]
                    new_t[w] = t[w]
                    if exited[w] or crash_round[b, w] <= g:
                        continue
                    acc = 1 if is_min else 0
                    tmin = K + 1
                    for u in range(n):
                        cr = crash_round[b, u]
                        if exited[u] or cr < g:
                            continue
                        if u == w:
                            hit = True
                        elif cr == g:
                            hit = (crash_mask[b, u] >> w) & 1 == 1
                        else:
                            hit = (out_masks[u] >> w) & 1 == 1
                        if hit:
                            if is_min:
                                if v[u] < acc:
                                    acc = v[u]
                            elif v[u] > acc:
                                acc = v[u]
                            if t[u] > l and t[u] < tmin:
                                tmin = t[u]
                    new_v[w] = acc
                    if tmin <= K:
                        new_t[w] = tmin
                for w in range(n):
                    v[w] = new_v[w]
                    t[w] = new_t[w]
                    v_hist[l, k + 1, b, w] = v[w]
                    t_hist[l, k + 1, b, w] = t[w]
                    if exited[w]:
                        st_hist[l, k + 1, b, w] = 2
                    elif crash_round[b, w] <= g:
                        st_hist[l, k + 1, b, w] = 1
            last = base + PD - 1
            for i in range(n):
                if not exited[i] and crash_round[b, i] > last and v[i] == 0:
                    exited[i] = True
                    outputs[b, i] = l
        final = (K + 1) * PD
        for i in range(n):
            if not exited[i] and crash_round[b, i] >= final:
                outputs[b, i] = K
    return v_hist, t_hist, st_hist, outputs


def _mvc_numpy(out_masks, crash_round, crash_mask, inputs, K, n_inner, d):
    inputs = np.asarray(inputs, dtype=np.int64)
    crash_round = np.asarray(crash_round, dtype=np.int64)
    B, n = inputs.shape
    PD = n_inner * d
    A = _adjacency_with_self(out_masks, n)
    CM = _crash_matrices(crash_mask, n)
    v_hist = np.zeros((K + 1, PD + 1, B, n), dtype=np.int8)
    t_hist = np.zeros((K + 1, PD + 1, B, n), dtype=np.int64)
    st_hist = np.zeros((K + 1, PD + 1, B, n), dtype=np.int8)
    outputs = np.full((B, n), -1, dtype=np.int64)
    t = inputs.copy()
    v = np.zeros((B, n), dtype=np.int8)
    exited = np.zeros((B, n), dtype=bool)

    def status(g_done):
        st = np.where(crash_round < g_done, CRASHED, ACTIVE)
        return np.where(exited, EXITED, st).astype(np.int8)

    for l in range(K + 1):
        base = l * PD
        running = ~exited & (crash_round >= base)
        v = np.where(running, np.where(t == l, 0, 1), v).astype(np.int8)
        v_hist[l, 0], t_hist[l, 0], st_hist[l, 0] = v, t, status(base)
        for k in range(PD):
            g = base + k
            is_min = ((k // d) + 1) % 2 == 0
            deliver = _deliveries_numpy(A, CM, crash_round, g, ~exited & (crash_round >= g))
            if is_min:
                agg = np.where(deliver, v[:, :, None], 1).min(axis=1)
            else:
                agg = np.where(deliver, v[:, :, None], 0).max(axis=1)
            cand = np.where(deliver & (t > l)[:, :, None], t[:, :, None], K + 1).min(axis=1)
            upd = ~exited & (crash_round > g)
            v = np.where(upd, agg, v).astype(np.int8)
            t = np.where(upd & (cand <= K), cand, t)
            v_hist[l, k + 1], t_hist[l, k + 1], st_hist[l, k + 1] = v, t, status(g + 1)
        done = ~exited & (crash_round > base + PD - 1) & (v == 0)
        outputs[done] = l
        exited |= done
    final = (K + 1) * PD
    outputs[~exited & (crash_round >= final)] = K
    return v_hist, t_hist, st_hist, outputs


# ---------------------------------------------------------------------------
# fixed iterative algorithms over batches of transition tables
# ---------------------------------------------------------------------------


@njit
def _fixed_iterative_loops(in_masks, live_mask, luts, x0, steps):
    """Advance every table ``steps`` iterations from ``x0``; return (state, successor).

    ``luts[t, size, ones]`` is table ``t``'s output for a multiset with ``ones``
    ones among ``size`` values; entries ``< 0`` are missing.
    """
    T = luts.shape[0]
    n = x0.shape[0]
    states = np.zeros((T, n), dtype=np.int8)
    succ = np.zeros((T, n), dtype=np.int8)
    missing = np.zeros(T, dtype=np.bool_)
    x = np.zeros(n, dtype=np.int8)
    y = np.zeros(n, dtype=np.int8)
    for tb in range(T):
        for i in range(n):
            x[i] = x0[i]
        for step in range(steps + 1):
            for i in range(n):
                if not (live_mask >> i & 1):
                    y[i] = x[i]
                    continue
                size = 1
                ones = x[i]
                srcs = in_masks[i] & live_mask
                for j in range(n):
                    if srcs >> j & 1:
                        size += 1
                        ones += x[j]
                if size >= luts.shape[1]:
                    missing[tb] = True
                    y[i] = x[i]
                    continue
                z = luts[tb, size, ones]
                if z < 0:
                    missing[tb] = True
                    z = x[i]
                y[i] = z
            if step == steps:
                for i in range(n):
                    states[tb, i] = x[i]
                    succ[tb, i] = y[i]
            else:
                for i in range(n):
                    x[i] = y[i]
    return states, succ, missing


def _fixed_iterative_numpy(in_masks, live_mask, luts, x0, steps):
    luts = np.asarray(luts)
    T = luts.shape[0]
    n = len(x0)
    bits = np.int64(1) << np.arange(n, dtype=np.int64)
    live = (live_mask & bits) != 0
    M = (np.asarray(in_masks, dtype=np.int64)[:, None] & bits[None, :]) != 0
    M &= live[None, :]
    M[np.arange(n), np.arange(n)] = True
    sizes = M.sum(axis=1)
    x = np.tile(np.asarray(x0, dtype=np.int8), (T, 1))
    rows = np.arange(T)
    missing = np.zeros(T, dtype=bool)

    def step(x):
        y = x.copy()
        ones = x.astype(np.int64) @ M.T.astype(np.int64)
        for i in np.flatnonzero(live):
            if sizes[i] >= luts.shape[1]:
                missing[:] = True
                continue
            z = luts[rows, sizes[i], ones[:, i]]
            missing[z < 0] = True
            y[:, i] = np.where(z < 0, x[:, i], z)
        return y

    for _ in range(steps):
        x = step(x)
    return x, step(x), missing


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def _namespace(name, impls):
    ns = types.SimpleNamespace(name=name, **impls)
    ns.subset_masks = _subset_masks
    return ns


NUMBA = _namespace(
    "numba",
    dict(
        ct_connectivity=_ct_connectivity_loops,
        first_failing_partition=_first_failing_partition_loops,
        minmax_bits=_minmax_bits_loops,
        mvc=_mvc_loops,
        fixed_iterative=_fixed_iterative_loops,
    ),
)
NUMPY = _namespace(
    "numpy",
    dict(
        ct_connectivity=_ct_connectivity_numpy,
        first_failing_partition=_first_failing_partition_numpy,
        minmax_bits=_minmax_bits_numpy,
        mvc=_mvc_numpy,
        fixed_iterative=_fixed_iterative_numpy,
    ),
)


def backend(name: str | None = None):
    """Kernel namespace for ``"numba"``, ``"numpy"`` or (``None``) the active default."""
    if name is None:
        name = "numba" if _accel.USE_NUMBA else "numpy"
    if name == "numba":
        if not _accel.HAVE_NUMBA:
            raise RuntimeError("numba is not installed")
        return NUMBA
    if name == "numpy":
        return NUMPY
    raise ValueError(f"unknown kernel backend {name!r}")


def subset_masks(n: int, k: int) -> np.ndarray:
    return _subset_masks(n, k)


def active() -> str:
    return backend().name


def ct_connectivity(out_masks, subsets):
    return backend().ct_connectivity(np.ascontiguousarray(out_masks, dtype=np.int64), subsets)


def first_failing_partition(out_masks, f):
    return backend().first_failing_partition(np.ascontiguousarray(out_masks, dtype=np.int64), int(f))


def minmax_bits(out_masks, crash_round, crash_mask, v0, n_phases, d):
    return backend().minmax_bits(
        np.ascontiguousarray(out_masks, dtype=np.int64),
        np.ascontiguousarray(crash_round, dtype=np.int64),
        np.ascontiguousarray(crash_mask, dtype=np.int64),
        np.ascontiguousarray(v0, dtype=np.uint64),
        int(n_phases),
        int(d),
    )


def mvc(out_masks, crash_round, crash_mask, inputs, K, n_inner, d):
    return backend().mvc(
        np.ascontiguousarray(out_masks, dtype=np.int64),
        np.ascontiguousarray(crash_round, dtype=np.int64),
        np.ascontiguousarray(crash_mask, dtype=np.int64),
        np.ascontiguousarray(inputs, dtype=np.int64),
        int(K),
        int(n_inner),
        int(d),
    )


def fixed_iterative(in_masks, live_mask, luts, x0, steps):
    return backend().fixed_iterative(
        np.ascontiguousarray(in_masks, dtype=np.int64),
        int(live_mask),
        np.ascontiguousarray(luts, dtype=np.int8),
        np.ascontiguousarray(x0, dtype=np.int8),
        int(steps),
    )
