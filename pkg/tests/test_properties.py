from fractions import Fraction

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings, strategies as st

from ctconsensus import oracles
from ctconsensus.async_engine import (
    DelayPolicy,
    WaConfig,
    check_contraction,
    check_epsilon_verdict,
    check_heard_intersection,
    p_end_bound,
    run_wa,
)
from ctconsensus.conditions import async_condition, ct_node_connectivity, fault_diameter, reach_set, sources
from ctconsensus.graph import from_code, reduced_graph, to_code
from ctconsensus.impossibility import BinaryMultiset, TransitionTable, mixed_multisets
from ctconsensus.suites import async_corpus, ct_corpus, random_crash
from ctconsensus.sync_engine import CrashSchedule, check_verdict, random_schedule_arrays, run_min_max, run_mvc

SETTINGS = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@st.composite
def digraphs(draw, n_min=2, n_max=5):
    n = draw(st.integers(n_min, n_max))
    code = draw(st.integers(0, (1 << (n * (n - 1))) - 1))
    return from_code(n, code)


_CT1 = [g for _, _, g in ct_corpus(5, 1)]
_ASYNC1 = [g for _, _, g in async_corpus(5, 1, True)]


@SETTINGS
@given(digraphs())
def test_code_roundtrip(G):
    assert from_code(G.n, to_code(G)) == G


@SETTINGS
@given(digraphs(), st.integers(0, 3))
def test_ct_connectivity_matches_oracle(G, k):
    assert ct_node_connectivity(G, k) == oracles.ct_connectivity(G, k)


@SETTINGS
@given(digraphs(), st.integers(0, 2))
def test_ct_connectivity_monotone_in_k(G, k):
    if ct_node_connectivity(G, k + 1):
        assert ct_node_connectivity(G, k)


@SETTINGS
@given(digraphs(), st.integers(0, 1))
def test_fault_diameter_matches_oracle(G, f):
    expected = oracles.fault_diameter(G, f)
    assume(expected is not None)
    assert fault_diameter(G, f) == expected


@SETTINGS
@given(digraphs(n_min=2, n_max=4), st.integers(0, 1))
def test_async_condition_matches_oracle(G, f):
    fast = async_condition(G, f)
    slow = oracles.async_condition(G, f)
    if slow is True:
        assert fast is True
    else:
        p = fast.partition
        assert (p.L, p.C, p.R) == slow


@SETTINGS
@given(digraphs(n_min=2), st.data())
def test_reduced_graph_drops_only_faulty_nodes(G, data):
    F = data.draw(st.sets(st.integers(0, G.n - 1), max_size=G.n - 1))
    H = reduced_graph(G, F)
    assert H.nodes == frozenset(range(G.n)) - F
    assert H.edges == {(u, v) for u, v in G.edges if u not in F and v not in F}
    for r in sources(H):
        for i in H.nodes:
            assert r in reach_set(G, F, i)
            assert reach_set(G, F, i) == oracles.reach_set(G, F, i)


@SETTINGS
@given(st.sampled_from(_CT1), st.data())
def test_min_max_on_feasible_graphs(G, data):
    inputs = data.draw(st.lists(st.integers(0, 1), min_size=G.n, max_size=G.n))
    seed = data.draw(st.integers(0, 2**32 - 1))
    d = fault_diameter(G, 1)
    cr, cm = random_schedule_arrays(G, 1, max(d, 1), 4, np.random.default_rng(seed), 1)
    sched = CrashSchedule.from_arrays(cr[0], cm[0], max(d, 1), 1)
    outputs, trace = run_min_max(G, 1, inputs, sched)
    assert check_verdict(trace, inputs, outputs).ok


@SETTINGS
@given(st.sampled_from(_CT1), st.integers(1, 3), st.data())
def test_mvc_on_feasible_graphs(G, K, data):
    inputs = data.draw(st.lists(st.integers(0, K), min_size=G.n, max_size=G.n))
    seed = data.draw(st.integers(0, 2**32 - 1))
    d = max(fault_diameter(G, 1), 1)
    cr, cm = random_schedule_arrays(G, 1, d, (K + 1) * 4, np.random.default_rng(seed), 1)
    sched = CrashSchedule.from_arrays(cr[0], cm[0], d, 1)
    outputs, trace = run_mvc(G, 1, K, inputs, sched)
    assert check_verdict(trace, inputs, outputs).ok


fractions = st.fractions(min_value=-4, max_value=4, max_denominator=16)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(_ASYNC1), st.data())
def test_wa_never_widens_the_range(G, data):
    inputs = data.draw(st.lists(fractions, min_size=G.n, max_size=G.n))
    seed = data.draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    crash = random_crash(G, rng)
    eps = Fraction(1, 64)
    outputs, trace = run_wa(G, 1, inputs, DelayPolicy(seed=seed), [crash], WaConfig(eps))
    assert check_epsilon_verdict(outputs, inputs, eps, trace.fault_free).ok
    assert check_heard_intersection(trace) == []
    ranges = trace.phase_ranges()
    assert all(b <= a for a, b in zip(ranges, ranges[1:]))
    assert check_contraction(trace) == []


@SETTINGS
@given(st.integers(2, 8), fractions, fractions, st.fractions(min_value=Fraction(1, 1000), max_value=2))
def test_p_end_bound_is_minimal(n, a, b, eps):
    M, m = max(a, b), min(a, b)
    P = p_end_bound(n, 1, M, m, eps)
    shrink = Fraction(n - 1, n)
    assert shrink**P * (M - m) <= eps
    if P > 1:
        assert shrink ** (P - 1) * (M - m) > eps


@SETTINGS
@given(st.integers(2, 6), st.data())
def test_table_index_roundtrip(max_size, data):
    mixed = mixed_multisets(max_size)
    index = data.draw(st.integers(0, (1 << len(mixed)) - 1))
    Z = TransitionTable(max_size, index)
    rebuilt = sum(Z(ms) << b for b, ms in enumerate(mixed))
    assert rebuilt == index
    lut = Z.lut()
    for ms, bit in Z.entries.items():
        assert lut[ms.size, ms.ones] == bit
    assert Z(BinaryMultiset(0, max_size)) == 1 and Z(BinaryMultiset(max_size, 0)) == 0
