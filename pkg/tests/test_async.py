import dataclasses
import itertools
from fractions import Fraction

import numpy as np
import pytest

from ctconsensus import async_engine, corpus, oracles
from ctconsensus.async_engine import (
    AsyncCrash,
    AverageRecord,
    DelayPolicy,
    WaConfig,
    check_contraction,
    check_epsilon_verdict,
    check_fifo,
    check_heard_intersection,
    check_intermediate_validity,
    condition_wait,
    gatekeeper_scenario,
    p_end_bound,
    run_wa,
)
from ctconsensus.conditions import async_condition
from ctconsensus.errors import InvalidArgument
from ctconsensus.graph import DiGraph, complete

K2, K3, K4 = complete(2), complete(3), complete(4)
EPS = Fraction(1, 1000)


def test_condition_wait_examples():
    assert condition_wait(K3, 1, 0, {0, 1}) == (True, frozenset({2}))
    assert condition_wait(K3, 1, 0, {0}) == (False, None)
    G = DiGraph(4, [(1, 0), (2, 0), (3, 1)])
    assert condition_wait(G, 2, 0, {0}) == (True, frozenset({1, 2}))
    with pytest.raises(InvalidArgument):
        condition_wait(K3, 1, 0, {1})


def test_condition_wait_prefers_smaller_then_lexicographic():
    assert condition_wait(K3, 2, 0, {0, 1, 2}) == (True, frozenset())
    assert condition_wait(K4, 2, 0, {0, 3}) == (True, frozenset({1, 2}))


def test_condition_wait_matches_oracle():
    for G in corpus.graphs(3, corpus.labelled_codes(3)):
        for f in (0, 1, 2):
            for i in range(3):
                others = [x for x in range(3) if x != i]
                for k in range(3):
                    for extra in itertools.combinations(others, k):
                        heard = {i, *extra}
                        assert condition_wait(G, f, i, heard) == oracles.condition_wait(G, f, i, heard)


def test_p_end_bound_examples():
    assert p_end_bound(3, 1, 5, 5, Fraction(1, 10)) == 1
    assert p_end_bound(3, 1, 1, 0, Fraction(1, 2)) == 2
    assert p_end_bound(4, 1, Fraction(1, 2), 0, 1) == 1
    assert p_end_bound(5, 1, 1, 0, EPS) == 31
    with pytest.raises(InvalidArgument):
        p_end_bound(3, 1, 1, 0, 0)
    with pytest.raises(InvalidArgument):
        p_end_bound(3, 1, 0, 1, EPS)


def test_wa_unanimous_inputs_stay_put():
    for seed in range(3):
        crash = AsyncCrash(seed, seed * 3, {(seed + 1) % 3})
        outputs, trace = run_wa(K3, 1, [0, 0, 0], DelayPolicy(seed=seed), [crash], WaConfig(EPS))
        assert all(o == 0 for o in outputs if o is not None)
        assert outputs.count(None) == 1


def test_wa_k4_quarter_split():
    inputs = [0, 0, 1, 1]
    outputs, trace = run_wa(K4, 1, inputs, DelayPolicy("uniform-random", seed=4), (), WaConfig(Fraction(1, 8)))
    v = check_epsilon_verdict(outputs, inputs, Fraction(1, 8), trace.fault_free)
    assert v.ok
    assert trace.p_end == p_end_bound(4, 1, 1, 0, Fraction(1, 8)) == 8
    assert check_heard_intersection(trace) == []
    assert check_contraction(trace) == []


def test_wa_k2_gatekeeper_split():
    w = async_condition(K2, 1)
    inputs, policy = gatekeeper_scenario(K2, w, EPS)
    assert inputs == [0, 2 * EPS]
    assert policy.delayed_edges == {(0, 1), (1, 0)}
    outputs, trace = run_wa(K2, 1, inputs, policy, (), WaConfig(EPS))
    assert outputs == [0, 2 * EPS]
    v = check_epsilon_verdict(outputs, inputs, EPS, trace.fault_free)
    assert not v.agreement and v.validity and v.termination


def test_epsilon_verdict_examples():
    assert check_epsilon_verdict([Fraction(1, 3)] * 3, [0, 1, 1], Fraction(1, 10**9)).ok
    v = check_epsilon_verdict([0, 2 * EPS], [0, 2 * EPS], EPS)
    assert not v.agreement
    v = check_epsilon_verdict([Fraction(-1, 10), 0], [0, 1], EPS)
    assert v.agreement is False or not v.validity
    assert not v.validity
    v = check_epsilon_verdict([0, None], [0, 1], EPS, fault_free=[0, 1])
    assert not v.termination


def _record(node, phase, heard):
    return AverageRecord(node, phase, 0, frozenset(heard), (Fraction(0),), Fraction(0), frozenset())


def test_heard_intersection_negative_control():
    _, trace = run_wa(K3, 1, [0, 1, 1], DelayPolicy(seed=1), (), WaConfig(Fraction(1, 4)))
    assert check_heard_intersection(trace) == []
    forged = dataclasses.replace(trace, averages=[_record(0, 1, {0}), _record(1, 1, {1}), _record(2, 1, {1, 2})])
    assert check_heard_intersection(forged) == [(1, 0, 1), (1, 0, 2)]
    alone = dataclasses.replace(trace, averages=[_record(0, 1, {0})])
    assert check_heard_intersection(alone) == []


def test_wa_is_deterministic():
    args = (complete(5), 1, [0, 1, 2, 3, 4], DelayPolicy(seed=12), [AsyncCrash(2, 40, {0})], WaConfig(EPS))
    a = run_wa(*args)
    b = run_wa(*args)
    assert a[0] == b[0]
    assert a[1].to_csv() == b[1].to_csv()
    c = run_wa(complete(5), 1, [0, 1, 2, 3, 4], DelayPolicy(seed=13), [AsyncCrash(2, 40, {0})], WaConfig(EPS))
    assert c[1].to_csv() != a[1].to_csv()


def test_partial_send_on_crashing_event():
    # event 0 is node 0's start: its phase-1 broadcast reaches only node 2
    outputs, trace = run_wa(K3, 1, [0, 1, 1], DelayPolicy("fifo-fixed", low=1), [AsyncCrash(0, 0, {2})], WaConfig(EPS))
    sends = [(s, d) for _, kind, s, d, _ in trace.events if kind == "send" and s == 0]
    assert sends == [(0, 2)]
    assert outputs[0] is None and trace.crashed == {0}
    assert outputs[1] == outputs[2]


def test_crash_of_bystander_keeps_in_flight_messages():
    outputs, trace = run_wa(K3, 1, [0, 1, 1], DelayPolicy("fifo-fixed", low=5), [AsyncCrash(0, 1, ())], WaConfig(EPS))
    delivered_from_0 = [e for e in trace.events if e[1] == "deliver" and e[2] == 0]
    assert delivered_from_0, "node 0's first broadcast was already in flight"
    assert all(k != "send" or s != 0 or t == 0 for t, k, s, _, _ in trace.events)
    assert trace.crashed == {0}
    assert check_epsilon_verdict(outputs, [0, 1, 1], EPS, trace.fault_free).ok


def test_crash_after_quiescence_never_fires():
    _, trace = run_wa(K3, 1, [0, 1, 1], DelayPolicy(seed=0), [AsyncCrash(1, 10**9, ())], WaConfig(Fraction(1, 2)))
    assert trace.crashed == frozenset()


def test_wa_rejects_too_many_crashes():
    with pytest.raises(InvalidArgument):
        run_wa(K3, 1, [0, 1, 1], crashes=[AsyncCrash(0, 1), AsyncCrash(1, 2)])
    with pytest.raises(InvalidArgument):
        run_wa(K3, 1, [0, 1])


def test_starvation_is_reported(monkeypatch):
    real = async_engine.WaitOracle.check

    def never_for_two(self, i, heard):
        return None if i == 2 else real(self, i, heard)

    monkeypatch.setattr(async_engine.WaitOracle, "check", never_for_two)
    outputs, trace = run_wa(K3, 1, [0, 1, 1], DelayPolicy(seed=0), (), WaConfig(Fraction(1, 2)))
    assert trace.starved == {2}
    assert outputs[2] is None
    assert not check_epsilon_verdict(outputs, [0, 1, 1], Fraction(1, 2), trace.fault_free).termination


def test_event_budget():
    with pytest.raises(RuntimeError):
        run_wa(K4, 1, [0, 0, 1, 1], max_events=10)


def test_fifo_per_edge_under_random_delays():
    for seed in range(5):
        _, trace = run_wa(complete(4), 1, [0, 1, 2, 3], DelayPolicy(seed=seed, low=1, high=50), (), WaConfig(Fraction(1, 10)))
        assert check_fifo(trace) == []
    events = list(trace.events)
    i = next(k for k, e in enumerate(events) if e[1] == "deliver")
    j = next(k for k in range(i + 1, len(events)) if events[k][1] == "deliver" and events[k][2:4] == events[i][2:4])
    events[i], events[j] = events[j], events[i]
    assert check_fifo(dataclasses.replace(trace, events=events)) != []


def test_phase_ranges_shrink_on_feasible_graphs():
    rng = np.random.default_rng(2)
    for trial in range(10):
        G = complete(int(rng.integers(3, 6)))
        inputs = [Fraction(int(x), 7) for x in rng.integers(0, 8, size=G.n)]
        crash = AsyncCrash(int(rng.integers(0, G.n)), int(rng.integers(0, 60)), {0})
        policy = DelayPolicy("gatekeeper-adversary", seed=trial, slow=500, slow_senders={int(rng.integers(0, G.n))})
        outputs, trace = run_wa(G, 1, inputs, policy, [crash], WaConfig(EPS))
        ranges = trace.phase_ranges()
        assert all(b <= a for a, b in zip(ranges, ranges[1:]))
        assert check_contraction(trace) == []
        assert check_intermediate_validity(trace) == []
        assert not trace.starved


def test_policy_json_and_validation():
    p = DelayPolicy("gatekeeper-adversary", seed=3, low=2, high=4, slow=99, slow_senders={1}, delayed_edges={(0, 1)})
    assert DelayPolicy.from_json(p.to_json()) == p
    with pytest.raises(InvalidArgument):
        DelayPolicy("telepathy")
    with pytest.raises(InvalidArgument):
        DelayPolicy(low=5, high=2)
    with pytest.raises(InvalidArgument):
        WaConfig(0)
    c = AsyncCrash(1, 7, {0, 2})
    assert AsyncCrash.from_json(c.to_json()) == c


def test_delay_modes():
    fixed = DelayPolicy("fifo-fixed", low=3).sampler()
    assert {fixed(0, 1) for _ in range(5)} == {3}
    gate = DelayPolicy("gatekeeper-adversary", seed=0, slow=1000, delayed_edges={(0, 1)}).sampler()
    assert gate(0, 1) > 1000 and gate(1, 0) <= 10


def test_event_log_csv():
    _, trace = run_wa(K2, 0, [0, 1], DelayPolicy("fifo-fixed"), (), WaConfig(Fraction(1, 2)))
    lines = trace.to_csv().splitlines()
    assert lines[0] == "time,kind,src,dst,value,origin,phase"
    assert lines[1].startswith("0,start,0")
    assert any(",deliver," in line for line in lines)
