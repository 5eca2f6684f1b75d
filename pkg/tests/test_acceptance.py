"""Acceptance criteria at full scale, one pass/fail line per criterion.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines as they are
produced; they are also collected in the terminal summary.
"""

from fractions import Fraction

import pytest

from ctconsensus import suites

EPS = Fraction(1, 1000)
_RECORDS = {}


def _suite(name):
    if name not in _RECORDS:
        _RECORDS[name] = {
            "minmax": lambda: suites.minmax_suite(n_max=5, f=1, schedules=200, seed=0),
            "wa": lambda: suites.wa_suite(f=1, epsilon=EPS, runs=4, seed=0),
            "impossibility": lambda: suites.impossibility_suite(f=1),
        }[name]()
    return _RECORDS[name]


@pytest.fixture
def report(acceptance_log):
    def emit(number, label, ok, detail=""):
        line = f"criterion {number}: {label}: {'PASS' if ok else 'FAIL'}" + (f" ({detail})" if detail else "")
        acceptance_log.append(line)
        print(line)
        assert ok, line

    return emit


def test_criterion_1_oracle_equivalence(report):
    rec = suites.oracle_graphs_n4(ks=(0, 1, 2))
    r = rec.result
    ok = rec.passed and r["cases"] == 4096 * 3 and r["mismatches"] == 0 and rec.wall_time < 60
    report(1, "CT connectivity vs closure oracle, n=4, k<=2", ok, f"{r['cases']} cases, {r['mismatches']} mismatches, {rec.wall_time:.2f}s")


def test_criterion_2_min_max_suite(report):
    rec = _suite("minmax")
    r = rec.result
    ok = (
        rec.passed
        and r["all_true"] == r["runs"]
        and r["clean_phase_failures"] == 0
        and r["schedules_with_partial_delivery"] > 0
        and r["schedules_with_mid_phase_crash"] > 0
        and r["graphs_per_n"]["5"] > 0
    )
    report(2, "Min-Max on feasible digraphs n<=5", ok, f"{r['graphs']} graphs, {r['runs']} runs, {r['runs'] - r['all_true']} failures")


def test_criterion_3_necessity(report):
    rec = suites.necessity_suite(f=1)
    r = rec.result
    ok = rec.passed and r["cases"] >= 50 and r["demonstrated"] == r["cases"]
    report(3, "disagreement and no S_j to S_i flow on infeasible graphs", ok, f"{r['demonstrated']}/{r['cases']}")


def test_criterion_4_mvc_suite(report):
    rec = suites.mvc_suite(n_max=5, f=1, Ks=(1, 2, 3))
    r = rec.result
    ok = rec.passed and r["verdict_failures"] == 0 and not r["invariant_violations"]
    report(4, "MVC K<=3 verdicts and trace invariants", ok, f"{r['runs']} runs, {r['verdict_failures']} verdict failures, {sum(r['invariant_violations'].values())} violations")


def test_criterion_5_wa_suite(report):
    rec = _suite("wa")
    r = rec.result
    ok = (
        rec.passed
        and r["non_complete"] >= 5
        and r["verdict_ok"] == r["runs"]
        and r["heard_disjoint"] == 0
        and r["contraction"] == 0
        and r["p_end_mismatch"] == 0
    )
    report(5, "WA epsilon-agreement, heard intersection, contraction", ok, f"{r['graphs']} graphs ({r['non_complete']} non-complete), {r['verdict_ok']}/{r['runs']} runs")


def test_criterion_6_gatekeeper(report):
    rec = suites.gatekeeper_suite(f=1, epsilon=EPS)
    r = rec.result
    k2 = r["k2"]
    ok = rec.passed and k2["split"] and not k2["agreement"] and r["demonstrated"] == r["cases"]
    report(6, "gatekeeper split into {0, 2 eps}", ok, f"K2 split={k2['split']}, {r['demonstrated']}/{r['cases']} witnesses")


def test_criterion_7_transition_tables(report):
    rec = _suite("impossibility")
    r = rec.result
    cases = r["case_witnesses"]
    ok = (
        rec.passed
        and r["tables"] == 64
        and r["falsified"] == 64
        and all(t["falsified"] and t["witness"] for t in r["per_table"])
        and all(c["holds"] for c in cases.values())
        and rec.wall_time < 10
    )
    report(7, "fixed-table iterative algorithms falsified, f=1", ok, f"{r['summary']}, {rec.wall_time:.2f}s")


def test_criterion_8_determinism(report):
    mismatched = []
    fresh = {
        "minmax": suites.minmax_suite(n_max=5, f=1, schedules=200, seed=0),
        "wa": suites.wa_suite(f=1, epsilon=EPS, runs=4, seed=0),
        "impossibility": suites.impossibility_suite(f=1),
    }
    for name, rec in fresh.items():
        if rec.canonical_bytes() != _suite(name).canonical_bytes():
            mismatched.append(name)
    report(8, "byte-identical records on rerun of criteria 2, 5, 7", not mismatched, f"mismatched: {mismatched}" if mismatched else "3/3 identical")
