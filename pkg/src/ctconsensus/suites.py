"""Corpus-scale verification suites.

Each suite returns a :class:`ResultRecord` whose ``result`` is a pure function
of the suite's configuration; wall-time is kept out of the canonical bytes.
"""

from __future__ import annotations

import hashlib
import time
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import corpus, oracles
from .async_engine import (
    AsyncCrash,
    DelayPolicy,
    WaConfig,
    check_contraction,
    check_epsilon_verdict,
    check_fifo,
    check_heard_intersection,
    check_intermediate_validity,
    gatekeeper_scenario,
    p_end_bound,
    run_wa,
)
from .conditions import (
    async_condition,
    async_condition_many,
    ct_connectivity_many,
    ct_violation_witness,
    fault_diameter,
    rounds_per_phase,
)
from .errors import InfeasibleGraph
from .graph import DiGraph, complete
from .impossibility import verify_impossibility
from .records import ResultRecord
from .sync_engine import (
    NEVER,
    CrashSchedule,
    SyncCrashEvent,
    check_information_flow,
    check_mvc_invariants,
    check_verdict,
    random_schedule_arrays,
    run_mvc_batch,
    run_min_max,
    sweep_min_max,
)


@lru_cache(maxsize=None)
def _classes(n: int):
    codes = corpus.isomorphism_class_codes(n)
    return codes, corpus.codes_to_out_masks(n, codes)


def ct_corpus(n_max: int, f: int, feasible: bool = True, n_min: int = 2) -> list[tuple[int, int, DiGraph]]:
    """``(n, code, graph)`` for every isomorphism class on ``n_min..n_max`` nodes that
    does (or, with ``feasible=False``, does not) satisfy ``f`` CT node connectivity."""
    out = []
    for n in range(n_min, n_max + 1):
        codes, masks = _classes(n)
        ok = ct_connectivity_many(masks, f)
        keep = codes[ok] if feasible else codes[~ok]
        out.extend((n, int(c), corpus.from_code_cached(n, int(c))) for c in keep)
    return out


def async_corpus(n_max: int, f: int, feasible: bool, n_min: int = 2) -> list[tuple[int, int, DiGraph]]:
    out = []
    for n in range(n_min, n_max + 1):
        codes, masks = _classes(n)
        fail = async_condition_many(masks, f)
        keep = codes[fail < 0] if feasible else codes[fail >= 0]
        out.extend((n, int(c), corpus.from_code_cached(n, int(c))) for c in keep)
    return out


def _record(command, config, passed, result, start):
    return ResultRecord(command, config, bool(passed), result, time.perf_counter() - start)


# ---------------------------------------------------------------------------
# oracle cross-checks
# ---------------------------------------------------------------------------


def oracle_graphs_n4(ks=(0, 1, 2)) -> ResultRecord:
    """Fast CT connectivity against the closure oracle on all 4096 labelled 4-node digraphs."""
    start = time.perf_counter()
    n = 4
    codes = corpus.labelled_codes(n)
    masks = corpus.codes_to_out_masks(n, codes)
    graphs = corpus.graphs(n, codes)
    mismatches = []
    for k in ks:
        fast = ct_connectivity_many(masks, k)
        for c, G, got in zip(codes, graphs, fast):
            if bool(got) != oracles.ct_connectivity(G, k):
                mismatches.append({"k": k, "code": int(c), "graph": G.dumps(), "fast": bool(got)})
    cases = len(codes) * len(ks)
    result = {"cases": cases, "mismatches": len(mismatches), "first_mismatch": mismatches[0] if mismatches else None}
    return _record("oracle", {"scope": "graphs-n4", "ks": list(ks)}, not mismatches, result, start)


def oracle_diameters(n_max: int = 4, fs=(0, 1)) -> ResultRecord:
    """``fault_diameter`` against Floyd-Warshall on all labelled graphs up to ``n_max``
    nodes, plus the complete-graph family (all ``d = 1``)."""
    start = time.perf_counter()
    mismatches = []
    cases = 0
    for n in range(2, n_max + 1):
        for G in corpus.graphs(n, corpus.labelled_codes(n)):
            for f in fs:
                cases += 1
                try:
                    fast = fault_diameter(G, f)
                except InfeasibleGraph:
                    fast = None
                slow = oracles.fault_diameter(G, f)
                if fast != slow:
                    mismatches.append({"f": f, "graph": G.dumps(), "fast": fast, "oracle": slow})
    complete_d = {}
    for n in range(2, 7):
        for f in range(0, n - 1):
            cases += 1
            d = fault_diameter(complete(n), f)
            complete_d[f"K{n},f={f}"] = d
            if d != 1:
                mismatches.append({"f": f, "graph": complete(n).dumps(), "fast": d, "oracle": 1})
    result = {"cases": cases, "mismatches": len(mismatches), "first_mismatch": mismatches[0] if mismatches else None, "complete": complete_d}
    return _record("oracle", {"scope": "diameters", "n_max": n_max, "fs": list(fs)}, not mismatches, result, start)


def oracle_async_n5(fs=(1,)) -> ResultRecord:
    """``async_condition`` against exhaustive partition checks on every 5-node
    isomorphism class, plus the ``n >= 2f+1`` rule on complete graphs."""
    start = time.perf_counter()
    mismatches = []
    cases = 0
    codes, masks = _classes(5)
    for f in fs:
        fast = async_condition_many(masks, f)
        for c, code in zip(codes, fast):
            cases += 1
            G = corpus.from_code_cached(5, int(c))
            slow = oracles.async_condition(G, f)
            if code < 0:
                ok = slow is True
            else:
                w = async_condition(G, f)
                p = w.partition
                ok = slow is not True and (p.L, p.C, p.R) == slow
            if not ok:
                mismatches.append({"f": f, "graph": G.dumps(), "fast": int(code)})
    family = {}
    for n in range(2, 7):
        for f in range(0, 3):
            cases += 1
            got = async_condition(complete(n), f) is True
            family[f"K{n},f={f}"] = got
            if got != (n >= 2 * f + 1):
                mismatches.append({"f": f, "graph": complete(n).dumps(), "fast": got})
    result = {"cases": cases, "mismatches": len(mismatches), "first_mismatch": mismatches[0] if mismatches else None, "complete": family}
    return _record("oracle", {"scope": "async-n5", "fs": list(fs)}, not mismatches, result, start)


ORACLE_SCOPES = {"graphs-n4": oracle_graphs_n4, "diameters": oracle_diameters, "async-n5": oracle_async_n5}


# ---------------------------------------------------------------------------
# synchronous suites
# ---------------------------------------------------------------------------


def minmax_suite(n_max: int = 5, f: int = 1, schedules: int = 200, seed: int = 0) -> ResultRecord:
    """Min-Max on every feasible class, all binary inputs, ``schedules`` random crash schedules each."""
    start = time.perf_counter()
    h = hashlib.sha256()
    totals = {"graphs": 0, "runs": 0, "all_true": 0, "agreement_failures": 0, "validity_failures": 0, "clean_phase_failures": 0}
    partial = mid_round = 0
    per_n = {}
    failures = []
    n_phases = 2 * f + 2
    for n, code, G in ct_corpus(n_max, f):
        d = rounds_per_phase(G, f)
        rng = np.random.default_rng([seed, n, code])
        cr, cm = random_schedule_arrays(G, f, d, n_phases, rng, schedules)
        r = sweep_min_max(G, f, cr, cm, d)
        crashed = cr < NEVER
        outs = np.asarray(G.out_masks, dtype=np.int64)[None, :]
        partial += int((crashed & (cm != 0) & (cm != outs)).any(axis=1).sum())
        mid_round += int((crashed & (cr % d != 0)).any(axis=1).sum())
        totals["graphs"] += 1
        totals["runs"] += r.runs
        totals["all_true"] += r.all_true
        totals["agreement_failures"] += r.agreement_failures
        totals["validity_failures"] += r.validity_failures
        totals["clean_phase_failures"] += r.clean_phase_failures
        per_n[n] = per_n.get(n, 0) + 1
        h.update(cr.tobytes() + cm.tobytes() + f"{n}:{code}:{r.all_true}/{r.runs}".encode())
        if r.failed_runs:
            failures.append({"n": n, "code": code, "first_failure": r.first_failure})
    result = dict(totals)
    result.update(
        {
            "graphs_per_n": {str(k): v for k, v in sorted(per_n.items())},
            "schedules_with_partial_delivery": partial,
            "schedules_with_mid_phase_crash": mid_round,
            "failures": failures[:20],
            "trace_digest": h.hexdigest(),
        }
    )
    passed = totals["runs"] > 0 and totals["all_true"] == totals["runs"] and totals["clean_phase_failures"] == 0
    config = {"suite": "minmax", "n_max": n_max, "f": f, "schedules": schedules, "seed": seed}
    return _record("suite", config, passed, result, start)


def necessity_suite(f: int = 1, n_max: int = 4, n5_sample: int = 60) -> ResultRecord:
    """Graphs failing the condition: crash ``F`` at start, 0s on ``S_i``, 1s on ``S_j``.

    Each case must disagree under Min-Max, and no value from ``S_j`` may reach ``S_i``.
    """
    start = time.perf_counter()
    cases = ct_corpus(n_max, f, feasible=False)
    if n5_sample and n_max < 5:
        cases += ct_corpus(5, f, feasible=False, n_min=5)[:n5_sample]
    rows = []
    for n, code, G in cases:
        w = ct_violation_witness(G, f)
        inputs = [1 if x in w.S_j else 0 for x in range(n)]
        sched = CrashSchedule(tuple(SyncCrashEvent(x, 1, 1) for x in sorted(w.F.members)), f)
        outputs, trace = run_min_max(G, f, inputs, sched)
        verdict = check_verdict(trace, inputs, outputs)
        leaks = check_information_flow(trace, w.S_j, w.S_i)
        rows.append({"n": n, "code": code, "witness": w.to_json(), "agreement": verdict.agreement, "leaks": len(leaks)})
    demonstrated = sum(1 for r in rows if not r["agreement"] and r["leaks"] == 0)
    result = {"cases": len(rows), "demonstrated": demonstrated, "failures": [r for r in rows if r["agreement"] or r["leaks"]][:20]}
    passed = len(rows) >= 50 and demonstrated == len(rows)
    return _record("suite", {"suite": "necessity", "f": f, "n_max": n_max, "n5_sample": n5_sample}, passed, result, start)


def mvc_suite(n_max: int = 5, f: int = 1, Ks=(1, 2, 3), batch: int = 64, seed: int = 0) -> ResultRecord:
    """MVC on every feasible class with random inputs and crash schedules; verdicts and trace invariants."""
    start = time.perf_counter()
    h = hashlib.sha256()
    runs = bad = 0
    violations = {}
    first_bad = None
    n_inner = 2 * f + 2
    for n, code, G in ct_corpus(n_max, f):
        d = rounds_per_phase(G, f)
        rng = np.random.default_rng([seed, n, code])
        for K in Ks:
            cr, cm = random_schedule_arrays(G, f, d, (K + 1) * n_inner, rng, batch)
            x = rng.integers(0, K + 1, size=(batch, n))
            b = run_mvc_batch(G, f, K, x, cr, cm, d)
            fails = b.verdict_failures()
            inv = check_mvc_invariants(b)
            runs += batch
            bad += int(fails.sum())
            for v in inv:
                violations[v.assertion] = violations.get(v.assertion, 0) + 1
            if first_bad is None and (fails.any() or inv):
                first_bad = {"n": n, "code": code, "K": K, "invariant": inv[0].to_json() if inv else None}
            h.update(b.outputs.tobytes())
    result = {"runs": runs, "verdict_failures": bad, "invariant_violations": violations, "first_failure": first_bad, "output_digest": h.hexdigest()}
    passed = runs > 0 and bad == 0 and not violations
    return _record("suite", {"suite": "mvc", "n_max": n_max, "f": f, "Ks": list(Ks), "batch": batch, "seed": seed}, passed, result, start)


# ---------------------------------------------------------------------------
# asynchronous suites
# ---------------------------------------------------------------------------


def wa_graphs(f: int = 1, extra: int = 6) -> list[DiGraph]:
    """Complete graphs on 3..5 nodes and ``extra`` non-complete graphs meeting the partition condition."""
    out = [complete(n) for n in (3, 4, 5)]
    pool = [G for n, _, G in async_corpus(5, f, feasible=True, n_min=3) if len(G.edges) < n * (n - 1)]
    by_n = {}
    for G in pool:
        by_n.setdefault(G.n, []).append(G)
    picked = []
    sizes = sorted(by_n)
    while len(picked) < extra and any(by_n.values()):
        for n in sizes:
            if by_n[n] and len(picked) < extra:
                picked.append(by_n[n].pop(0))
    return out + picked


def random_crash(G: DiGraph, rng) -> AsyncCrash:
    node = int(rng.integers(0, G.n))
    index = int(rng.integers(0, 6 * G.n * G.n))
    outs = sorted(G.out_neighbors(node) - {node})
    partial = frozenset(x for x in outs if rng.random() < 0.5)
    return AsyncCrash(node, index, partial)


def wa_suite(f: int = 1, epsilon=Fraction(1, 1000), runs: int = 4, seed: int = 0) -> ResultRecord:
    """Algorithm WA on feasible graphs under random and gatekeeper delays, each run with one crash."""
    start = time.perf_counter()
    epsilon = Fraction(epsilon)
    h = hashlib.sha256()
    counts = {"runs": 0, "verdict_ok": 0, "starved": 0, "heard_disjoint": 0, "contraction": 0, "fifo": 0, "invalid_state": 0, "p_end_mismatch": 0}
    graphs = wa_graphs(f)
    first_bad = None
    for gi, G in enumerate(graphs):
        for mode in ("uniform-random", "gatekeeper-adversary"):
            for r in range(runs):
                rng = np.random.default_rng([seed, gi, len(mode), r])
                inputs = [Fraction(int(x), 1000) for x in rng.integers(0, 1001, size=G.n)]
                crash = random_crash(G, rng)
                pseed = int(rng.integers(0, 2**31))
                if mode == "uniform-random":
                    policy = DelayPolicy(mode, seed=pseed, low=1, high=10)
                else:
                    slow = frozenset(int(x) for x in rng.choice(G.n, size=f, replace=False))
                    policy = DelayPolicy(mode, seed=pseed, low=1, high=10, slow=10**6, slow_senders=slow)
                outputs, trace = run_wa(G, f, inputs, policy, [crash], WaConfig(epsilon), record_events=True)
                verdict = check_epsilon_verdict(outputs, inputs, epsilon, trace.fault_free)
                checks = {
                    "verdict_ok": verdict.ok,
                    "starved": bool(trace.starved),
                    "heard_disjoint": bool(check_heard_intersection(trace)),
                    "contraction": bool(check_contraction(trace)),
                    "fifo": bool(check_fifo(trace)),
                    "invalid_state": bool(check_intermediate_validity(trace)),
                    "p_end_mismatch": trace.p_end != p_end_bound(G.n, f, max(inputs), min(inputs), epsilon),
                }
                counts["runs"] += 1
                for k, v in checks.items():
                    counts[k] += int(v)
                if first_bad is None and (not verdict.ok or any(v for k, v in checks.items() if k != "verdict_ok")):
                    first_bad = {"graph": G.dumps(), "mode": mode, "run": r, "checks": checks, "verdict": verdict.to_json()}
                h.update(repr((G.sorted_edges(), [str(o) for o in outputs], trace.n_events, sorted(trace.crashed))).encode())
    result = dict(counts)
    result.update({"graphs": len(graphs), "non_complete": sum(1 for G in graphs if len(G.edges) < G.n * (G.n - 1)), "first_failure": first_bad, "run_digest": h.hexdigest()})
    passed = counts["runs"] > 0 and counts["verdict_ok"] == counts["runs"] and all(counts[k] == 0 for k in counts if k not in ("runs", "verdict_ok"))
    config = {"suite": "wa", "f": f, "epsilon": str(epsilon), "runs": runs, "seed": seed}
    return _record("suite", config, passed, result, start)


def gatekeeper_suite(f: int = 1, epsilon=Fraction(1, 1000), n_max: int = 4, n5_sample: int = 100, seed: int = 0) -> ResultRecord:
    """Stall the gatekeepers of each partition-condition witness and confirm outputs split into ``{0, 2 epsilon}``."""
    start = time.perf_counter()
    epsilon = Fraction(epsilon)
    cases = [(2, None, complete(2))] + async_corpus(n_max, f, feasible=False)
    if n5_sample and n_max < 5:
        cases += async_corpus(5, f, feasible=False, n_min=5)[:n5_sample]
    rows = []
    for n, code, G in cases:
        w = async_condition(G, f)
        inputs, policy = gatekeeper_scenario(G, w, epsilon, seed=seed)
        outputs, trace = run_wa(G, f, inputs, policy, (), WaConfig(epsilon), record_events=False)
        verdict = check_epsilon_verdict(outputs, inputs, epsilon, trace.fault_free)
        P = w.partition
        split = all(outputs[x] == 0 for x in P.L) and all(outputs[x] == 2 * epsilon for x in P.R)
        rows.append({"n": n, "code": code, "witness": w.to_json(), "split": split, "agreement": verdict.agreement})
    demonstrated = sum(1 for r in rows if r["split"] and not r["agreement"])
    result = {"cases": len(rows), "demonstrated": demonstrated, "k2": rows[0], "failures": [r for r in rows if not r["split"] or r["agreement"]][:20]}
    config = {"suite": "gatekeeper", "f": f, "epsilon": str(epsilon), "n_max": n_max, "n5_sample": n5_sample, "seed": seed}
    return _record("suite", config, demonstrated == len(rows), result, start)


def impossibility_suite(f: int = 1) -> ResultRecord:
    start = time.perf_counter()
    report = verify_impossibility(f)
    result = report.to_json(include_tables=f == 1)
    result["summary"] = report.summary()
    cases_ok = report.case_witnesses is None or all(c["holds"] for c in report.case_witnesses.values())
    expected = 1 << sum(k - 1 for k in range(2, report.max_size + 1))
    passed = report.n_tables == expected and report.n_falsified == report.n_tables and cases_ok
    return _record("suite", {"suite": "impossibility", "f": f}, passed, result, start)
