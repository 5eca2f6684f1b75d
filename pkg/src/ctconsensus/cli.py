"""Command-line harness: ``check``, ``sim``, ``sweep``, ``oracle``, ``verify-fixed``.

Exit status: 0 when the command ran and every property it asserts held,
1 for usage, parse or precondition errors, 2 when an asserted property failed.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import suites
from .async_engine import (
    AsyncCrash,
    DelayPolicy,
    WaConfig,
    as_fraction,
    check_contraction,
    check_epsilon_verdict,
    check_fifo,
    check_heard_intersection,
    check_intermediate_validity,
    gatekeeper_scenario,
    run_wa,
)
from .conditions import (
    async_condition,
    ct_node_connectivity,
    ct_violation_witness,
    fault_diameter,
    rounds_per_phase,
)
from .errors import ConsensusError, GraphFormatError, InvalidArgument, InvalidInput, VerificationFailure
from .graph import DiGraph, load
from .impossibility import verify_impossibility
from .records import ResultRecord
from .sync_engine import (
    CrashSchedule,
    check_mvc_invariants,
    check_round_consistency,
    check_verdict,
    generate_schedules,
    run_min_max,
    run_mvc,
    run_mvc_batch,
    sweep_min_max,
)

EXIT_OK, EXIT_USAGE, EXIT_PROPERTY = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--graph", help="edge-list graph file")
    common.add_argument("--f", type=int, default=1, help="fault bound (default 1)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="also write the JSON record here")
    common.add_argument("--trace", help="write a CSV trace here (sim only)")

    run_opts = _Parser(add_help=False)
    run_opts.add_argument("--algorithm", choices=("minmax", "mvc", "wa"), required=True)
    run_opts.add_argument("--inputs", help="'011' for bits, or comma-separated values such as '0,1/2,1'")
    run_opts.add_argument("--K", type=int, help="largest MVC input")
    run_opts.add_argument("--epsilon", default="1/1000", help="WA agreement tolerance")
    run_opts.add_argument("--policy", choices=("uniform-random", "gatekeeper-adversary", "fifo-fixed"), default="uniform-random")
    run_opts.add_argument("--delay-bounds", default="1,10", help="'low,high' message delays for WA")
    run_opts.add_argument("--slow-senders", default="", help="gatekeeper mode: comma-separated senders whose messages are stalled")
    run_opts.add_argument(
        "--schedule",
        help="crash schedule JSON file, 'none' or 'random' (default: 'random' for minmax/mvc, 'none' for wa)",
    )
    run_opts.add_argument("--p-end", type=int, help="override the WA phase count")
    run_opts.add_argument("--scenario", help="WA scenario JSON (graph, f, inputs, epsilon, policy, crashes, p_end_override)")

    p = _Parser(prog="ctconsensus", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("check", parents=[common], help="report connectivity, fault diameter and the partition condition")
    sub.add_parser("sim", parents=[common, run_opts], help="run one simulation and its checkers")
    sw = sub.add_parser("sweep", parents=[common, run_opts], help="run many seeded simulations")
    sw.add_argument("--count", type=int, default=100)
    orc = sub.add_parser("oracle", parents=[common], help="compare fast paths with naive oracles")
    orc.add_argument("--scope", choices=sorted(suites.ORACLE_SCOPES), required=True)
    vf = sub.add_parser("verify-fixed", parents=[common], help="falsify every fixed transition table")
    vf.add_argument("--all-inputs", action="store_true", help="try every input vector, not only the constant-block patterns")
    return p


# ---------------------------------------------------------------------------
# argument decoding
# ---------------------------------------------------------------------------


def _graph(args) -> DiGraph:
    if not args.graph:
        raise UsageError("--graph is required")
    return load(args.graph)


def _graph_json(G: DiGraph):
    return {"n": G.n, "edges": [list(e) for e in G.sorted_edges()]}


def parse_inputs(text: str | None, n: int, kind: str):
    if text is None:
        return None
    text = text.strip()
    parts = [t.strip() for t in text.split(",")] if "," in text else list(text)
    if len(parts) != n:
        raise UsageError(f"expected {n} inputs, got {len(parts)}")
    try:
        if kind == "rational":
            return [as_fraction(x) for x in parts]
        return [int(x) for x in parts]
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"cannot parse inputs {text!r}") from None


def _schedule_arg(args) -> str:
    if args.schedule is not None:
        return args.schedule
    return "none" if args.algorithm == "wa" else "random"


def _sync_schedule(args, G, f, d, n_phases, seed, count=1) -> list[CrashSchedule]:
    mode = _schedule_arg(args)
    if mode == "none":
        return [CrashSchedule((), f)] * count
    if mode == "random":
        return generate_schedules(G, f, "seeded-random", seed, count, d=d, n_phases=n_phases)
    data = json.loads(Path(mode).read_text())
    sched = CrashSchedule.from_json(data, f)
    sched.validate(G, d, n_phases)
    return [sched] * count


def _bounds(args):
    try:
        lo, hi = (int(x) for x in args.delay_bounds.split(","))
    except ValueError:
        raise UsageError(f"bad --delay-bounds {args.delay_bounds!r}") from None
    return lo, hi


def _wa_setup(args, G, f, seed):
    """Inputs, policy, crashes and config for one WA run."""
    scenario = json.loads(Path(args.scenario).read_text()) if args.scenario else {}
    epsilon = as_fraction(scenario.get("epsilon", args.epsilon))
    n = G.n
    inputs = parse_inputs(args.inputs, n, "rational")
    if inputs is None and "inputs" in scenario:
        inputs = [as_fraction(x) for x in scenario["inputs"]]
    lo, hi = _bounds(args)
    if "policy" in scenario:
        policy = DelayPolicy.from_json(scenario["policy"])
    elif args.policy == "gatekeeper-adversary":
        witness = async_condition(G, f)
        slow = frozenset(int(x) for x in args.slow_senders.split(",") if x.strip())
        if witness is True:
            policy = DelayPolicy(args.policy, seed=seed, low=lo, high=hi, slow_senders=slow)
        else:
            gate_inputs, policy = gatekeeper_scenario(G, witness, epsilon, seed=seed)
            policy = DelayPolicy(policy.mode, seed=seed, low=lo, high=hi, slow=policy.slow, slow_senders=slow, delayed_edges=policy.delayed_edges)
            if inputs is None:
                inputs = gate_inputs
    else:
        policy = DelayPolicy(args.policy, seed=seed, low=lo, high=hi)
    if inputs is None:
        raise UsageError("--inputs is required")
    if "crashes" in scenario:
        crashes = [AsyncCrash.from_json(c) for c in scenario["crashes"]]
    else:
        mode = _schedule_arg(args)
        if mode == "none":
            crashes = []
        elif mode == "random":
            rng = np.random.default_rng([seed, 1])
            crashes = [suites.random_crash(G, rng)] if f > 0 and rng.random() < 0.5 else []
        else:
            crashes = [AsyncCrash.from_json(c) for c in json.loads(Path(mode).read_text())]
    p_end = scenario.get("p_end_override", args.p_end)
    return inputs, policy, crashes, WaConfig(epsilon, p_end)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_check(args) -> ResultRecord:
    G = _graph(args)
    f = args.f
    result = {}
    ct = ct_node_connectivity(G, f)
    result["ct"] = ct
    if ct:
        result["d"] = fault_diameter(G, f)
    else:
        result["ct_witness"] = ct_violation_witness(G, f).to_json()
    a = async_condition(G, f)
    result["async"] = a is True
    if a is not True:
        result["async_witness"] = a.to_json()
    return ResultRecord("check", {"graph": _graph_json(G), "f": f}, True, result)


def _run_once(args, G, f, seed, want_trace: bool):
    """One simulation: returns (config, passed, result, trace-or-None)."""
    alg = args.algorithm
    if alg in ("minmax", "mvc"):
        d = rounds_per_phase(G, f)
        feasible = ct_node_connectivity(G, f)
        if alg == "minmax":
            inputs = parse_inputs(args.inputs, G.n, "int")
            if inputs is None:
                raise UsageError("--inputs is required")
            (sched,) = _sync_schedule(args, G, f, d, 2 * f + 2, seed)
            outputs, trace = run_min_max(G, f, inputs, sched, d)
            checks = {"round_consistency": len(check_round_consistency(trace))}
        else:
            if args.K is None:
                raise UsageError("--K is required for mvc")
            inputs = parse_inputs(args.inputs, G.n, "int")
            if inputs is None:
                raise UsageError("--inputs is required")
            if any(not 0 <= x <= args.K for x in inputs):
                raise InvalidInput(f"inputs must lie in [0, {args.K}]")
            (sched,) = _sync_schedule(args, G, f, d, (args.K + 1) * (2 * f + 2), seed)
            outputs, trace = run_mvc(G, f, args.K, inputs, sched, d)
            checks = {
                "round_consistency": len(check_round_consistency(trace)),
                "invariant_violations": [v.to_json() for v in check_mvc_invariants(trace)],
            }
        verdict = check_verdict(trace, inputs, outputs)
        clean = checks["round_consistency"] == 0 and not checks.get("invariant_violations")
        passed = clean and (verdict.ok or not feasible)
        config = {"algorithm": alg, "graph": _graph_json(G), "f": f, "inputs": inputs, "K": args.K, "d": d, "schedule": sched.to_json(), "seed": seed}
        result = {"feasible": feasible, "outputs": outputs, "verdict": verdict.to_json(), "checks": checks}
        return config, passed, result, trace.to_csv() if want_trace else None
    inputs, policy, crashes, config = _wa_setup(args, G, f, seed)
    outputs, trace = run_wa(G, f, inputs, policy, crashes, config, record_events=True)
    verdict = check_epsilon_verdict(outputs, inputs, config.epsilon, trace.fault_free)
    feasible = async_condition(G, f) is True
    checks = {
        "starved": sorted(trace.starved),
        "heard_disjoint": [list(x) for x in check_heard_intersection(trace)],
        "contraction": check_contraction(trace) if feasible else [],
        "fifo": [list(e) for e in check_fifo(trace)],
        "invalid_states": len(check_intermediate_validity(trace)),
    }
    if feasible:
        passed = verdict.ok and not any(checks.values())
    else:
        passed = not checks["fifo"] and not checks["invalid_states"]
    cfg = {
        "algorithm": "wa",
        "graph": _graph_json(G),
        "f": f,
        "inputs": [str(x) for x in inputs],
        "epsilon": str(config.epsilon),
        "p_end": trace.p_end,
        "policy": policy.to_json(),
        "crashes": [c.to_json() for c in crashes],
        "seed": seed,
    }
    result = {
        "feasible": feasible,
        "outputs": [None if o is None else str(o) for o in outputs],
        "crashed": sorted(trace.crashed),
        "events": trace.n_events,
        "verdict": verdict.to_json(),
        "checks": checks,
    }
    return cfg, passed, result, trace.to_csv() if want_trace else None


def cmd_sim(args) -> ResultRecord:
    G = _graph(args)
    config, passed, result, csv_text = _run_once(args, G, args.f, args.seed, bool(args.trace))
    if args.trace:
        Path(args.trace).write_text(csv_text)
    return ResultRecord("sim", config, passed, result)


def cmd_sweep(args) -> ResultRecord:
    if args.count < 1:
        raise UsageError("--count must be >= 1")
    G = _graph(args)
    f = args.f
    base = {"algorithm": args.algorithm, "graph": _graph_json(G), "f": f, "count": args.count, "seed": args.seed}
    if args.algorithm == "minmax":
        d = rounds_per_phase(G, f)
        feasible = ct_node_connectivity(G, f)
        scheds = _sync_schedule(args, G, f, d, 2 * f + 2, args.seed, args.count)
        arrays = [s.as_arrays(G.n, d) for s in scheds]
        cr = np.stack([a[0] for a in arrays])
        cm = np.stack([a[1] for a in arrays])
        inputs = parse_inputs(args.inputs, G.n, "int")
        vectors = None if inputs is None else np.array([inputs], dtype=np.int8)
        sweep = sweep_min_max(G, f, cr, cm, d, vectors)
        result = {"feasible": feasible, **sweep.to_json()}
        failed = sweep.failed_runs
        base["inputs"] = inputs if inputs is not None else "all"
    elif args.algorithm == "mvc":
        if args.K is None:
            raise UsageError("--K is required for mvc")
        d = rounds_per_phase(G, f)
        feasible = ct_node_connectivity(G, f)
        scheds = _sync_schedule(args, G, f, d, (args.K + 1) * (2 * f + 2), args.seed, args.count)
        arrays = [s.as_arrays(G.n, d) for s in scheds]
        cr = np.stack([a[0] for a in arrays])
        cm = np.stack([a[1] for a in arrays])
        inputs = parse_inputs(args.inputs, G.n, "int")
        if inputs is None:
            x = np.random.default_rng([args.seed, 2]).integers(0, args.K + 1, size=(args.count, G.n))
        else:
            x = np.tile(np.array(inputs, dtype=np.int64), (args.count, 1))
        batch = run_mvc_batch(G, f, args.K, x, cr, cm, d)
        bad = batch.verdict_failures()
        inv = check_mvc_invariants(batch)
        failed = int(bad.sum()) + len(inv)
        result = {"feasible": feasible, "runs": args.count, "all_true": args.count - int(bad.sum()), "invariant_violations": len(inv)}
        base.update({"K": args.K, "inputs": inputs if inputs is not None else "random"})
    else:
        feasible = async_condition(G, f) is True
        runs = ok = 0
        property_failures = 0
        for r in range(args.count):
            _, passed, res, _ = _run_once(args, G, f, args.seed + r, False)
            runs += 1
            ok += res["verdict"]["agreement"] and res["verdict"]["validity"] and res["verdict"]["termination"]
            property_failures += not passed
        failed = property_failures
        result = {"feasible": feasible, "runs": runs, "all_true": ok, "property_failures": property_failures}
        base.update({"inputs": args.inputs, "epsilon": args.epsilon, "policy": args.policy})
    passed = not (feasible and failed)
    return ResultRecord("sweep", base, passed, result)


def cmd_oracle(args) -> ResultRecord:
    return suites.ORACLE_SCOPES[args.scope]()


def cmd_verify_fixed(args) -> ResultRecord:
    f = args.f
    if f < 1:
        raise InvalidArgument(f"f must be >= 1, got {f}")
    if f > 2:
        raise InvalidArgument("verify-fixed handles f in {1, 2}; larger f needs 2^28 or more tables")
    try:
        report = verify_impossibility(f, all_inputs=args.all_inputs)
    except VerificationFailure as exc:
        return ResultRecord("verify-fixed", {"f": f, "all_inputs": args.all_inputs}, False, {"error": str(exc)})
    result = report.to_json()
    result["summary"] = report.summary()
    print(report.summary(), file=sys.stderr)
    return ResultRecord("verify-fixed", {"f": f, "all_inputs": args.all_inputs}, report.n_falsified == report.n_tables, result)


COMMANDS = {"check": cmd_check, "sim": cmd_sim, "sweep": cmd_sweep, "oracle": cmd_oracle, "verify-fixed": cmd_verify_fixed}


def _emit(record: ResultRecord, args):
    text = record.dumps()
    print(text)
    if getattr(args, "out", None):
        Path(args.out).write_text(text + "\n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        record = COMMANDS[args.command](args)
    except (UsageError, GraphFormatError, InvalidArgument, OSError, json.JSONDecodeError, ConsensusError) as exc:
        config = {"argv": list(argv) if argv is not None else sys.argv[1:]}
        record = ResultRecord(args.command, config, False, {}, error={"type": type(exc).__name__, "message": str(exc)})
        record.wall_time = time.perf_counter() - start
        _emit(record, args)
        print(f"ctconsensus: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if record.wall_time is None:
        record.wall_time = time.perf_counter() - start
    _emit(record, args)
    return EXIT_OK if record.passed else EXIT_PROPERTY


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
