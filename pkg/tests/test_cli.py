import json
import subprocess
import sys

import pytest

from ctconsensus.cli import main
from ctconsensus.graph import DiGraph, complete, empty
from ctconsensus.records import ResultRecord, canonical_json


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out)


def _strip(record):
    record = dict(record)
    record.pop("timing")
    return canonical_json(record)


def test_check_examples(capsys, graph_file):
    code, rec = run(capsys, "check", "--graph", graph_file(complete(4)), "--f", "1")
    assert code == 0
    assert rec["result"] == {"ct": True, "d": 1, "async": True}

    code, rec = run(capsys, "check", "--graph", graph_file(empty(2)), "--f", "0")
    assert rec["result"]["ct"] is False
    assert rec["result"]["ct_witness"] == {"F": [], "S_i": [0], "S_j": [1], "Rem": []}

    code, rec = run(capsys, "check", "--graph", graph_file(complete(2)), "--f", "1")
    w = rec["result"]["async_witness"]
    assert rec["result"]["async"] is False and w["L"] == [0] and w["R"] == [1] and w["C"] == []


def test_sim_minmax_example(capsys, graph_file, tmp_path):
    trace = tmp_path / "t.csv"
    code, rec = run(capsys, "sim", "--graph", graph_file(complete(3)), "--algorithm", "minmax", "--inputs", "011", "--seed", "7", "--trace", str(trace))
    assert code == 0
    v = rec["result"]["verdict"]
    assert v["agreement"] and v["validity"] and v["termination"]
    assert trace.read_text().startswith("iteration,phase,round,sender,receiver,payload")


def test_sim_wa_gatekeeper_example(capsys, graph_file):
    code, rec = run(capsys, "sim", "--graph", graph_file(complete(2)), "--algorithm", "wa", "--policy", "gatekeeper-adversary")
    assert code == 0  # the partition condition fails, so disagreement is the expected outcome
    assert rec["result"]["verdict"]["agreement"] is False
    assert rec["result"]["outputs"] == ["0", "1/500"]


def test_sim_mvc_invalid_input_record(capsys, graph_file):
    code, rec = run(capsys, "sim", "--graph", graph_file(complete(4)), "--algorithm", "mvc", "--K", "3", "--inputs", "5,0,1,2")
    assert code == 1
    assert rec["error"]["type"] == "InvalidInput"


def test_sim_mvc_with_schedule_file(capsys, graph_file, tmp_path):
    sched = tmp_path / "s.json"
    sched.write_text(json.dumps([{"node": 0, "phase": 1, "round": 1, "delivered_to": []}]))
    code, rec = run(capsys, "sim", "--graph", graph_file(complete(4)), "--algorithm", "mvc", "--K", "3", "--inputs", "1,3,3,3", "--schedule", str(sched))
    assert code == 0
    assert rec["result"]["outputs"] == [None, 3, 3, 3]
    assert rec["result"]["checks"]["invariant_violations"] == []


def test_sim_wa_scenario_file(capsys, graph_file, tmp_path):
    scen = tmp_path / "scenario.json"
    scen.write_text(
        json.dumps(
            {
                "inputs": ["0", "0", "1", "1"],
                "epsilon": "1/8",
                "policy": {"mode": "uniform-random", "seed": 4, "bounds": [1, 10]},
                "crashes": [{"node": 3, "event_index": 9, "partial_send": [0]}],
                "p_end_override": 12,
            }
        )
    )
    code, rec = run(capsys, "sim", "--graph", graph_file(complete(4)), "--algorithm", "wa", "--scenario", str(scen))
    assert code == 0
    assert rec["config"]["p_end"] == 12
    assert rec["result"]["crashed"] == [3]
    assert rec["result"]["verdict"]["agreement"]


def test_sweep_minmax_and_determinism(capsys, graph_file):
    g = graph_file(complete(4))
    code, a = run(capsys, "sweep", "--graph", g, "--algorithm", "minmax", "--count", "300", "--seed", "3")
    assert code == 0 and a["result"]["all_true"] == a["result"]["runs"] == 300 * 16
    _, b = run(capsys, "sweep", "--graph", g, "--algorithm", "minmax", "--count", "300", "--seed", "3")
    assert _strip(a) == _strip(b)


@pytest.mark.parametrize("algorithm, extra", [("minmax", ["--inputs", "0110"]), ("mvc", ["--K", "3", "--inputs", "0,3,2,1"]), ("wa", ["--inputs", "0,1,1/2,1"])])
def test_sweep_of_one_equals_sim(capsys, graph_file, algorithm, extra):
    g = graph_file(complete(4))
    _, sim = run(capsys, "sim", "--graph", g, "--algorithm", algorithm, "--seed", "5", "--schedule", "random", *extra)
    _, sweep = run(capsys, "sweep", "--graph", g, "--algorithm", algorithm, "--seed", "5", "--schedule", "random", "--count", "1", *extra)
    v = sim["result"]["verdict"]
    assert sweep["result"]["runs"] == 1
    assert sweep["result"]["all_true"] == int(v["agreement"] and v["validity"] and v["termination"])


def test_sweep_on_infeasible_graph_reports_without_failing(capsys, graph_file):
    code, rec = run(capsys, "sweep", "--graph", graph_file(empty(3)), "--algorithm", "minmax", "--f", "0", "--count", "2")
    assert code == 0
    assert rec["result"]["feasible"] is False and rec["result"]["agreement_failures"] > 0


def test_oracle_scopes(capsys):
    for scope in ("graphs-n4", "diameters", "async-n5"):
        code, rec = run(capsys, "oracle", "--scope", scope)
        assert code == 0 and rec["result"]["mismatches"] == 0
    assert rec["result"]["complete"]["K5,f=2"] is True


def test_verify_fixed(capsys):
    code, rec = run(capsys, "verify-fixed", "--f", "1")
    assert code == 0
    assert rec["result"]["tables"] == 64 and rec["result"]["falsified"] == 64
    assert len(rec["result"]["per_table"]) == 64
    code, rec = run(capsys, "verify-fixed", "--f", "0")
    assert code == 1 and rec["error"]["type"] == "InvalidArgument"


def test_out_file_matches_stdout(capsys, graph_file, tmp_path):
    out = tmp_path / "r.json"
    code, rec = run(capsys, "check", "--graph", graph_file(complete(3)), "--out", str(out))
    assert json.loads(out.read_text()) == rec
    assert rec["config_digest"] == ResultRecord("check", rec["config"], True, {}).config_digest


def test_parse_errors_exit_one(capsys, tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("n 3\n0 1\n0 1\n")
    code, rec = run(capsys, "check", "--graph", str(bad))
    assert code == 1
    assert "line 3" in rec["error"]["message"]
    code, rec = run(capsys, "check", "--graph", str(tmp_path / "missing.txt"))
    assert code == 1


def test_usage_errors_exit_one(capsys, graph_file):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["sim", "--graph", graph_file(complete(3))])
    assert exc.value.code == 1
    code, rec = run(capsys, "sim", "--graph", graph_file(complete(3)), "--algorithm", "minmax")
    assert code == 1 and "--inputs" in rec["error"]["message"]


def test_property_failure_exits_two(capsys, graph_file, monkeypatch):
    from ctconsensus import cli

    def broken(*a, **k):
        return ResultRecord("oracle", {"scope": "graphs-n4"}, False, {"mismatches": 1})

    monkeypatch.setitem(cli.suites.ORACLE_SCOPES, "graphs-n4", broken)
    code, _ = run(capsys, "oracle", "--scope", "graphs-n4")
    assert code == 2


def test_module_entry_point(tmp_path):
    g = tmp_path / "k3.txt"
    complete(3).save(g)
    proc = subprocess.run([sys.executable, "-m", "ctconsensus", "check", "--graph", str(g)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["result"]["ct"] is True
