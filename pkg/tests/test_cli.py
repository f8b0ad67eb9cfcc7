import json

import jsonschema
import pytest

from taintvm import Config, Mode, apply_transaction
from taintvm.cli import (
    BENCH_SCHEMA,
    REPORT_SCHEMA,
    SCHEMA_PATH,
    bench,
    main,
    resolve_scenario,
    run_report,
    select_fixtures,
)
from taintvm.corpus import assemble, load_fixture

BRANCH_ON_SLOT = "PUSH 5\nPUSH 0xA\nSLOAD\nLT\nJUMPI @dst\nSTOP\ndst:\nJUMPDEST\n"


def _manifest(tmp_path, code_hex, expect=None, storage=None, name="tmp"):
    tx = {"label": "only", "from": "alice", "to": "target"}
    if expect is not None:
        tx["expect"] = expect
    doc = {
        "name": name,
        "accounts": {
            "alice": {"address": "0xa11ce", "balance": 100},
            "target": {"address": "0xc0de", "code": code_hex, "storage": storage or {}},
        },
        "transactions": [tx],
    }
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(doc))
    return path


def _json_out(capsys, argv):
    code = main(argv)
    return code, json.loads(capsys.readouterr().out)


# -- exit codes ---------------------------------------------------------------------


def test_run_known_fixture_exits_zero(capsys):
    assert main(["run", "classic-dao"]) == 0
    out = capsys.readouterr().out
    assert "classic-dao" in out and "Attack" in out and "world digest" in out


def test_unknown_fixture_and_missing_path_exit_two(capsys, tmp_path):
    assert main(["run", "no-such-fixture"]) == 2
    assert main(["run", str(tmp_path / "missing.json")]) == 2
    err = capsys.readouterr().err
    assert "unknown fixture" in err and "not found" in err


def test_bad_manifest_exits_two(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"accounts": {}}')
    assert main(["run", str(bad)]) == 2
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    assert main(["run", str(broken)]) == 2


def test_expectation_mismatch_exits_one(capsys, tmp_path):
    path = _manifest(tmp_path, "00", expect={"verdict": "Attack"})
    assert main(["run", str(path)]) == 1
    assert "MISMATCH" in capsys.readouterr().out


def test_usage_errors_exit_two(capsys):
    assert main([]) == 2
    assert main(["run"]) == 2
    assert main(["run", "classic-dao", "--mode", "loud"]) == 2


def test_one_error_among_scenarios_wins(capsys):
    assert main(["run", "classic-dao", "no-such-fixture"]) == 2


# -- reports ------------------------------------------------------------------------


def test_json_report_validates_against_schema(capsys):
    schema = json.loads(SCHEMA_PATH.read_text())
    code, doc = _json_out(capsys, ["run", "classic-dao", "fp-delete", "benign-token", "--json"])
    assert code == 0
    jsonschema.validate(doc, schema)
    assert doc["schema"] == REPORT_SCHEMA and doc["ok"] is True
    dao = doc["scenarios"][0]
    assert dao["attack_count"] >= 1
    assert dao["transactions"][-1]["status"] == "AttackAborted"


def test_json_report_with_trace_validates(capsys, tmp_path):
    schema = json.loads(SCHEMA_PATH.read_text())
    path = _manifest(tmp_path, assemble(BRANCH_ON_SLOT).hex(), storage={"0xa": 3})
    code, doc = _json_out(capsys, ["run", str(path), "--trace", "--json", "--mode", "monitor"])
    assert code == 0
    jsonschema.validate(doc, schema)


def test_run_report_digest_matches_replay_across_configurations():
    fx = load_fixture("classic-dao")
    monitor = run_report(fx, "monitor")
    off = run_report(fx, "monitor", taint=False)
    enforce = run_report(fx, "enforce")
    # the monitor leaves execution untouched
    assert monitor["world_digest"] == off["world_digest"]
    assert enforce["world_digest"] != off["world_digest"]
    assert off["attack_count"] == 0 and off["mismatches"] == []
    world = fx.world()
    for i, ftx in enumerate(fx.transactions):
        apply_transaction(world, ftx.transaction, Config(mode=Mode.ENFORCE), i)
    assert world.digest() == enforce["world_digest"]


def test_mode_defaults_to_enforce():
    assert run_report(load_fixture("benign-loop"))["mode"] == "enforce"


def test_resolve_scenario_accepts_paths_and_names(tmp_path):
    path = _manifest(tmp_path, "00", name="inline")
    assert resolve_scenario(str(path)).name == "inline"
    assert resolve_scenario("fp-delete").name == "fp-delete"


# -- trace ----------------------------------------------------------------------------


def test_trace_has_one_record_per_instruction():
    fx = load_fixture("cross-function")
    report = run_report(fx, trace=True)
    world = fx.world()
    for i, ftx in enumerate(fx.transactions):
        receipt = apply_transaction(world, ftx.transaction, Config(), i)
        assert len(report["transactions"][i]["trace"]) == receipt.instructions


def test_stop_only_contract_traces_one_record(capsys, tmp_path):
    path = _manifest(tmp_path, "00")
    assert main(["trace", str(path)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 1
    rec = json.loads(lines[0])
    assert rec["op"] == "STOP" and rec["pc"] == 0 and rec["depth"] == 1 and rec["tx"] == 0


def test_branch_record_carries_storage_taint(capsys, tmp_path):
    path = _manifest(tmp_path, assemble(BRANCH_ON_SLOT).hex(), storage={"0xa": 3})
    assert main(["trace", str(path)]) == 0
    records = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
    jumpi = next(r for r in records if r["op"] == "JUMPI")
    dest_taint, cond_taint = jumpi["taints"]
    assert dest_taint == [] and len(cond_taint) == 1
    assert "0xa" in json.dumps(cond_taint)
    sstores = [r for r in records if r["lock_check"] is not None]
    assert sstores == []


def test_lock_check_is_recorded_on_sstore():
    report = run_report(load_fixture("classic-dao"), "monitor", trace=True)
    checks = [r["lock_check"] for tx in report["transactions"] for r in tx["trace"]
              if r["op"] == "SSTORE"]
    assert "attack" in checks and "allow" in checks


def test_trace_unknown_scenario_exits_two(capsys):
    assert main(["trace", "no-such-fixture"]) == 2


# -- bench ----------------------------------------------------------------------------


def test_bench_smoke(capsys):
    code, doc = _json_out(capsys, ["bench", "benign-*", "-n", "1", "-w", "0", "--json"])
    assert code == 0
    assert doc["schema"] == BENCH_SCHEMA and doc["iterations"] == 1
    assert set(doc["configurations"]) == {"taint-off", "taint-on"}
    assert doc["transactions_timed"] > 0


def test_bench_human_output(capsys):
    assert main(["bench", "benign-token", "-n", "2", "-w", "1"]) == 0
    out = capsys.readouterr().out
    assert "overhead:" in out and "taint-on" in out


def test_bench_excludes_flagged_transactions():
    result = bench([load_fixture("classic-dao")], iterations=1)
    assert result["transactions_excluded"] == 1
    assert result["transactions_timed"] == 1


def test_bench_time_scales_with_corpus():
    fixtures = select_fixtures(["benign-*"], benign_only=True)
    bench(fixtures, 2)  # warm caches
    single = bench(fixtures, 5)["configurations"]["taint-off"]["mean_ms"]
    double = bench(fixtures * 2, 5)["configurations"]["taint-off"]["mean_ms"]
    assert 1.0 <= double / single <= 4.0


def test_bench_rejects_bad_arguments(capsys):
    assert main(["bench", "nothing-matches-*"]) == 2
    assert main(["bench", "-n", "0"]) == 2
    assert main(["bench", "-w", "-1"]) == 2


def test_select_fixtures_filters_and_dedupes(tmp_path):
    names = [f.name for f in select_fixtures(["benign-*", "benign-loop"], False)]
    assert names == sorted(set(names), key=names.index)
    assert "benign-loop" in names
    assert all(f.is_benign for f in select_fixtures(["*"], True))
    path = _manifest(tmp_path, "00", name="adhoc")
    assert [f.name for f in select_fixtures([str(path)], False)] == ["adhoc"]


# -- parallel and small tools ---------------------------------------------------------


def test_parallel_run_matches_serial(capsys):
    names = ["classic-dao", "fp-delete", "benign-loop"]
    _, serial = _json_out(capsys, ["run", *names, "--json"])
    _, parallel = _json_out(capsys, ["run", *names, "--json", "--parallel", "2"])
    strip = lambda doc: [{k: v for k, v in s.items() if k != "timing"} for s in doc["scenarios"]]
    assert strip(serial) == strip(parallel)


def test_list_shows_every_fixture(capsys):
    from taintvm.corpus import fixture_names

    assert main(["list"]) == 0
    out = capsys.readouterr().out
    for name in fixture_names():
        assert name in out


def test_asm_and_disasm_commands(capsys, tmp_path):
    src = tmp_path / "p.asm"
    src.write_text("PUSH 1\nPUSH 2\nADD\n")
    assert main(["asm", str(src)]) == 0
    hexcode = capsys.readouterr().out.strip()
    assert hexcode == "0x6001600201"
    assert main(["disasm", hexcode]) == 0
    assert capsys.readouterr().out.split() == ["PUSH1", "0x01", "PUSH1", "0x02", "ADD"]
    blob = tmp_path / "code.hex"
    blob.write_text(hexcode + "\n")
    assert main(["disasm", str(blob), "--offsets"]) == 0
    assert "; 0x0002" in capsys.readouterr().out.splitlines()[1]


def test_asm_and_disasm_errors(capsys, tmp_path):
    bad = tmp_path / "bad.asm"
    bad.write_text("FROB\n")
    assert main(["asm", str(bad)]) == 2
    assert main(["asm", str(tmp_path / "none.asm")]) == 2
    assert main(["disasm", "0xzz"]) == 2


def test_opcodes_prints_json_table(capsys):
    assert main(["opcodes"]) == 0
    table = json.loads(capsys.readouterr().out)
    assert table
