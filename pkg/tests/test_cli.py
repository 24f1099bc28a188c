import json
import shutil

import pytest

from conftest import CORPUS
from probpol.cli import FAIL, OK, USAGE, main
from probpol.emit import validate_json

LISTING = str(CORPUS / "listing1.srdsl")
TRACE = str(CORPUS / "traces" / "soft_shadowing.txt")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_check_valid_file(capsys):
    code, out, _ = run(capsys, "check", str(CORPUS / "signal_group.srdsl"))
    assert code == OK and out == ""


def test_check_warning_only_passes_unless_strict(capsys):
    code, out, _ = run(capsys, "check", LISTING)
    assert code == OK and "PP301" in out
    code, _, _ = run(capsys, "check", "--strict", LISTING)
    assert code == FAIL


def test_check_syntax_error(capsys):
    code, out, _ = run(capsys, "check", str(CORPUS / "invalid" / "syntax_error.srdsl"))
    assert code == FAIL and "error[PP001]" in out


def test_check_missing_file(capsys):
    code, _, err = run(capsys, "check", "does/not/exist.srdsl")
    assert code == USAGE and "cannot read" in err


def test_check_json_matches_schema(capsys):
    code, out, _ = run(capsys, "check", "--format", "json", LISTING,
                       str(CORPUS / "invalid" / "policy_overlap.srdsl"))
    doc = json.loads(out)
    validate_json(doc, "diagnostics.v1.json")
    assert code == FAIL
    assert {d["code"] for d in doc} >= {"PP301", "PP801"}


def test_check_fix_is_idempotent(tmp_path, capsys):
    f = tmp_path / "g.srdsl"
    shutil.copy(CORPUS / "guard_unguarded.srdsl", f)
    code, _, _ = run(capsys, "check", "--fix", str(f))
    once = f.read_text()
    assert code == OK and "NOT domain(\"math\")" in once
    run(capsys, "check", "--fix", str(f))
    assert f.read_text() == once
    code, out, _ = run(capsys, "check", "--strict", str(f))
    assert code == OK and out == ""


def test_compile_and_decompile(tmp_path, capsys):
    out_json = tmp_path / "c.json"
    assert run(capsys, "compile", LISTING, "--out", str(out_json))[0] == OK
    validate_json(json.loads(out_json.read_text()), "config.v1.json")
    code, src, _ = run(capsys, "decompile", str(out_json))
    assert code == OK and "ROUTE math_route" in src


def test_compile_refuses_errors(capsys):
    code, out, err = run(capsys, "compile", str(CORPUS / "invalid" / "tree_missing_else.srdsl"))
    assert code == FAIL and out == "" and "PP701" in err


def test_decompile_bad_inputs(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"version": 1}')
    code, _, err = run(capsys, "decompile", str(bad))
    assert code == FAIL and "schema violation" in err
    bad.write_text("nope")
    assert run(capsys, "decompile", str(bad))[0] == USAGE


def test_test_command_tap(capsys):
    code, out, _ = run(capsys, "test", str(CORPUS / "test_blocks.srdsl"))
    lines = out.splitlines()
    n = int(lines[0].split("..")[1])
    assert code == OK and n == len([x for x in lines if x.startswith("ok ")])
    assert lines[1].startswith("ok 1 - ")


def test_test_command_without_tests(capsys):
    assert run(capsys, "test", str(CORPUS / "signal_group.srdsl"))[0] == USAGE


def test_test_command_failure(tmp_path, capsys):
    f = tmp_path / "t.srdsl"
    f.write_text('SIGNAL keyword k { keywords: ["refund"] }\n'
                 'ROUTE r { PRIORITY 1 WHEN keyword("k") MODEL "m" }\n'
                 'TEST t {\n  "refund please" -> r\n  "hello" -> r\n}\n')
    code, out, _ = run(capsys, "test", str(f))
    assert code == FAIL and "ok 1 - refund please -> r" in out
    assert "not ok 2 - hello -> <none>" in out and "expected r, got <none>" in out


def test_conflicts_text_and_exit(capsys):
    code, out, _ = run(capsys, "conflicts", str(CORPUS / "shadowing.srdsl"))
    assert code == FAIL
    assert "Shadowing (type 2)" in out and "Redundancy (type 3)" in out
    assert "note: soft shadowing skipped" in out


def test_conflicts_calibration_only_is_ok(capsys):
    code, out, _ = run(capsys, "conflicts", LISTING)
    assert code == OK and "CalibrationSuspect" in out


def test_conflicts_json_with_corpus(capsys):
    code, out, _ = run(capsys, "conflicts", "--format", "json", "--corpus", TRACE,
                       str(CORPUS / "soft_shadowing.srdsl"))
    doc = json.loads(out)
    validate_json(doc, "conflicts.v1.json")
    assert code == FAIL and doc["notes"] == []
    assert [r["kind"] for r in doc["reports"]].count("SoftShadowing") == 1


def test_simulate_output(tmp_path, capsys):
    out = tmp_path / "s.json"
    code, _, _ = run(capsys, "simulate", str(CORPUS / "soft_shadowing.srdsl"), "--trace", TRACE,
                     "--mode", "independent", "--out", str(out))
    doc = json.loads(out.read_text())
    validate_json(doc, "simulation.v1.json")
    assert code == OK and doc["mode"] == "independent" and doc["n_queries"] == 11


def test_simulate_empty_trace(tmp_path, capsys):
    empty = tmp_path / "e.txt"
    empty.write_text("\n\n")
    assert run(capsys, "simulate", LISTING, "--trace", str(empty))[0] == USAGE


def test_explain(capsys):
    code, out, _ = run(capsys, "explain", str(CORPUS / "signal_group.srdsl"), "derivative of x squared")
    assert code == OK
    assert "group domain_taxonomy: normalized sum 1.000000" in out
    assert out.splitlines()[-1].startswith("route: ")


def test_explain_attrs(capsys):
    src = str(CORPUS / "semantic_rbac.srdsl")
    code, out, _ = run(capsys, "explain", src, "hello", "--attrs", '{"role": "admin"}')
    assert code == OK
    assert run(capsys, "explain", src, "hello", "--attrs", "[1]")[0] == USAGE


def test_probpol_dim(monkeypatch, capsys):
    monkeypatch.setenv("PROBPOL_DIM", "16")
    assert run(capsys, "explain", LISTING, "integral")[0] == OK
    monkeypatch.setenv("PROBPOL_DIM", "abc")
    assert run(capsys, "explain", LISTING, "integral")[0] == USAGE
    monkeypatch.setenv("PROBPOL_DIM", "1")
    assert run(capsys, "explain", LISTING, "integral")[0] == USAGE


def test_lower(capsys):
    code, out, _ = run(capsys, "lower", str(CORPUS / "decision_tree.srdsl"))
    assert code == OK and "ROUTE routing_policy_else" in out and "DECISION_TREE" not in out


def test_argparse_usage_exit():
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2
