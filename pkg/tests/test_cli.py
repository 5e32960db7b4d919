"""CLI: exit codes, diagnostics formats, corpus verification."""

from __future__ import annotations

import json

import pytest
from conftest import CORPUS

from pvgr.cli import main

SERVER = (CORPUS / "server.pvgr").read_text()
CLIENT_SERVER = (CORPUS / "client_server.pvgr").read_text()
DEADLOCK = (CORPUS / "request_deadlock.pvgr").read_text()


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_check_ok(tmp_path, capsys):
    f = write(tmp_path, "server.pvgr", SERVER)
    assert main(["check", f]) == 0
    out = capsys.readouterr().out
    assert "type: forall s:Session[]. forall a:Dom(1)[]." in out


def test_check_type_error_exit_1(tmp_path, capsys):
    f = write(tmp_path, "bad.pvgr", "close ()")
    assert main(["check", f]) == 1
    err = capsys.readouterr().err
    assert "T-Close" in err


def test_check_parse_error_exit_2(tmp_path, capsys):
    f = write(tmp_path, "empty.pvgr", "")
    assert main(["check", f]) == 2
    assert "error" in capsys.readouterr().err


def test_check_json_diagnostics_schema(tmp_path, capsys):
    f = write(tmp_path, "bad.pvgr", "close ()")
    assert main(["check", f, "--format", "json"]) == 1
    err = capsys.readouterr().err.strip()
    diag = json.loads(err)
    assert diag["severity"] == "error"
    assert diag["code"] == "T-Close"
    assert isinstance(diag["message"], str)
    f2 = write(tmp_path, "empty.pvgr", "")
    assert main(["check", f2, "--format", "json"]) == 2
    diag2 = json.loads(capsys.readouterr().err.strip())
    assert diag2["code"] == "parse"
    assert {"file", "line", "col"} <= set(diag2)


def test_check_json_ok_payload(tmp_path, capsys):
    f = write(tmp_path, "server.pvgr", SERVER)
    assert main(["check", f, "--format", "json"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["ok"] is True
    assert payload["type"].startswith("forall")


def test_run_final_exit_0(tmp_path, capsys):
    f = write(tmp_path, "cs.pvgr", CLIENT_SERVER)
    assert main(["run", f]) == 0
    assert "final" in capsys.readouterr().out


def test_run_deadlock_exit_3_names_blocked_site(tmp_path, capsys):
    f = write(tmp_path, "dl.pvgr", DEADLOCK)
    assert main(["run", f]) == 3
    out = capsys.readouterr().out
    assert "deadlock" in out and "request" in out


def test_run_out_of_fuel_exit_4(tmp_path, capsys):
    f = write(tmp_path, "cs.pvgr", CLIENT_SERVER)
    assert main(["run", f, "--max-steps", "0"]) == 4
    assert "out of fuel" in capsys.readouterr().out


def test_run_refuses_ill_typed_without_flag(tmp_path, capsys):
    f = write(tmp_path, "bad.pvgr", "nu a b : !Int.End . (<send () (chan a)> | <send () (chan b)>)")
    assert main(["run", f]) == 1
    capsys.readouterr()
    assert main(["run", f, "--no-check"]) == 3  # the send/send deadlock


def test_run_check_harness(tmp_path, capsys):
    f = write(tmp_path, "cs.pvgr", CLIENT_SERVER)
    assert main(["run", f, "--check"]) == 0


def test_run_trace_format(tmp_path, capsys):
    f = write(tmp_path, "cs.pvgr", CLIENT_SERVER)
    assert main(["run", f, "--trace"]) == 0
    lines = [l for l in capsys.readouterr().out.splitlines() if "\t" in l]
    assert lines
    for line in lines:
        idx, rule, redex = line.split("\t", 2)
        assert idx.isdigit()
        assert rule.startswith("CR-")


def test_corpus_all_green(capsys):
    assert main(["corpus", str(CORPUS)]) == 0


def test_corpus_perturbed_golden_fails(tmp_path, capsys):
    write(tmp_path, "server.pvgr", SERVER)
    (tmp_path / "server.pvgr.expected").write_text("type: Unit\n")
    assert main(["corpus", str(tmp_path)]) == 1
    out = capsys.readouterr().out
    assert "server.pvgr" in out and "FAIL" in out


def test_corpus_empty_dir_warns(tmp_path, capsys):
    assert main(["corpus", str(tmp_path)]) == 0
    assert "warning" in capsys.readouterr().err


def test_check_idempotent_no_side_effects(tmp_path, capsys):
    f = write(tmp_path, "server.pvgr", SERVER)
    assert main(["check", f]) == 0
    first = capsys.readouterr().out
    assert main(["check", f]) == 0
    assert capsys.readouterr().out == first
