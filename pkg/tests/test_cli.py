from __future__ import annotations

import io
import json

import pytest

from psworld import load_model, parse_model, serialize_model
from psworld.cli import main
from psworld.repl import Session, run

from conftest import FIXTURES, MAINTENANCE_PORT, corpus_text


@pytest.fixture
def corpus_file(tmp_path):
    p = tmp_path / "traffic.psw"
    p.write_text(corpus_text())
    return str(p)


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestExitCodes:
    def test_check_clean(self, capsys, corpus_file):
        code, out, _ = run_cli(capsys, "check", corpus_file)
        assert code == 0 and "0 error(s)" in out

    def test_check_missing_file(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, "check", str(tmp_path / "nope.psw"))
        assert code == 2 and "error[io]" in err

    def test_check_broken_boundary(self, capsys):
        code, out, err = run_cli(capsys, "check", str(FIXTURES / "broken-boundary.psw"), "--format", "json")
        assert code == 1
        rules = {d["rule"] for d in json.loads(out)["diagnostics"]}
        assert rules == {"boundary-not-partition"}
        assert "[Def9]" in err

    def test_check_syntax_error(self, capsys):
        code, _, err = run_cli(capsys, "check", str(FIXTURES / "duplicate-id.psw"))
        assert code == 1 and "duplicate-id" in err

    def test_bad_arguments(self, capsys):
        assert main(["frobnicate"]) == 2
        assert main(["eval"]) == 2
        capsys.readouterr()

    def test_audit_sufficient(self, capsys, corpus_file):
        code, out, _ = run_cli(capsys, "audit", corpus_file, "--format", "json")
        assert code == 0 and json.loads(out)["verdict"] == "sufficient"

    def test_audit_unknown_context(self, capsys, corpus_file):
        code, _, err = run_cli(capsys, "audit", corpus_file, "--contexts", "OpsC_9")
        assert code == 2 and "unknown-context" in err

    def test_impact(self, capsys, corpus_file):
        code, out, _ = run_cli(
            capsys, "impact", corpus_file, "--outcome", "outcome pollution-reduced desired for {g_12}", "--format", "json"
        )
        assert code == 1
        rep = json.loads(out)
        assert {d["construct"] for d in rep["deltas"]} == {"grounding"}

    def test_eval_explain(self, capsys, corpus_file):
        code, out, _ = run_cli(capsys, "eval", corpus_file, "oc_1_2", "OpsC_1", "--explain")
        assert code == 0
        assert out.splitlines()[0] == "oc_1_2 @ OpsC_1 = TRUE (external)"
        assert "i_timer: clock.timekeeping fires, produces timer_trigger" in out

    def test_outcomes_matrix(self, capsys, corpus_file):
        code, out, _ = run_cli(capsys, "outcomes", corpus_file, "--format", "json")
        rows = json.loads(out)["outcomes"]
        assert code == 0 and rows["oc_1_4"]["class"] == "internal"

    def test_minimal_sets(self, capsys, corpus_file):
        code, out, _ = run_cli(capsys, "minimal-sets", corpus_file, "oc_2_1")
        assert code == 0 and out.strip() == "oc_2_1: {i_short}"

    def test_reduce_refused(self, capsys, corpus_file):
        code, _, err = run_cli(capsys, "reduce", corpus_file, "--remove", "i_timer")
        assert code == 1 and "not-removable" in err

    def test_reduce_maintenance(self, capsys, tmp_path):
        p = tmp_path / "m.psw"
        p.write_text(corpus_text() + MAINTENANCE_PORT)
        out_path = tmp_path / "r.psw"
        code, _, _ = run_cli(capsys, "reduce", str(p), "--remove", "i_maint", "-o", str(out_path))
        assert code == 0
        assert "i_maint" not in load_model(out_path).interaction_map

    def test_rescope_and_verify(self, capsys, corpus_file, tmp_path):
        after = tmp_path / "clock.psw"
        code, out, _ = run_cli(capsys, "rescope", corpus_file, "--internal", "clock", "-o", str(after))
        assert code == 0 and "i_timer: internal -> outbound" in out
        code, out, _ = run_cli(capsys, "verify-rescope", corpus_file, str(after))
        assert code == 0
        assert "oc_1_4 @ OpsC_1: True / True ok, internal -> external" in out
        assert out.rstrip().endswith("truth preserved")

    def test_rescope_env(self, capsys, corpus_file):
        code, _, err = run_cli(capsys, "rescope", corpus_file, "--internal", "day_night")
        assert code == 1 and "env-cannot-be-internal" in err

    def test_simulate(self, capsys, corpus_file):
        code, out, _ = run_cli(capsys, "simulate", corpus_file, "--schedule", "OpsC_1")
        assert code == 0 and "traffic_light.signal_control: Red --timer_trigger" in out

    def test_repl_script(self, capsys):
        code, out, _ = run_cli(capsys, "repl", "--script", str(FIXTURES / "framing_session.txt"))
        assert code == 0 and "verdict: insufficient" in out


class TestRepl:
    def test_transcript_builds_expected_model(self):
        lines = (FIXTURES / "framing_session.txt").read_text().splitlines()
        s = Session.replay(lines)
        assert serialize_model(s.model) == (FIXTURES / "framing_session_final.psw").read_text()

    def test_history_replays(self):
        lines = (FIXTURES / "framing_session.txt").read_text().splitlines()
        s = Session.replay(lines)
        again = Session.replay(s.commands)
        assert again.model == s.model
        assert parse_model(serialize_model(s.model)) == s.model

    def test_undo_restores(self):
        s = Session()
        s.execute("entity A kind internal { function f domain {x} codomain {y} }")
        before = s.model
        assert s.execute("entity B kind external") == "ok"
        assert s.execute("undo").startswith("undone: entity B kind external")
        assert s.model == before
        assert s.execute("undo").startswith("undone")
        assert s.execute("undo") == "nothing to undo"

    def test_unknown_context_keeps_state(self, corpus):
        s = Session(corpus)
        out = s.execute("activate OpsC_9")
        assert out.startswith("error[unknown-context]")
        assert s.model is corpus and s.history == []

    def test_usage(self):
        s = Session()
        assert s.execute("eval Y").startswith("usage: eval")
        assert s.execute("frobnicate").startswith("unknown command")

    def test_duplicate_rejected(self):
        s = Session()
        s.execute("entity A kind internal { function f domain {x} codomain {y} }")
        out = s.execute("entity A kind external")
        assert "duplicate-id" in out and len(s.history) == 1

    def test_why_needs_activation(self, corpus):
        assert Session(corpus).execute("why i_veh").startswith("no context activated")

    def test_run_loop_stops_on_quit(self):
        buf = io.StringIO()
        s = Session(out=buf)
        assert run(s, io.StringIO("entity E kind environment\nquit\nentity F kind environment\n"), prompt=False) == 0
        assert [e.command for e in s.history] == ["entity E kind environment"]
