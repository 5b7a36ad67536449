import json
import subprocess
import sys

import pytest

from erld.cli import main
from erld.model import load_json
from tests.conftest import DATA


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def generated(tmp_path, capsys):
    code, out, _ = run(capsys, "generate", "--entities", 60, "--seed", 2, "--out", tmp_path / "c.jsonl",
                       "--gold", tmp_path / "g.tsv", "--schema-out", tmp_path / "s.json",
                       "--rules-out", tmp_path / "r.json", "--plain-rules-out", tmp_path / "r2.json")
    assert code == 0
    assert json.loads(out)["documents"] > 60
    return tmp_path


def test_resolve_evaluate_and_continue(generated, capsys):
    t = generated
    lines = (t / "c.jsonl").read_text().splitlines()
    (t / "a.jsonl").write_text("\n".join(lines[:-10]) + "\n")
    (t / "b.jsonl").write_text("\n".join(lines[-10:]) + "\n")
    code, out, _ = run(capsys, "resolve", "--schema", t / "s.json", "--rules", t / "r.json", "--in", t / "a.jsonl",
                       "--state", t / "st", "--out", t / "e1.jsonl")
    assert code == 0 and json.loads(out)["mode"] == "batch"
    code, out, _ = run(capsys, "resolve-inc", "--state", t / "st", "--in", t / "b.jsonl", "--out", t / "e2.jsonl")
    summary = json.loads(out)
    assert code == 0 and summary["mode"] == "incremental" and summary["documents"] == 10
    code, out, _ = run(capsys, "evaluate", "--pred", t / "e2.jsonl", "--gold", t / "g.tsv", "--report", t / "rep.json")
    header, row = out.strip().splitlines()
    assert header.split("\t")[:3] == ["precision", "recall", "f1"]
    assert float(row.split("\t")[0]) == load_json(t / "rep.json")["precision"]
    assert not (t / "st" / ".lock").exists()


def test_resolve_inc_without_state_creates_nothing(tmp_path, capsys):
    code, _, err = run(capsys, "resolve-inc", "--state", tmp_path / "nope", "--in", DATA / "sample_corpus.jsonl",
                       "--out", tmp_path / "e.jsonl")
    assert code == 1 and json.loads(err)["error"] == "StateError"
    assert not (tmp_path / "nope").exists()


def test_benefit_and_baseline(generated, capsys):
    t = generated
    plain = load_json(t / "r2.json")
    assert not any(c.get("predicate") == "traversal" for r in plain["rules"] for c in r["all"])
    code, out, _ = run(capsys, "benefit", "--corpus", t / "c.jsonl", "--gold", t / "g.tsv", "--rules-a", t / "r.json",
                       "--rules-b", t / "r2.json", "--schema", t / "s.json")
    report = json.loads(out)
    assert code == 0 and report["recall_gain"] >= 0
    code, out, _ = run(capsys, "baseline-allpairs", "--in", t / "c.jsonl", "--rules", t / "r.json", "--out", t / "ap.jsonl")
    assert code == 0 and json.loads(out)["match_evaluations"] > 0
    code, out, _ = run(capsys, "evaluate", "--pred", t / "ap.jsonl", "--gold", t / "g.tsv")
    assert code == 0


def test_custom_lsh_and_traversal_flags(tmp_path, capsys):
    code, out, _ = run(capsys, "resolve", "--schema", DATA / "sample_schema.json", "--rules", DATA / "sample_rules.json",
                       "--in", DATA / "sample_corpus.jsonl", "--state", tmp_path / "st", "--out", tmp_path / "e.jsonl",
                       "--lsh-m", 2, "--lsh-n", 8, "--lsh-seed", 3, "--max-steps", 2, "--ust-threshold", 5)
    assert code == 0
    config = load_json(tmp_path / "st" / "config.json")
    assert (config["lsh"]["m"], config["lsh"]["n"], config["lsh"]["rng_seed"]) == (2, 8, 3)
    assert config["traversal"] == {"max_dst_ust_steps": 2, "ust_fanout_threshold": 5}


def test_errors_are_one_json_line(tmp_path, capsys):
    code, out, err = run(capsys, "evaluate", "--pred", tmp_path / "missing.jsonl", "--gold", tmp_path / "g.tsv")
    assert code == 1 and out == ""
    payload = json.loads(err.strip())
    assert payload["error"] == "FileNotFoundError"


def test_locked_state_is_refused(tmp_path, capsys):
    run(capsys, "resolve", "--schema", DATA / "sample_schema.json", "--rules", DATA / "sample_rules.json",
        "--in", DATA / "sample_corpus.jsonl", "--state", tmp_path / "st", "--out", tmp_path / "e0.jsonl")
    (tmp_path / "st" / ".lock").write_text("1")
    code, _, err = run(capsys, "resolve-inc", "--state", tmp_path / "st", "--in", DATA / "sample_corpus.jsonl",
                       "--out", tmp_path / "e.jsonl")
    assert code == 1 and json.loads(err)["error"] == "StateLockedError"


def test_bad_corpus_line_reported(tmp_path, capsys):
    (tmp_path / "c.jsonl").write_text('{"type": "PAN", "attrs": {"pan_no": "1"}}\n{"type": "PAN", "attrs": {}}\n')
    code, _, err = run(capsys, "resolve", "--schema", DATA / "sample_schema.json", "--rules", DATA / "sample_rules.json",
                       "--in", tmp_path / "c.jsonl", "--state", tmp_path / "st", "--out", tmp_path / "e.jsonl")
    payload = json.loads(err)
    assert code == 1 and payload["error"] == "CorpusError" and "line 2" in payload["message"]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "erld", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "resolve-inc" in proc.stdout
