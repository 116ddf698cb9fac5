import csv
import json
import os
import shutil

import pytest

from touchintent.cli import PLOT_COLUMNS, main
from touchintent.config import default_config_path
from touchintent.traces import file_digest, read_trace


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """A small corpus plus one replay trace, generated through the CLI."""
    d = tmp_path_factory.mktemp("cli")
    spec = d / "scn.json"
    spec.write_text(json.dumps({"kind": "collision", "duration": 4.0, "seed": 3,
                                "schedule": {"contact": [1.0, 3.0]}, "push_force": 12.0}))
    assert main(["gen", "--spec", str(spec), "--out", str(d / "replay.jsonl")]) == 0
    for i, kind in enumerate(("manipulation", "distracted", "collision", "idle")):
        assert main(["gen", "--kind", kind, "--seed", str(20 + i), "--out", str(d / f"c{i}.jsonl")]) == 0
    return d


def outputs(d, tag):
    """Run every seeded command, writing into ``d/tag``; return file digests."""
    o = d / tag
    o.mkdir()
    traces = str(d / "c*.jsonl")
    assert main(["gen", "--kind", "distracted", "--seed", "5", "--out", str(o / "g.jsonl")]) == 0
    assert main(["train", "--traces", traces, "--out", str(o / "knn.json")]) == 0
    assert main(["train", "--traces", traces, "--model", "mlp", "--epochs", "50", "--seed", "2",
                 "--out", str(o / "mlp.json")]) == 0
    assert main(["eval", "--traces", traces, "--model", str(o / "knn.json"), "--out", str(o / "e.json")]) == 0
    assert main(["eval", "--traces", traces, "--retrain", "--seed", "4", "--out", str(o / "cv.json")]) == 0
    assert main(["ablate", "--traces", traces, "--masks", "TS;TS,HP;TS,HP,HS,GA,GS", "--seed", "1",
                 "--out", str(o / "ab.json")]) == 0
    assert main(["replay", "--trace", str(d / "replay.jsonl"), "--model", str(o / "knn.json"),
                 "--out", str(o / "log.jsonl")]) == 0
    assert main(["export-plot", "--log", str(o / "log.jsonl"), "--out", str(o / "plot.csv")]) == 0
    return {p.name: file_digest(p) for p in sorted(o.iterdir())}


@pytest.fixture(scope="module")
def two_runs(workdir):
    return outputs(workdir, "a"), outputs(workdir, "b")


def test_seeded_commands_reproduce_hashes(two_runs):
    a, b = two_runs
    assert len(a) == 8
    assert a == b


def test_export_plot_rows(workdir, two_runs):
    n = len(read_trace(workdir / "replay.jsonl").frames)
    with open(workdir / "a" / "plot.csv") as f:
        rows = list(csv.reader(f))
    assert tuple(rows[0]) == PLOT_COLUMNS
    assert len(rows) - 1 == n


def test_replay_log_header(workdir, two_runs):
    with open(workdir / "a" / "log.jsonl") as f:
        head = json.loads(f.readline())
    assert head["scenario"]["kind"] == "collision"
    assert head["verdict"]["max_deviation"] <= 0.05


def test_report_identity(workdir, two_runs):
    rep = json.loads((workdir / "a" / "cv.json").read_text())
    for r in rep["rows"]:
        total = r["TP"] + r["TN"] + r["FP"] + r["FN"]
        assert abs(r["accuracy"] - (r["TP"] + r["TN"]) / total) <= 1e-12
    assert rep["provenance"]["traces"]


def test_ablation_rows(workdir, two_runs):
    rep = json.loads((workdir / "a" / "ab.json").read_text())
    assert sorted(r["features"] for r in rep["rows"]) == sorted(["TS", "TS,HP", "TS,HP,HS,GA,GS"])


def test_usage_errors_exit_2(workdir, tmp_path, capsys):
    traces = str(workdir / "c*.jsonl")
    with pytest.raises(SystemExit) as e:
        main(["train", "--traces", traces, "--k", "12", "--out", str(tmp_path / "m.json")])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(["frobnicate"])
    assert e.value.code == 2
    assert main(["train", "--traces", str(tmp_path / "none*.jsonl"), "--out", str(tmp_path / "m.json")]) == 2
    assert main(["gen", "--spec", str(tmp_path / "missing.json"), "--out", str(tmp_path / "t.jsonl")]) == 2
    assert main(["gen", "--kind", "juggling", "--out", str(tmp_path / "t.jsonl")]) == 2
    assert main(["train", "--traces", traces, "--features", "TS,XX", "--out", str(tmp_path / "m.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["--config", str(bad), "gen", "--out", str(tmp_path / "t.jsonl")]) == 2


def test_runtime_errors_exit_1(workdir, tmp_path):
    broken = tmp_path / "broken.json"
    broken.write_text(json.dumps({"format_version": 999}))
    assert main(["replay", "--trace", str(workdir / "replay.jsonl"), "--model", str(broken)]) == 1
    trunc = tmp_path / "trunc.jsonl"
    trunc.write_text((workdir / "c0.jsonl").read_text()[:-30])
    assert main(["train", "--traces", str(trunc), "--out", str(tmp_path / "m.json")]) == 1


def test_config_path_env(workdir, tmp_path, monkeypatch):
    cfg = tmp_path / "cfg.json"
    shutil.copy(default_config_path(), cfg)
    monkeypatch.setenv("CONFIG_PATH", str(cfg))
    assert main(["gen", "--kind", "idle", "--seed", "1", "--out", str(tmp_path / "a.jsonl")]) == 0
    cfg.write_text("[]")
    assert main(["gen", "--kind", "idle", "--seed", "1", "--out", str(tmp_path / "b.jsonl")]) == 2
    # the flag wins over the environment
    assert main(["--config", str(default_config_path()), "gen", "--kind", "idle", "--seed", "1",
                 "--out", str(tmp_path / "c.jsonl")]) == 0
    assert file_digest(tmp_path / "a.jsonl") == file_digest(tmp_path / "c.jsonl")


def test_corpus_generation(tmp_path):
    out = tmp_path / "corpus"
    assert main(["gen", "--corpus", "--seed", "2", "--out", str(out)]) == 0
    files = sorted(os.listdir(out))
    assert len(files) == 37 and files[0].startswith("trace_000_")
