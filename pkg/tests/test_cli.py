import json
import subprocess
import sys

import numpy as np
import pytest

from sgmrd.cli import main
from sgmrd.engine import EngineConfig, SGMRD, read_snapshots
from sgmrd.outliers import read_scores
from sgmrd.search import search
from sgmrd.stream import SlidingWindow, load_csv

SMALL = ["--window", "60", "--iterations", "15"]


@pytest.fixture
def stream(tmp_path):
    out = tmp_path / "data.csv"
    assert main(["generate", "--dims", "5", "--phases", "2", "--per-phase", "100",
                 "--outlier-prob", "0.01", "--seed", "1", "--out", str(out)]) == 0
    return out


def test_pipeline_end_to_end(tmp_path, stream, capsys):
    snaps, scores, rep = tmp_path / "s.jsonl", tmp_path / "scores.csv", tmp_path / "m.json"
    assert main(["run", "--input", str(stream), "--out", str(snaps)] + SMALL) == 0
    assert len(read_snapshots(snaps)) == 200 - 60 + 1
    assert main(["detect", "--input", str(stream), "--snapshots", str(snaps), "--k", "5",
                 "--window", "60", "--eval-every", "20", "--out", str(scores)]) == 0
    sc, lab = read_scores(scores)
    assert sc.shape == (200,) and lab is not None
    assert main(["evaluate", "--scores", str(scores), "--monitor-log", str(snaps),
                 "--out", str(rep)]) == 0
    report = json.loads(rep.read_text())
    assert 0 <= report["ranking"]["auc"] <= 1
    assert report["monitoring"]["T"] == 140
    head = capsys.readouterr().out.splitlines()[0]
    assert "AUC" in head and "Qbar" in head
    for p in (stream, snaps, scores, rep):
        man = json.loads(p.with_name(p.name + ".manifest.json").read_text())
        assert man["version"] and man["timings_s"] and man["outputs"]


def test_generate_synth10_rows_and_determinism(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert main(["generate", "--dims", "10", "--phases", "10", "--per-phase", "1000",
                     "--seed", "4", "--out", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(a.read_text().splitlines()) == 10001
    assert a.with_suffix(".spec.json").exists()


def test_generate_zero_outliers(tmp_path):
    p = tmp_path / "z.csv"
    assert main(["generate", "--phases", "2", "--per-phase", "100", "--outlier-prob", "0",
                 "--out", str(p)]) == 0
    _, lab = load_csv(p, "label")
    assert not lab.any()


def test_run_init_constant_subspaces(tmp_path, stream):
    out = tmp_path / "i.jsonl"
    assert main(["run", "--input", str(stream), "--policy", "init", "--out", str(out)]
                + SMALL) == 0
    snaps = read_snapshots(out)
    assert all(s.subspaces == snaps[0].subspaces for s in snaps)


def test_run_gold_matches_reinitialisation(tmp_path, stream):
    out = tmp_path / "g.jsonl"
    assert main(["run", "--input", str(stream), "--policy", "gold", "--seed", "3",
                 "--out", str(out)] + SMALL) == 0
    X, _ = load_csv(stream, "label")
    engine = SGMRD(5, EngineConfig(window_size=60, iterations=15, seed=3, policy="gold"))
    for s in read_snapshots(out)[::37]:
        win = SlidingWindow(60, 5)
        for r in X[s.t - 60:s.t]:
            win.push(r)
        fresh = [search(win, i, engine.estimator, engine.search_seed(s.t)) for i in range(5)]
        assert s.subspaces == [f.subspace for f in fresh]


def test_run_defaults_in_manifest(tmp_path, stream):
    out = tmp_path / "r.jsonl"
    # the stream is shorter than the default window
    assert main(["run", "--input", str(stream), "--out", str(out)]) == 2
    assert main(["run", "--input", str(stream), "--window", "60", "--iterations", "5",
                 "--out", str(out)]) == 0
    opts = json.loads((tmp_path / "r.jsonl.manifest.json").read_text())["options"]
    assert (opts["plays"], opts["gamma"], opts["step"]) == (1, 0.9, 1)


def test_detect_k_sweep_and_determinism(tmp_path, stream):
    snaps = tmp_path / "s.jsonl"
    main(["run", "--input", str(stream), "--out", str(snaps)] + SMALL)
    outs = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for o in outs:
        assert main(["detect", "--input", str(stream), "--snapshots", str(snaps),
                     "--k-sweep", "--k-grid", "1,2,5,10,20", "--window", "60",
                     "--eval-every", "20", "--out", str(o)]) == 0
    assert outs[0].read_bytes() == outs[1].read_bytes()
    man = json.loads((tmp_path / "a.csv.manifest.json").read_text())
    assert set(man["auc_by_k"]) == {"1", "2", "5", "10", "20"}
    assert man["auc_by_k"][str(man["chosen_k"])] == max(man["auc_by_k"].values())


def test_detect_full_grid_is_default(tmp_path, stream):
    snaps = tmp_path / "s.jsonl"
    main(["run", "--input", str(stream), "--out", str(snaps), "--window", "120",
          "--iterations", "5"])
    out = tmp_path / "a.csv"
    assert main(["detect", "--input", str(stream), "--snapshots", str(snaps), "--k-sweep",
                 "--window", "120", "--eval-every", "40", "--out", str(out)]) == 0
    man = json.loads((tmp_path / "a.csv.manifest.json").read_text())
    assert sorted(map(int, man["auc_by_k"])) == [1, 2, 5, 10, 20, 50, 100]


def test_detect_errors(tmp_path, stream):
    snaps = tmp_path / "s.jsonl"
    main(["run", "--input", str(stream), "--out", str(snaps)] + SMALL)
    short = tmp_path / "short.csv"
    short.write_text("\n".join(stream.read_text().splitlines()[:150]) + "\n")
    args = ["detect", "--snapshots", str(snaps), "--window", "60", "--eval-every", "20",
            "--out", str(tmp_path / "x.csv")]
    assert main(args + ["--input", str(short)]) == 2
    nolab = tmp_path / "nolab.csv"
    nolab.write_text("\n".join(",".join(r.split(",")[:-1])
                               for r in stream.read_text().splitlines()) + "\n")
    assert main(args + ["--input", str(nolab), "--k-sweep"]) == 2


def test_evaluate_perfect_scores_and_init_log(tmp_path, stream):
    sc = tmp_path / "p.csv"
    sc.write_text("t,score,label\n1,0.9,1\n2,0.1,0\n3,0.2,0\n4,0.8,1\n")
    out = tmp_path / "m.json"
    assert main(["evaluate", "--scores", str(sc), "--out", str(out)]) == 0
    assert json.loads(out.read_text())["ranking"]["auc"] == 1.0
    log = tmp_path / "i.jsonl"
    main(["run", "--input", str(stream), "--policy", "init", "--out", str(log)] + SMALL)
    assert main(["evaluate", "--monitor-log", str(log), "--out", str(out)]) == 0
    mon = json.loads(out.read_text())["monitoring"]
    assert mon["update_frequency"] == [0.0] * 5 and mon["success_rate"]["per_attempt"] == "NA"


def test_evaluate_needs_labels(tmp_path):
    sc = tmp_path / "p.csv"
    sc.write_text("t,score\n1,0.9\n2,0.1\n")
    assert main(["evaluate", "--scores", str(sc), "--out", str(tmp_path / "m.json")]) == 2
    assert main(["evaluate", "--out", str(tmp_path / "m.json")]) == 1


def test_usage_errors(tmp_path, stream):
    assert main([]) == 1
    assert main(["run", "--input", str(stream), "--policy", "nope", "--out", "x"]) == 1
    assert main(["frobnicate"]) == 1
    assert main(["run", "--input", str(tmp_path / "missing.csv"), "--out", "x"]) == 2
    assert main(["generate", "--outlier-prob", "0.5", "--out", str(tmp_path / "g.csv")]) == 2


def test_env_override(tmp_path, stream, monkeypatch):
    monkeypatch.setenv("SGMRD_WINDOW", "60")
    monkeypatch.setenv("SGMRD_ITERATIONS", "7")
    out = tmp_path / "e.jsonl"
    assert main(["run", "--input", str(stream), "--out", str(out)]) == 0
    opts = json.loads((tmp_path / "e.jsonl.manifest.json").read_text())["options"]
    assert opts["window"] == 60 and opts["iterations"] == 7
    # explicit flags win
    assert main(["run", "--input", str(stream), "--iterations", "5", "--out", str(out)]) == 0
    assert json.loads((tmp_path / "e.jsonl.manifest.json").read_text())["options"]["iterations"] == 5
    monkeypatch.setenv("SGMRD_SEED", "abc")
    assert main(["run", "--input", str(stream), "--out", str(out)]) == 1


def test_thread_count_does_not_change_outputs(tmp_path, stream):
    outs = []
    for th in ("1", "3"):
        o = tmp_path / f"t{th}.jsonl"
        assert main(["run", "--input", str(stream), "--threads", th, "--out", str(o)]
                    + SMALL) == 0
        outs.append(o.read_bytes())
    assert outs[0] == outs[1]


def test_replay_reproduces_outputs(tmp_path, stream):
    out = tmp_path / "s.jsonl"
    main(["run", "--input", str(stream), "--seed", "9", "--out", str(out)] + SMALL)
    again = tmp_path / "again.jsonl"
    assert main(["replay", str(tmp_path / "s.jsonl.manifest.json"), "--out", str(again)]) == 0
    assert again.read_bytes() == out.read_bytes()
    sc = tmp_path / "sc.csv"
    main(["detect", "--input", str(stream), "--snapshots", str(out), "--k-sweep", "--k-grid",
          "2,5", "--window", "60", "--eval-every", "20", "--out", str(sc)])
    sc2 = tmp_path / "sc2.csv"
    assert main(["replay", str(tmp_path / "sc.csv.manifest.json"), "--out", str(sc2)]) == 0
    assert sc2.read_bytes() == sc.read_bytes()


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "sgmrd", "--version"], capture_output=True,
                         text=True)
    assert res.returncode == 0 and "sgmrd" in res.stdout
