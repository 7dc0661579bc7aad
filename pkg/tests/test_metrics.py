import json
import math

import numpy as np
import pytest

from sgmrd.engine import EngineConfig, Snapshot, run
from sgmrd.policies import rd_select
from sgmrd.metrics import (MonitorLog, auc, average_precision, average_quality,
                           monitor_metrics, precision_recall_at, ranking_metrics, regret,
                           success_rate, update_frequency, write_report)

from oracles import (monitor_fixture, naive_ap, naive_auc, naive_frequency, naive_pr_at,
                     naive_regret, naive_success, ranking_fixture)


@pytest.mark.parametrize("seed", range(25))
def test_ranking_metrics_match_naive(seed):
    s, y = ranking_fixture(seed)
    assert auc(s, y) == pytest.approx(naive_auc(s, y), rel=1e-12)
    assert average_precision(s, y) == pytest.approx(naive_ap(s, y), rel=1e-12)
    for pct in (1, 2, 5):
        assert precision_recall_at(s, y, pct) == naive_pr_at(s, y, pct)


@pytest.mark.parametrize("seed", range(25))
def test_monitor_metrics_match_naive(seed):
    q, gold, sel, ok = monitor_fixture(seed)
    log = MonitorLog(np.arange(len(q)), q, sel, ok, gold)
    r, r_t = regret(log)
    assert r == pytest.approx(naive_regret(q, gold), rel=1e-12)
    assert r_t == pytest.approx(r / len(q), rel=1e-15)
    assert update_frequency(log).tolist() == pytest.approx(naive_frequency(sel, q.shape[1]))
    want = naive_success(sel, ok)
    got = success_rate(log)["per_attempt"]
    assert (math.isnan(got) and want is None) or got == pytest.approx(want)


def test_auc_examples():
    assert auc([0.9, 0.8, 0.7, 0.6], [1, 0, 1, 0]) == 0.75
    assert auc([4, 3, 2, 1], [1, 1, 0, 0]) == 1.0
    assert auc([1, 2, 3, 4], [1, 1, 0, 0]) == 0.0
    assert auc([1, 1, 1, 1], [1, 0, 1, 0]) == 0.5
    assert math.isnan(auc([1, 2], [0, 0]))


def test_ap_examples():
    assert average_precision([5, 4, 3, 1], [1, 1, 0, 0]) == 1.0
    for r in range(1, 8):
        y = np.zeros(7, dtype=bool)
        y[r - 1] = True
        assert average_precision(np.arange(7, 0, -1), y) == pytest.approx(1 / r)
    # ties keep input order
    assert average_precision([1, 1, 1], [0, 0, 1]) == pytest.approx(1 / 3)


def test_precision_recall_examples():
    s = np.arange(200, 0, -1.0)
    y = np.zeros(200, dtype=bool)
    y[:5] = True
    assert precision_recall_at(s, y, 1) == (1.0, 0.4)   # cutoff 2 caps the recall
    y[:] = False
    y[-3:] = True
    assert precision_recall_at(s, y, 1) == (0.0, 0.0)
    assert precision_recall_at(s[:10], y[:10], 1) == (0.0, 0.0)  # ceil gives one item
    with pytest.raises(ValueError):
        precision_recall_at(s, y, 0)


def test_monotone_invariance():
    s, y = ranking_fixture(99)
    base = ranking_metrics(s, y).to_dict()
    for f in (lambda x: 3 * x + 1, np.exp, lambda x: x ** 3):
        assert ranking_metrics(f(s), y).to_dict() == base


def test_input_errors():
    with pytest.raises(ValueError):
        auc([1, 2], [1])
    with pytest.raises(ValueError):
        auc([np.nan, 1], [1, 0])


def test_quality_examples():
    log = MonitorLog([1, 2], [[0.2, 0.8], [0.2, 0.8]], [[], []], [[], []])
    per, overall = average_quality(log)
    assert per.tolist() == [0.5, 0.5] and overall == 0.5
    ones = MonitorLog([1], [[1.0, 1.0, 1.0]], [[]], [[]])
    assert average_quality(ones)[1] == 1.0


def test_regret_examples():
    q = np.full((30, 4), 0.5)
    assert regret(MonitorLog(np.arange(30), q, [[]] * 30, [[]] * 30, q))[0] == 0.0
    r, r_t = regret(MonitorLog(np.arange(30), q, [[]] * 30, [[]] * 30, q + 0.1))
    assert r == pytest.approx(0.1 * 30) and r_t == pytest.approx(0.1)
    with pytest.raises(ValueError):
        regret(MonitorLog([1], q[:1], [[]], [[]]))


def test_success_examples():
    log = MonitorLog([1, 2], [[0, 0], [0, 0]], [[0, 1], [1]], [[True, True], [True]])
    out = success_rate(log)
    assert out["per_attempt"] == 1.0 and out["per_dim_step"] == 0.75
    none = MonitorLog([1, 2], [[0], [0]], [[], []], [[], []])
    assert math.isnan(success_rate(none)["per_attempt"])


def test_log_validation():
    with pytest.raises(ValueError):
        MonitorLog([1, 2], [[0.1]], [[], []], [[], []])
    with pytest.raises(ValueError):
        MonitorLog([1], [[0.1]], [[0]], [[]])
    with pytest.raises(ValueError):
        MonitorLog([1], [[0.1]], [[]], [[]], gold=[[0.1, 0.2]])


def data(n, d, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.random((n, d))
    X[:, 1] = X[:, 0] + 0.1 * rng.random(n)
    return X


def test_policy_frequencies():
    small = dict(window_size=40, iterations=10)
    X = data(140, 4)
    gold = MonitorLog.from_snapshots(run(X, EngineConfig(policy="gold", **small)))
    init = MonitorLog.from_snapshots(run(X, EngineConfig(policy="init", **small)))
    assert update_frequency(gold).tolist() == [1.0] * 4
    assert update_frequency(init).tolist() == [0.0] * 4
    assert math.isnan(success_rate(init)["per_attempt"])
    ts = list(run(X, EngineConfig(**small)))
    both = MonitorLog.from_snapshots(ts, run(X, EngineConfig(policy="gold", **small)))
    assert both.T == 100 and both.gold is not None


def test_random_policy_frequency_near_one_over_d():
    d, T = 10, 10_000
    rng = np.random.default_rng(3)
    sel = [rd_select(d, 1, rng) for _ in range(T)]
    log = MonitorLog(np.arange(T), np.zeros((T, d)), sel, [[False] * len(s) for s in sel])
    assert np.all(np.abs(update_frequency(log) - 0.1) <= 0.01)


def test_report_writes_na(tmp_path):
    log = MonitorLog([1], [[0.5]], [[]], [[]])
    p = tmp_path / "m.json"
    write_report(monitor_metrics(log), p)
    rep = json.loads(p.read_text())
    assert rep["success_rate"]["per_attempt"] == "NA" and rep["average_quality"] == 0.5


def test_from_snapshots_requires_gold_alignment():
    a = [Snapshot(t=5, subspaces=[(0, 1)], qualities=[0.3], selected=[], successes=[], init=True),
         Snapshot(t=6, subspaces=[(0, 1)], qualities=[0.4], selected=[0], successes=[False])]
    with pytest.raises(ValueError):
        MonitorLog.from_snapshots(a, a[:1])
