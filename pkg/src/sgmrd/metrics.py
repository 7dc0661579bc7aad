"""Evaluation: ranking metrics for outlier scores and monitoring metrics for
the subspace maintenance (regret, average quality, update frequency, success
rate).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata


def _scores_labels(scores, labels):
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).astype(bool).ravel()
    if s.shape != y.shape:
        raise ValueError(f"{s.size} scores but {y.size} labels")
    if np.isnan(s).any():
        raise ValueError("scores contain NaN")
    return s, y


def auc(scores, labels) -> float:
    """Area under the ROC curve via the Mann-Whitney statistic (ties count 1/2).

    Undefined (NaN) when only one class is present.
    """
    s, y = _scores_labels(scores, labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return math.nan
    ranks = rankdata(s)  # average ranks give ties half credit
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def ranking_order(scores) -> np.ndarray:
    """Indices from highest to lowest score; equal scores keep input order."""
    s = np.asarray(scores, dtype=np.float64)
    return np.argsort(-s, kind="stable")


def average_precision(scores, labels) -> float:
    """Mean of the precision at the rank of each positive (stable tie order)."""
    s, y = _scores_labels(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        return math.nan
    hits = y[ranking_order(s)]
    ranks = np.flatnonzero(hits) + 1
    return float(np.mean(np.arange(1, n_pos + 1) / ranks))


def precision_recall_at(scores, labels, percent: float) -> tuple[float, float]:
    """Precision and recall among the top ceil(percent/100 * n) scores."""
    s, y = _scores_labels(scores, labels)
    if not 0 < percent <= 100:
        raise ValueError("percent must lie in (0, 100]")
    if s.size == 0:
        raise ValueError("no scores")
    cutoff = math.ceil(percent / 100.0 * s.size - 1e-9)
    cutoff = max(1, cutoff)
    tp = int(y[ranking_order(s)[:cutoff]].sum())
    n_pos = int(y.sum())
    return tp / cutoff, (tp / n_pos if n_pos else 0.0)


@dataclass
class RankingMetrics:
    auc: float
    ap: float
    precision: dict = field(default_factory=dict)
    recall: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"auc": self.auc, "ap": self.ap,
                "precision": {f"{k:g}%": v for k, v in self.precision.items()},
                "recall": {f"{k:g}%": v for k, v in self.recall.items()}}


def ranking_metrics(scores, labels, percents: Sequence[float] = (1, 2, 5)) -> RankingMetrics:
    prec, rec = {}, {}
    for p in percents:
        prec[p], rec[p] = precision_recall_at(scores, labels, p)
    return RankingMetrics(auc(scores, labels), average_precision(scores, labels), prec, rec)


# -- monitoring ---------------------------------------------------------------

@dataclass
class MonitorLog:
    """Per-step engine output after initialisation.

    ``qualities`` is (T, d); ``selected`` and ``successes`` hold one list per
    step, the flags aligned with the selected dimensions.
    """

    times: np.ndarray
    qualities: np.ndarray
    selected: list
    successes: list
    gold: Optional[np.ndarray] = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.int64)
        self.qualities = np.asarray(self.qualities, dtype=np.float64)
        T = self.times.shape[0]
        if self.qualities.ndim != 2 or self.qualities.shape[0] != T:
            raise ValueError("qualities must be (T, d) with one row per step")
        if len(self.selected) != T or len(self.successes) != T:
            raise ValueError("selected/successes need one entry per step")
        for sel, ok in zip(self.selected, self.successes):
            if len(sel) != len(ok):
                raise ValueError("success flags must align with selected dimensions")
        if self.gold is not None:
            self.gold = np.asarray(self.gold, dtype=np.float64)
            if self.gold.shape != self.qualities.shape:
                raise ValueError("gold qualities must match the qualities' shape")

    @property
    def T(self) -> int:
        return int(self.times.shape[0])

    @property
    def d(self) -> int:
        return int(self.qualities.shape[1])

    @classmethod
    def from_snapshots(cls, snapshots, gold_snapshots=None) -> "MonitorLog":
        """Build a log from engine snapshots, skipping the initial one."""
        steps = [s for s in snapshots if not s.init]
        gold = None
        if gold_snapshots is not None:
            by_t = {s.t: s for s in gold_snapshots if not s.init}
            missing = [s.t for s in steps if s.t not in by_t]
            if missing:
                raise ValueError(f"gold log has no entry for t={missing[0]}")
            gold = [by_t[s.t].qualities for s in steps]
        return cls([s.t for s in steps], [s.qualities for s in steps],
                   [list(s.selected) for s in steps], [list(s.successes) for s in steps], gold)


def regret(log: MonitorLog) -> tuple[float, float]:
    """(R_T, R_T / T): summed per-step gap to the gold qualities, averaged over dims."""
    if log.gold is None:
        raise ValueError("regret needs gold qualities")
    if log.T == 0:
        return 0.0, math.nan
    r = float((log.gold - log.qualities).sum() / log.d)
    return r, r / log.T


def average_quality(log: MonitorLog) -> tuple[np.ndarray, float]:
    """Per-step mean quality over dimensions and its average over all steps."""
    per_step = log.qualities.mean(axis=1)
    overall = float(per_step.mean()) if log.T else math.nan
    return per_step, overall


def update_frequency(log: MonitorLog) -> np.ndarray:
    """Fraction of steps in which each dimension was re-searched."""
    counts = np.zeros(log.d)
    for sel in log.selected:
        for i in sel:
            counts[i] += 1
    return counts / log.T if log.T else counts


def success_rate(log: MonitorLog) -> dict:
    """Successful updates per attempted search, and per d*T as an alternative.

    ``per_attempt`` is NaN when nothing was attempted (reported as NA).
    """
    attempts = sum(len(s) for s in log.selected)
    wins = sum(int(bool(f)) for ok in log.successes for f in ok)
    per_attempt = wins / attempts if attempts else math.nan
    per_step = wins / (log.d * log.T) if log.T else math.nan
    return {"per_attempt": per_attempt, "per_dim_step": per_step,
            "successes": wins, "attempts": attempts}


def monitor_metrics(log: MonitorLog) -> dict:
    _, q_bar = average_quality(log)
    out = {"T": log.T, "d": log.d, "average_quality": q_bar,
           "update_frequency": update_frequency(log).tolist(),
           "success_rate": success_rate(log)}
    if log.gold is not None:
        r, r_t = regret(log)
        out["regret"] = r
        out["regret_per_step"] = r_t
    return out


def _json_safe(obj):
    if isinstance(obj, float) and math.isnan(obj):
        return "NA"
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def write_report(report: dict, path) -> None:
    """Write a metrics report as JSON; undefined values become "NA"."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_json_safe(report), fh, indent=2)
        fh.write("\n")
