"""Local Outlier Factor per monitored subspace, averaged into one stream score.

At every evaluation step the current window is projected onto each of the d
monitored subspaces and LOF is computed in each projection. Every observation
in the window collects those d scores; its final score is the mean of
everything it collected over all the windows it was part of.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

K_GRID = (1, 2, 5, 10, 20, 50, 100)


@dataclass(frozen=True)
class ScoreRecord:
    time_index: int
    score: float
    contributions: int
    label: Optional[bool] = None


@dataclass
class Scores:
    """Per-observation ensemble scores; ``score`` is NaN where nothing was collected."""

    score: np.ndarray
    contributions: np.ndarray
    labels: Optional[np.ndarray] = None
    k: Optional[int] = None

    @property
    def scored(self) -> np.ndarray:
        return self.contributions > 0

    def records(self) -> Iterator[ScoreRecord]:
        for i in range(self.score.shape[0]):
            lab = None if self.labels is None else bool(self.labels[i])
            yield ScoreRecord(i + 1, float(self.score[i]), int(self.contributions[i]), lab)


# -- LOF ---------------------------------------------------------------------

def _check_points(points, k):
    X = np.asarray(points, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[1] == 0:
        raise ValueError("points must be an (n, m) array with m >= 1")
    if k < 1:
        raise ValueError("k must be >= 1")
    if X.shape[0] <= k:
        raise ValueError(f"LOF needs more than k={k} points, got {X.shape[0]}")
    return X


def _drop_self(dist, idx, rows):
    """Remove each row's own index from a kNN query result (or its last column)."""
    r, q = idx.shape
    is_self = idx == rows[:, None]
    # a row may miss itself when more than q points sit at distance 0
    missing = ~is_self.any(axis=1)
    is_self[missing, q - 1] = True
    keep = ~is_self
    return dist[keep].reshape(r, q - 1), idx[keep].reshape(r, q - 1)


def _neighbourhoods(tree: cKDTree, X: np.ndarray, k_max: int, workers: int = 1):
    """Sorted neighbour distances and indices, wide enough for tie-inclusive k_max.

    Rows whose k_max-distance is tied with the last retrieved neighbour are
    re-queried with more neighbours until the tie is resolved.
    """
    n = X.shape[0]
    q = min(n, k_max + 2)
    dist, idx = tree.query(X, k=q, workers=workers)
    dist, idx = _drop_self(dist, idx, np.arange(n))
    while q < n:
        kd = dist[:, k_max - 1]
        open_rows = np.flatnonzero(dist[:, -1] <= kd)
        if open_rows.size == 0:
            break
        q = min(n, 2 * q)
        d2, i2 = tree.query(X[open_rows], k=q, workers=workers)
        d2, i2 = _drop_self(d2, i2, open_rows)
        wide_d = np.full((n, q - 1), np.inf)
        wide_i = np.full((n, q - 1), -1, dtype=np.int64)
        wide_d[:, :dist.shape[1]] = dist
        wide_i[:, :idx.shape[1]] = idx
        wide_d[open_rows] = d2
        wide_i[open_rows] = i2
        dist, idx = wide_d, wide_i
    return dist, idx


def _lof_from_neighbours(dist, idx, k):
    n = dist.shape[0]
    kdist = dist[:, k - 1]
    member = dist <= kdist[:, None]
    safe = np.where(member, idx, 0)
    reach = np.where(member, np.maximum(kdist[safe], dist), 0.0)
    count = member.sum(axis=1)
    total = reach.sum(axis=1)
    with np.errstate(divide="ignore"):
        # all reach distances 0 (duplicates): infinite density
        lrd = np.where(total > 0, count / np.where(total > 0, total, 1.0), np.inf)
    num = lrd[safe]
    den = np.broadcast_to(lrd[:, None], num.shape)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = num / den
    ratio = np.where(np.isinf(num) & np.isinf(den), 1.0, ratio)
    ratio = np.where(member, ratio, 0.0)
    out = ratio.sum(axis=1) / count
    return out.reshape(n)


def lof(points, k: int) -> np.ndarray:
    """Local Outlier Factor of every point (Euclidean, tie-inclusive neighbourhoods).

    Parameters
    ----------
    points : array_like, shape (n, m)
    k : int
        Neighbourhood size, ``1 <= k < n``. All points tied with the k-th
        nearest neighbour belong to the neighbourhood.

    Returns
    -------
    ndarray, shape (n,)
        LOF values. A point whose neighbours all coincide with it has
        infinite density; two infinite densities compare as equal (ratio 1).
    """
    X = _check_points(points, k)
    return lof_multi(X, (k,))[k]


def lof_multi(points, ks: Sequence[int], workers: int = 1) -> dict:
    """LOF for several k sharing one neighbour query."""
    ks = sorted(set(int(k) for k in ks))
    if not ks:
        raise ValueError("need at least one k")
    X = _check_points(points, ks[-1])
    tree = cKDTree(X)
    dist, idx = _neighbourhoods(tree, X, ks[-1], workers)
    out = {}
    for k in ks:
        if k < ks[-1]:
            # narrow to what this k can use, plus ties
            kd = dist[:, k - 1]
            width = int((dist <= kd[:, None]).sum(axis=1).max())
            out[k] = _lof_from_neighbours(dist[:, :width], idx[:, :width], k)
        else:
            out[k] = _lof_from_neighbours(dist, idx, k)
    return out


# -- stream scoring -----------------------------------------------------------

def evaluation_times(n: int, window: int, every: int) -> list[int]:
    """Times t (observations seen) at which the window is scored."""
    if every < 1:
        raise ValueError("eval_every must be >= 1")
    if n < window:
        raise ValueError(f"stream has {n} observations, window needs {window}")
    return list(range(window, n + 1, every))


def _subspaces_by_time(snapshots) -> Mapping[int, list]:
    if isinstance(snapshots, Mapping):
        return snapshots
    return {s.t: list(s.subspaces) for s in snapshots}


def score_stream(X, snapshots, window: int = 1000, eval_every: int = 100,
                 k: int | Sequence[int] = 10, labels=None, threads: int = 1):
    """Ensemble LOF scores for every observation of ``X``.

    Parameters
    ----------
    X : array_like, shape (n, d)
    snapshots : iterable of Snapshot or mapping t -> list of subspaces
        Must hold an entry for every evaluation time.
    window, eval_every : int
        Window size and evaluation stride.
    k : int or sequence of int
        A sequence returns ``{k: Scores}`` computed from shared neighbour
        queries.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be (n, d)")
    n, d = X.shape
    ks = [k] if np.isscalar(k) else list(k)
    if not ks:
        raise ValueError("need at least one k")
    if min(ks) < 1 or max(ks) >= window:
        raise ValueError(f"k must lie in [1, {window})")
    subs = _subspaces_by_time(snapshots)
    times = evaluation_times(n, window, eval_every)
    sums = {kk: np.zeros(n) for kk in ks}
    contrib = np.zeros(n, dtype=np.int64)
    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        for t in times:
            if t not in subs:
                raise ValueError(f"no subspaces recorded for t={t}")
            lo = t - window
            win = X[lo:t]
            groups: dict = {}
            for s in subs[t]:
                dims = tuple(int(j) for j in s)
                if dims and max(dims) >= d:
                    raise ValueError(f"subspace {dims} does not fit d={d}")
                groups[dims] = groups.get(dims, 0) + 1
            keys = list(groups)
            jobs = (lambda dims: lof_multi(win[:, list(dims)], ks))
            results = list(pool.map(jobs, keys)) if pool else [jobs(s) for s in keys]
            for dims, res in zip(keys, results):
                mult = groups[dims]
                for kk in ks:
                    sums[kk][lo:t] += mult * res[kk]
            contrib[lo:t] += sum(groups.values())
    finally:
        if pool is not None:
            pool.shutdown()

    lab = None if labels is None else np.asarray(labels, dtype=bool)
    out = {}
    for kk in ks:
        with np.errstate(invalid="ignore", divide="ignore"):
            sc = np.where(contrib > 0, sums[kk] / np.maximum(contrib, 1), np.nan)
        out[kk] = Scores(sc, contrib.copy(), lab, kk)
    return out[ks[0]] if np.isscalar(k) else out


def full_space_scores(X, window: int = 1000, eval_every: int = 100,
                      k: int | Sequence[int] = 10, labels=None):
    """Baseline: the same windowed LOF on all dimensions at once."""
    X = np.asarray(X, dtype=np.float64)
    full = [tuple(range(X.shape[1]))]
    subs = {t: full for t in evaluation_times(X.shape[0], window, eval_every)}
    return score_stream(X, subs, window, eval_every, k, labels)


def best_k_sweep(X, snapshots, labels, window: int = 1000, eval_every: int = 100,
                 k_grid: Iterable[int] = K_GRID, threads: int = 1):
    """Score with every k in the grid and keep the one with the highest AUC.

    Returns ``(k, scores, aucs)``; ties go to the smaller k.
    """
    from sgmrd.metrics import auc

    if labels is None:
        raise ValueError("a k sweep needs labels")
    grid = [int(k) for k in k_grid if int(k) < window]
    if not grid:
        raise ValueError("empty k grid")
    all_scores = score_stream(X, snapshots, window, eval_every, grid, labels, threads)
    aucs = {}
    for k in grid:
        s = all_scores[k]
        m = s.scored
        aucs[k] = auc(s.score[m], s.labels[m])
    best = max(grid, key=lambda k: (aucs[k], -k))
    return best, all_scores[best], aucs


def write_scores(scores: Scores, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "score", "label"] if scores.labels is not None else ["t", "score"])
        for rec in scores.records():
            row = [rec.time_index, repr(rec.score)]
            if rec.label is not None:
                row.append(int(rec.label))
            w.writerow(row)


def read_scores(path):
    """Read a score CSV back as (scores, labels or None)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:2] != ["t", "score"]:
        raise ValueError(f"{path}: not a score file (expected header t,score[,label])")
    has_label = len(rows[0]) > 2 and rows[0][2] == "label"
    sc = np.array([float(r[1]) for r in rows[1:]])
    lab = np.array([int(r[2]) for r in rows[1:]], dtype=bool) if has_label else None
    return sc, lab
