"""Synthetic drifting streams with outliers hidden in subspaces.

A sequence of distributions is generated. The first is uniform on the unit
cube; each later one plants a set of disjoint subspaces. Inside a planted
subspace inliers are uniform on the cube minus the corner [delta, 1]^m and
outliers are uniform on that corner, so an outlier is only visible in the
projection onto its subspace. Half of the planted subspaces change from one
distribution to the next, and sampling cross-fades linearly between
consecutive distributions.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class GeneratorConfig:
    d: int = 10
    n: int = 10
    e: int = 1000
    p: float = 0.0045
    max_subspace_dim: int = 5
    n_subspaces: int = 2
    delta_range: tuple = (0.6, 0.9)
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p <= 0.01:
            raise ValueError("outlier probability must lie in [0, 0.01]")
        if self.max_subspace_dim < 2:
            raise ValueError("max_subspace_dim must be >= 2")
        if self.d < self.max_subspace_dim:
            raise ValueError("d must be >= max_subspace_dim")
        if self.n < 1 or self.e < 1:
            raise ValueError("n and e must be positive")
        if self.n_subspaces < 1:
            raise ValueError("n_subspaces must be positive")
        if 2 * self.n_subspaces > self.d:
            raise ValueError(
                f"cannot place {self.n_subspaces} disjoint subspaces of >= 2 dims in d={self.d}")
        lo, hi = self.delta_range
        if not 0.0 < lo <= hi < 1.0:
            raise ValueError("delta_range must lie inside (0, 1)")


@dataclass
class DistributionSpec:
    subspaces: list = field(default_factory=list)
    deltas: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"subspaces": [list(s) for s in self.subspaces],
                "deltas": [float(x) for x in self.deltas]}


@dataclass
class Benchmark:
    X: np.ndarray
    labels: np.ndarray
    source: np.ndarray  # index of the distribution each row was drawn from
    distributions: list
    config: GeneratorConfig

    def spec_dict(self) -> dict:
        cfg = asdict(self.config)
        cfg["delta_range"] = list(cfg["delta_range"])
        return {"config": cfg,
                "distributions": [g.to_dict() for g in self.distributions],
                "outlier_rate": float(self.labels.mean()) if len(self.labels) else 0.0}


def complement_sample(delta: float, dims_count: int, rng: np.random.Generator) -> np.ndarray:
    """One point uniform on [0,1]^m outside the corner [delta,1]^m."""
    return _complement_batch(delta, dims_count, 1, rng)[0]


def _complement_batch(delta, m, size, rng):
    out = rng.random((size, m))
    bad = np.all(out >= delta, axis=1)
    while bad.any():
        out[bad] = rng.random((int(bad.sum()), m))
        bad = np.all(out >= delta, axis=1)
    return out


def _draw_subspace(pool: list, size: int, rng) -> tuple:
    picked = rng.choice(len(pool), size=size, replace=False)
    return tuple(sorted(int(pool[i]) for i in picked))


def _next_distribution(prev: DistributionSpec, cfg: GeneratorConfig, rng) -> DistributionSpec:
    d = cfg.d
    if not prev.subspaces:
        keep_idx = []
        n_new = cfg.n_subspaces
    else:
        n_change = math.ceil(len(prev.subspaces) / 2)
        change = set(rng.choice(len(prev.subspaces), size=n_change, replace=False).tolist())
        keep_idx = [k for k in range(len(prev.subspaces)) if k not in change]
        n_new = n_change
    subspaces = [prev.subspaces[k] for k in keep_idx]
    removed = {prev.subspaces[k] for k in range(len(prev.subspaces)) if k not in keep_idx}
    deltas = [prev.deltas[k] for k in keep_idx]
    kept_dims = {j for s in subspaces for j in s}
    prev_dims = {j for s in prev.subspaces for j in s}
    fresh = [j for j in range(d) if j not in prev_dims]
    freed = [j for j in range(d) if j in prev_dims and j not in kept_dims]
    for idx in range(n_new):
        size = int(rng.integers(2, cfg.max_subspace_dim + 1))
        # leave at least two dims for every subspace still to be placed
        size = min(size, len(fresh) + len(freed) - 2 * (n_new - idx - 1))
        if len(fresh) >= size:
            pool = fresh
        else:
            pool = fresh + freed
            size = min(size, len(pool))
            if size < 2:
                raise ValueError(f"cannot place another disjoint subspace in d={d}")
        s = _draw_subspace(pool, size, rng)
        # a replaced subspace must actually change whenever the pool allows it
        while s in removed and len(pool) > size:
            s = _draw_subspace(pool, size, rng)
        subspaces.append(s)
        deltas.append(float(rng.uniform(*cfg.delta_range)))
        fresh = [j for j in fresh if j not in s]
        freed = [j for j in freed if j not in s]
    return DistributionSpec(subspaces, deltas)


def _sample(dist: DistributionSpec, size: int, cfg: GeneratorConfig, rng):
    X = rng.random((size, cfg.d))
    labels = np.zeros(size, dtype=bool)
    for sub, delta in zip(dist.subspaces, dist.deltas):
        cols = list(sub)
        m = len(cols)
        is_out = rng.random(size) < cfg.p
        n_out = int(is_out.sum())
        block = np.empty((size, m))
        block[is_out] = rng.uniform(delta, 1.0, size=(n_out, m))
        block[~is_out] = _complement_batch(delta, m, size - n_out, rng)
        X[:, cols] = block
        labels |= is_out
    return X, labels


def generate(cfg: GeneratorConfig = GeneratorConfig()) -> Benchmark:
    """Draw ``cfg.n * cfg.e`` labelled observations."""
    rng = np.random.default_rng(cfg.seed)
    dists = [DistributionSpec()]
    for _ in range(cfg.n):
        dists.append(_next_distribution(dists[-1], cfg, rng))

    X = np.empty((cfg.n * cfg.e, cfg.d))
    labels = np.zeros(cfg.n * cfg.e, dtype=bool)
    source = np.empty(cfg.n * cfg.e, dtype=np.int64)
    for i in range(cfg.n):
        lo = i * cfg.e
        # point j of phase i comes from the next distribution with probability j/e
        nxt = rng.random(cfg.e) < np.arange(cfg.e) / cfg.e
        src = np.where(nxt, i + 1, i)
        for k in (i, i + 1):
            rows = np.flatnonzero(src == k)
            if rows.size:
                Xk, lk = _sample(dists[k], rows.size, cfg, rng)
                X[lo + rows] = Xk
                labels[lo + rows] = lk
        source[lo:lo + cfg.e] = src
    return Benchmark(X, labels, source, dists, cfg)


def write_benchmark(bench: Benchmark, csv_path, spec_path=None) -> None:
    csv_path = Path(csv_path)
    d = bench.X.shape[1]
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"dim_{j}" for j in range(d)] + ["label"])
        for row, lab in zip(bench.X, bench.labels):
            writer.writerow([repr(float(v)) for v in row] + [int(lab)])
    if spec_path is None:
        spec_path = csv_path.with_suffix(".spec.json")
    Path(spec_path).write_text(json.dumps(bench.spec_dict(), indent=2), encoding="utf-8")
