"""Monte-Carlo contrast: how far a dimension's distribution moves under random
conditions on the other dimensions of a subspace.

Each iteration restricts every conditioning dimension to a random block of
consecutive ranks, splits the window into rows inside / outside all blocks,
and runs a two-sample Kolmogorov-Smirnov test on the target dimension. The
contrast is one minus the mean p-value.
"""

from __future__ import annotations

import functools
import math
import threading
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from sgmrd import _kernels
from sgmrd.stream import SlidingWindow, Subspace, as_subspace

MAX_REDRAWS = 10


@dataclass(frozen=True)
class EstimatorConfig:
    iterations: int = 100
    slice_mass: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0.0 < self.slice_mass < 1.0:
            raise ValueError("slice_mass must lie in (0, 1)")

    def with_seed(self, seed: int) -> "EstimatorConfig":
        return replace(self, seed=int(seed))


@dataclass(frozen=True)
class QualityEstimate:
    value: float
    subspace: Subspace
    target_dim: int
    iterations: int
    degenerate: bool = False


def kolmogorov_sf(lam: float) -> float:
    """Asymptotic survival function of the Kolmogorov distribution."""
    return float(_kernels.kolmogorov_sf(float(lam)))


def ks_two_sample_pvalue(sample_a, sample_b) -> float:
    """Asymptotic two-sample KS p-value with effective size |a||b|/(|a|+|b|)."""
    a = np.sort(np.asarray(sample_a, dtype=np.float64))
    b = np.sort(np.asarray(sample_b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    stat = float(np.max(np.abs(fa - fb)))
    return float(_kernels.ks_pvalue_from_stat(stat, float(a.size), float(b.size)))


@functools.lru_cache(maxsize=4096)
def block_size(n: int, subspace_size: int, slice_mass: float) -> int:
    """Ranks kept per conditioning dimension: ceil(n * mass^(1/(|S|-1)))."""
    frac = slice_mass ** (1.0 / (subspace_size - 1))
    return min(n, math.ceil(n * frac - 1e-9))


def _check(window: SlidingWindow, subspace, target_dim: int) -> Subspace:
    dims = as_subspace(subspace, window.d)
    if target_dim not in dims:
        raise ValueError(f"target dimension {target_dim} not in subspace {dims}")
    if len(dims) < 2:
        raise ValueError("a random condition needs at least 2 dimensions")
    if len(window) == 0:
        raise ValueError("window is empty")
    return dims


def random_condition(window: SlidingWindow, subspace, target_dim: int,
                     rng: np.random.Generator, alpha: float = 0.5):
    """Draw one random condition; return (inside, outside) buffer positions."""
    dims = _check(window, subspace, target_dim)
    n = len(window)
    block = block_size(n, len(dims), alpha)
    ranks = window.rank_index
    inside = None
    for j in dims:
        if j == target_dim:
            continue
        off = int(rng.integers(0, n - block + 1))
        rows = ranks[j, off:off + block]
        inside = rows if inside is None else np.intersect1d(inside, rows)
    inside = np.sort(inside)
    outside = np.setdiff1d(np.arange(n), inside)
    return inside, outside


def contrast_key(seed: int, subspace: Subspace, target_dim: int) -> np.uint64:
    """Per-(subspace, target) RNG key derived from the estimator seed."""
    vals = np.array((target_dim, len(subspace)) + tuple(subspace), dtype=np.int64)
    return np.uint64(_kernels.mix_key(np.uint64(seed & 0xFFFFFFFFFFFFFFFF), vals))


def contrast_pvalues(window: SlidingWindow, subspace, target_dim: int,
                     cfg: EstimatorConfig) -> np.ndarray:
    """The M per-iteration p-values behind :func:`contrast`."""
    dims = _check(window, subspace, target_dim)
    n = len(window)
    if n < 2:
        raise ValueError("contrast needs at least 2 observations")
    cond = np.array([j for j in dims if j != target_dim], dtype=np.int64)
    block = block_size(n, len(dims), cfg.slice_mass)
    key = contrast_key(cfg.seed, dims, target_dim)
    return _kernels.contrast_pvalues(window._data, window._order, n, target_dim, cond,
                                     block, cfg.iterations, key, MAX_REDRAWS)


def _value(window: SlidingWindow, dims: Subspace, target_dim: int, cfg: EstimatorConfig,
           seed: int) -> float:
    n = len(window)
    if n < 2:
        raise ValueError("contrast needs at least 2 observations")
    return float(_kernels.contrast_value(
        window._data, window._order, n, target_dim, np.array(dims, dtype=np.int64),
        np.uint64(seed & 0xFFFFFFFFFFFFFFFF), block_size(n, len(dims), cfg.slice_mass),
        cfg.iterations, MAX_REDRAWS))


def contrast(window: SlidingWindow, subspace, target_dim: int,
             cfg: EstimatorConfig) -> QualityEstimate:
    """Estimate the quality of ``subspace`` with respect to ``target_dim``."""
    dims = _check(window, subspace, target_dim)
    value = _value(window, dims, target_dim, cfg, cfg.seed)
    if value < 0.0:
        # constant target column: no condition can move its distribution
        return QualityEstimate(0.0, dims, target_dim, cfg.iterations, degenerate=True)
    return QualityEstimate(value, dims, target_dim, cfg.iterations)


class Estimator:
    """A contrast estimator that counts how many subspaces it has evaluated."""

    def __init__(self, cfg: EstimatorConfig = EstimatorConfig()):
        self.cfg = cfg
        self._count = 0
        self._lock = threading.Lock()

    def evaluation_counter(self) -> int:
        return self._count

    def quality(self, window: SlidingWindow, subspace: Sequence[int], target_dim: int,
                seed: int | None = None) -> float:
        """Same value as ``contrast(...).value`` with less per-call overhead."""
        dims = _check(window, subspace, target_dim)
        value = _value(window, dims, target_dim, self.cfg,
                       self.cfg.seed if seed is None else int(seed))
        with self._lock:
            self._count += 1
        return max(value, 0.0)
