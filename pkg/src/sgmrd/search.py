"""Greedy bottom-up subspace search for one target dimension."""

from __future__ import annotations

from dataclasses import dataclass

from sgmrd.contrast import Estimator
from sgmrd.stream import SlidingWindow, Subspace


@dataclass(frozen=True)
class SearchResult:
    subspace: Subspace
    quality: float
    evaluations: int


def search(window: SlidingWindow, target_dim: int, estimator: Estimator,
           seed: int | None = None) -> SearchResult:
    """Grow a subspace around ``target_dim`` one dimension at a time.

    Every pair {target, j} is scored once. The best pair seeds the subspace;
    the remaining dimensions are then tried in decreasing order of their pair
    score and kept only when they strictly raise the quality. Costs exactly
    2d - 3 contrast evaluations.
    """
    d = window.d
    if d < 2:
        raise ValueError("search needs at least 2 dimensions")
    if len(window) == 0:
        raise ValueError("window is empty")
    if not 0 <= target_dim < d:
        raise IndexError(f"target dimension {target_dim} out of range")

    others = [j for j in range(d) if j != target_dim]
    pair_q = {j: estimator.quality(window, (target_dim, j), target_dim, seed)
              for j in others}
    # stable sort: equal scores keep the lowest index first
    ranked = sorted(others, key=lambda j: -pair_q[j])
    best = ranked[0]
    current = tuple(sorted((target_dim, best)))
    current_q = pair_q[best]
    evaluations = len(others)
    for cand in ranked[1:]:
        trial = tuple(sorted(current + (cand,)))
        q = estimator.quality(window, trial, target_dim, seed)
        evaluations += 1
        if q > current_q:
            current, current_q = trial, q
    return SearchResult(current, current_q, evaluations)
