import numpy as np
import pytest

from sgmrd.contrast import Estimator, EstimatorConfig
from sgmrd.search import search
from sgmrd.stream import SlidingWindow


def window_of(X):
    w = SlidingWindow(X.shape[0], X.shape[1])
    for r in X:
        w.push(r)
    return w


class Recorder(Estimator):
    """Estimator that logs every subspace it is asked about."""

    def __init__(self, cfg, table=None):
        super().__init__(cfg)
        self.calls = []
        self.table = table

    def quality(self, window, subspace, target_dim, seed=None):
        self.calls.append(tuple(subspace))
        if self.table is not None:
            self._count += 1
            return self.table(tuple(sorted(subspace)))
        return super().quality(window, subspace, target_dim, seed)


@pytest.mark.parametrize("d", [2, 3, 5, 10])
def test_exact_evaluation_count(d):
    rng = np.random.default_rng(d)
    w = window_of(rng.random((150, d)))
    est = Estimator(EstimatorConfig(iterations=10))
    res = search(w, 0, est, seed=1)
    assert res.evaluations == 2 * d - 3
    assert est.evaluation_counter() == 2 * d - 3
    assert 0 in res.subspace


def test_two_dims_forced_choice():
    w = window_of(np.random.default_rng(0).random((50, 2)))
    res = search(w, 1, Estimator(EstimatorConfig(iterations=5)))
    assert res.subspace == (0, 1) and res.evaluations == 1


def test_greedy_order_and_strict_improvement():
    # scripted qualities: pairs rank 3 > 1 = 2 (tie -> lower index first) > 4
    table = {(0, 1): 0.5, (0, 2): 0.5, (0, 3): 0.7, (0, 4): 0.1,
             (0, 1, 3): 0.7,          # equal, not strictly better: rejected
             (0, 2, 3): 0.8,          # accepted
             (0, 2, 3, 4): 0.75}      # worse: rejected
    est = Recorder(EstimatorConfig(), table.__getitem__)
    w = window_of(np.random.default_rng(0).random((20, 5)))
    res = search(w, 0, est)
    assert est.calls[4:] == [(0, 1, 3), (0, 2, 3), (0, 2, 3, 4)]
    assert res.subspace == (0, 2, 3)
    assert res.quality == 0.8
    assert res.evaluations == 7


def test_quality_not_below_best_pair():
    rng = np.random.default_rng(5)
    X = rng.random((300, 6))
    w = window_of(X)
    est = Estimator(EstimatorConfig(iterations=30))
    for target in range(6):
        res = search(w, target, est, seed=3)
        best_pair = max(est.quality(w, (target, j), target, 3) for j in range(6) if j != target)
        assert res.quality >= best_pair


def test_finds_dependent_block():
    # dim 0 is a function of dims 1 and 2 jointly; dims 3..9 are noise
    hits = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        X = rng.random((1000, 10))
        X[:, 0] = (X[:, 1] + X[:, 2]) / 2
        res = search(window_of(X), 0, Estimator(EstimatorConfig(seed=seed)), seed=seed)
        assert {0, 1, 2} <= set(res.subspace), res.subspace
        hits += set(res.subspace) == {0, 1, 2}
    assert hits >= 16


def test_search_errors():
    w = window_of(np.random.default_rng(0).random((10, 1)))
    with pytest.raises(ValueError):
        search(w, 0, Estimator())
    w = window_of(np.random.default_rng(0).random((10, 3)))
    with pytest.raises(IndexError):
        search(w, 3, Estimator())
    with pytest.raises(ValueError):
        search(SlidingWindow(5, 3), 0, Estimator())
