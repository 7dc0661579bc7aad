# Contrast and greedy subspace search on a small static window.
#
# Run with:  python3 notebooks/01_contrast_and_search.py

import numpy as np

from sgmrd.contrast import Estimator, EstimatorConfig, contrast
from sgmrd.search import search
from sgmrd.stream import SlidingWindow

rng = np.random.default_rng(0)
n, d = 1000, 6

# dim 0 depends on dims 1 and 2 jointly, the rest is noise
X = rng.random((n, d))
X[:, 0] = (X[:, 1] + X[:, 2]) / 2

w = SlidingWindow(n, d)
for row in X:
    w.push(row)

# contrast of a few subspaces w.r.t. dim 0
cfg = EstimatorConfig(iterations=100, seed=1)
for sub in [(0, 3), (0, 1), (0, 1, 2), (0, 1, 2, 4)]:
    print(f"contrast {sub!s:<14} {contrast(w, sub, 0, cfg).value:.3f}")

# independent dims sit near 0.5, a copy saturates at 1
print("independent pair", round(contrast(w, (3, 4), 3, cfg).value, 3))
Y = np.column_stack([X[:, 3], X[:, 3]])
wy = SlidingWindow(n, 2)
for row in Y:
    wy.push(row)
print("y = x           ", round(contrast(wy, (0, 1), 0, cfg).value, 3))

# greedy search: 2d-3 evaluations per target
est = Estimator(cfg)
for target in range(d):
    res = search(w, target, est, seed=target)
    print(f"target {target}: {res.subspace}  quality {res.quality:.3f}  evals {res.evaluations}")
print("total evaluations", est.evaluation_counter(), "=", d * (2 * d - 3))
