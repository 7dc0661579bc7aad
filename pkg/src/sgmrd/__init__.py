"""Streaming subspace search with Monte-Carlo contrast estimates, bandit-driven
updates, and a subspace LOF ensemble for outlier detection."""

__version__ = "0.1.0"

from sgmrd.benchgen import Benchmark, GeneratorConfig, generate, write_benchmark
from sgmrd.contrast import Estimator, EstimatorConfig, QualityEstimate, contrast
from sgmrd.engine import SGMRD, EngineConfig, Snapshot, read_snapshots, run, write_snapshots
from sgmrd.metrics import (MonitorLog, auc, average_precision, average_quality,
                           precision_recall_at, regret, success_rate, update_frequency)
from sgmrd.outliers import best_k_sweep, full_space_scores, lof, score_stream
from sgmrd.search import SearchResult, search
from sgmrd.stream import Observation, SlidingWindow, load_csv, read_csv_stream

__all__ = [
    "Benchmark", "GeneratorConfig", "generate", "write_benchmark",
    "Estimator", "EstimatorConfig", "QualityEstimate", "contrast",
    "SGMRD", "EngineConfig", "Snapshot", "read_snapshots", "run", "write_snapshots",
    "MonitorLog", "auc", "average_precision", "average_quality", "precision_recall_at",
    "regret", "success_rate", "update_frequency",
    "best_k_sweep", "full_space_scores", "lof", "score_stream",
    "SearchResult", "search",
    "Observation", "SlidingWindow", "load_csv", "read_csv_stream",
]
