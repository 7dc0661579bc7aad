"""The streaming loop: initialise on the first window, then monitor and update.

Monitoring refreshes a raw contrast estimate of every current subspace and
folds it into an exponentially smoothed quality. Every ``step_size``
observations the update policy picks dimensions to re-search; a new subspace
replaces the old one only when it differs and beats the smoothed quality.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Iterator, Optional

import numpy as np

from sgmrd.contrast import Estimator, EstimatorConfig
from sgmrd.policies import (POLICIES, BanditState, gd_select, rd_select, schedule_select,
                            ts_reward, ts_select)
from sgmrd.search import search
from sgmrd.stream import Observation, SlidingWindow, Subspace

# named RNG substreams fanned out from the single engine seed
_MONITOR, _SEARCH, _POLICY = 1, 2, 3


@dataclass(frozen=True)
class EngineConfig:
    window_size: int = 1000
    step_size: int = 1
    plays: int = 1
    gamma: float = 0.9
    iterations: int = 100
    slice_mass: float = 0.5
    seed: int = 0
    policy: str = "ts"
    monitor_every_step: bool = True
    threads: int = 1

    def __post_init__(self):
        if self.window_size < 2:
            raise ValueError("window_size must be >= 2")
        if self.step_size < 1:
            raise ValueError("step_size must be >= 1")
        if self.plays < 0:
            raise ValueError("plays must be >= 0")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}; choose from {POLICIES}")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    @property
    def estimator(self) -> EstimatorConfig:
        return EstimatorConfig(self.iterations, self.slice_mass, self.seed)


@dataclass
class MonitorState:
    smoothed: np.ndarray
    last_raw: np.ndarray


@dataclass
class Snapshot:
    t: int
    subspaces: list
    qualities: list
    selected: list = field(default_factory=list)
    successes: list = field(default_factory=list)
    init: bool = False

    def to_json(self) -> str:
        rec = {"t": self.t, "subspaces": [list(s) for s in self.subspaces],
               "qualities": [float(q) for q in self.qualities],
               "selected": [int(i) for i in self.selected],
               "successes": [bool(s) for s in self.successes]}
        if self.init:
            rec["init"] = True
        return json.dumps(rec)

    @classmethod
    def from_json(cls, line: str) -> "Snapshot":
        rec = json.loads(line)
        return cls(int(rec["t"]), [tuple(s) for s in rec["subspaces"]],
                   list(rec["qualities"]), list(rec.get("selected", [])),
                   list(rec.get("successes", [])), bool(rec.get("init", False)))


def derive_seed(seed: int, stream: int, t: int) -> int:
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, stream, int(t)])
    return int(ss.generate_state(1, np.uint64)[0])


class SGMRD:
    """Streaming subspace search over a sliding window."""

    def __init__(self, d: int, cfg: EngineConfig = EngineConfig()):
        if d < 2:
            raise ValueError("need at least 2 dimensions")
        self.d = d
        self.cfg = cfg
        self.estimator = Estimator(cfg.estimator)
        policy_rng = np.random.default_rng([cfg.seed & 0xFFFFFFFFFFFFFFFF, _POLICY])
        self.bandit = BanditState.uniform(d, policy_rng)
        self.window = SlidingWindow(cfg.window_size, d)
        self.subspaces: Optional[list[Subspace]] = None
        self.state: Optional[MonitorState] = None
        self.update_rounds = 0
        self._pool = ThreadPoolExecutor(cfg.threads) if cfg.threads > 1 else None

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def _map(self, fn, items):
        if self._pool is None:
            return [fn(x) for x in items]
        return list(self._pool.map(fn, items))

    def search_seed(self, t: int) -> int:
        return derive_seed(self.cfg.seed, _SEARCH, t)

    def monitor_seed(self, t: int) -> int:
        return derive_seed(self.cfg.seed, _MONITOR, t)

    def evaluation_counter(self) -> int:
        return self.estimator.evaluation_counter()

    # -- building blocks -------------------------------------------------

    def initialise(self, window: Optional[SlidingWindow] = None):
        window = self.window if window is None else window
        if not window.full:
            raise ValueError(f"window holds {len(window)} of {window.capacity} observations")
        seed = self.search_seed(window.t)
        results = self._map(lambda i: search(window, i, self.estimator, seed), range(self.d))
        self.subspaces = [r.subspace for r in results]
        q = np.array([r.quality for r in results])
        self.state = MonitorState(q.copy(), q.copy())
        return self.subspaces, self.state

    def monitor_step(self, window: Optional[SlidingWindow] = None) -> MonitorState:
        window = self.window if window is None else window
        seed = self.monitor_seed(window.t)
        raw = np.array(self._map(
            lambda i: self.estimator.quality(window, self.subspaces[i], i, seed),
            range(self.d)))
        g = self.cfg.gamma
        self.state.smoothed = g * self.state.smoothed + (1.0 - g) * raw
        self.state.last_raw = raw
        return self.state

    def select(self, t: int) -> list[int]:
        mode = self.cfg.policy
        if mode in ("batch", "init"):
            return schedule_select(mode, t, self.cfg.window_size, self.d)
        if (t - self.cfg.window_size) % self.cfg.step_size != 0:
            return []
        L = min(self.cfg.plays, self.d)
        if mode == "gold":
            return schedule_select(mode, t, self.cfg.window_size, self.d)
        if mode == "ts":
            return ts_select(self.bandit, L) if L > 0 else []
        if mode == "rd":
            return rd_select(self.d, L, self.bandit.rng)
        return gd_select(self.state.smoothed, L)

    def update_step(self, selected: list[int], window: Optional[SlidingWindow] = None,
                    replace_always: bool | None = None) -> list[bool]:
        """Re-search the selected dimensions; return one success flag each."""
        window = self.window if window is None else window
        if not selected:
            return []
        if replace_always is None:
            replace_always = self.cfg.policy in ("gold", "batch")
        seed = self.search_seed(window.t)
        results = self._map(lambda i: search(window, i, self.estimator, seed), selected)
        flags = []
        for i, res in zip(selected, results):
            success = res.subspace != self.subspaces[i] and res.quality > self.state.smoothed[i]
            if success or replace_always:
                self.subspaces[i] = res.subspace
                self.state.smoothed[i] = res.quality
                self.state.last_raw[i] = res.quality
            if self.cfg.policy == "ts":
                ts_reward(self.bandit, i, success)
            flags.append(bool(success))
        self.update_rounds += 1
        return flags

    def snapshot(self, selected=(), successes=(), init=False) -> Snapshot:
        return Snapshot(self.window.t, list(self.subspaces), self.state.smoothed.tolist(),
                        list(selected), list(successes), init)

    # -- streaming -------------------------------------------------------

    def process(self, obs) -> Optional[Snapshot]:
        """Feed one observation; returns a snapshot once initialised."""
        self.window.push(obs)
        if self.subspaces is None:
            if self.window.full:
                self.initialise()
                return self.snapshot(init=True)
            return None
        t = self.window.t
        selected = self.select(t)
        if self.cfg.monitor_every_step or selected:
            self.monitor_step()
        flags = self.update_step(selected)
        return self.snapshot(selected, flags)

    def run(self, stream: Iterable) -> Iterator[Snapshot]:
        n = 0
        for obs in stream:
            n += 1
            snap = self.process(obs)
            if snap is not None:
                yield snap
        if self.subspaces is None:
            raise ValueError(
                f"stream ended after {n} observations; window needs {self.cfg.window_size}")


def run(stream, cfg: EngineConfig = EngineConfig(), d: Optional[int] = None) -> Iterator[Snapshot]:
    """Run the engine over ``stream`` (array rows or observations)."""
    if isinstance(stream, np.ndarray):
        if stream.ndim != 2:
            raise ValueError("stream array must be (n, d)")
        d = stream.shape[1]
        rows = (Observation(stream[i], i + 1) for i in range(stream.shape[0]))
    else:
        it = iter(stream)
        try:
            first = next(it)
        except StopIteration:
            raise ValueError("empty stream") from None
        vals = first.values if isinstance(first, Observation) else first
        d = len(vals) if d is None else d

        def rows_gen():
            yield first
            yield from it
        rows = rows_gen()
    engine = SGMRD(d, cfg)
    try:
        yield from engine.run(rows)
    finally:
        engine.close()


def write_snapshots(snapshots: Iterable[Snapshot], path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for s in snapshots:
            fh.write(s.to_json() + "\n")
            n += 1
    return n


def read_snapshots(path) -> list[Snapshot]:
    with open(path, encoding="utf-8") as fh:
        return [Snapshot.from_json(line) for line in fh if line.strip()]
