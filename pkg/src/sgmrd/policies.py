"""Which dimensions to re-search: multiple-play Thompson sampling and baselines."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

POLICIES = ("ts", "rd", "gd", "batch", "init", "gold")


@dataclass
class BanditState:
    """Beta(alpha_i, beta_i) posterior per arm, starting from the uniform prior."""

    alpha: np.ndarray
    beta: np.ndarray
    rng: np.random.Generator = field(repr=False)

    @classmethod
    def uniform(cls, d: int, rng: np.random.Generator | int | None = None) -> "BanditState":
        return cls(np.ones(d), np.ones(d), np.random.default_rng(rng))

    @property
    def plays(self) -> np.ndarray:
        return self.alpha + self.beta - 2


def _top(scores: np.ndarray, L: int, largest: bool = True) -> list[int]:
    keyed = -scores if largest else scores
    # stable: ties resolved towards the lowest index
    return sorted(np.argsort(keyed, kind="stable")[:L].tolist())


def ts_select(state: BanditState, L: int) -> list[int]:
    """Sample theta_i ~ Beta(alpha_i, beta_i) and play the L largest."""
    d = state.alpha.shape[0]
    if not 1 <= L <= d:
        raise ValueError(f"L must be in [1, {d}], got {L}")
    theta = state.rng.beta(state.alpha, state.beta)
    return _top(theta, L)


def ts_reward(state: BanditState, arm: int, success: bool) -> BanditState:
    if not 0 <= arm < state.alpha.shape[0]:
        raise IndexError(f"invalid arm {arm}")
    if success:
        state.alpha[arm] += 1
    else:
        state.beta[arm] += 1
    return state


def rd_select(d: int, L: int, rng: np.random.Generator) -> list[int]:
    if not 0 <= L <= d:
        raise ValueError(f"L must be in [0, {d}], got {L}")
    return sorted(rng.choice(d, size=L, replace=False).tolist())


def gd_select(qualities, L: int) -> list[int]:
    """The L dimensions with the lowest smoothed quality."""
    q = np.asarray(qualities, dtype=np.float64)
    if not 0 <= L <= q.shape[0]:
        raise ValueError(f"L must be in [0, {q.shape[0]}], got {L}")
    return _top(q, L, largest=False)


def schedule_select(mode: str, t: int, w: int, d: int) -> list[int]:
    """Fixed schedules: batch re-initialises every w steps, init never, gold always."""
    if mode == "init":
        return []
    if mode == "gold":
        return list(range(d))
    if mode == "batch":
        return list(range(d)) if t % w == 0 else []
    raise ValueError(f"not a scheduled policy: {mode!r}")
