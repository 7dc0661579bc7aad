"""Observations, the sliding window with per-dimension rank index, CSV input."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from sgmrd._kernels import rank_update

Subspace = tuple  # sorted tuple of dimension indices


class ShapeError(ValueError):
    """An observation does not have the stream's dimensionality."""


class DataError(ValueError):
    """Non-finite or unparsable input values."""


@dataclass(frozen=True)
class Observation:
    values: np.ndarray
    time_index: int
    label: Optional[bool] = None


def as_subspace(dims: Iterable[int], d: Optional[int] = None) -> Subspace:
    """Normalise ``dims`` to a sorted tuple, validating range and duplicates."""
    out = tuple(sorted(int(i) for i in dims))
    if not out:
        raise ValueError("a subspace needs at least one dimension")
    if len(set(out)) != len(out):
        raise ValueError(f"duplicate dimensions in subspace {out}")
    if out[0] < 0 or (d is not None and out[-1] >= d):
        raise IndexError(f"subspace {out} out of range for d={d}")
    return out


class SlidingWindow:
    """The ``capacity`` most recent observations of a d-dimensional stream.

    Rows live in a ring of slots. For each dimension the window keeps the
    slots sorted by value (ties in arrival order), updated in place on every
    push: a binary search locates the evicted and inserted entries and the
    sorted column is shifted around them.
    """

    def __init__(self, capacity: int, d: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        if d < 1:
            raise ValueError("d must be positive")
        self.capacity = int(capacity)
        self.d = int(d)
        self._data = np.zeros((self.capacity, self.d))
        self._order = np.zeros((self.d, self.capacity), dtype=np.int64)
        self._times = np.zeros(self.capacity, dtype=np.int64)
        self._n = 0
        self._head = 0  # slot of the oldest observation once full
        self.t = 0

    def __len__(self) -> int:
        return self._n

    @property
    def full(self) -> bool:
        return self._n == self.capacity

    def push(self, obs) -> "SlidingWindow":
        if isinstance(obs, Observation):
            values, t = obs.values, obs.time_index
        else:
            values, t = obs, self.t + 1
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        if values.shape[0] != self.d:
            raise ShapeError(f"expected {self.d} values, got {values.shape[0]}")
        if not np.all(np.isfinite(values)):
            raise DataError(f"non-finite value in observation {values.tolist()}")
        if self.full:
            slot = self._head
            self._head = (self._head + 1) % self.capacity
        else:
            slot = self._n
        rank_update(self._data, self._order, slot, values, self._n)
        if not self.full:
            self._n += 1
        self._times[slot] = t
        self.t = t
        return self

    def _slots(self) -> np.ndarray:
        """Slots in buffer order (oldest first)."""
        if not self.full:
            return np.arange(self._n)
        return (np.arange(self.capacity) + self._head) % self.capacity

    @property
    def buffer(self) -> np.ndarray:
        return self._data[self._slots()]

    @property
    def times(self) -> np.ndarray:
        return self._times[self._slots()]

    @property
    def rank_index(self) -> np.ndarray:
        """(d, n) array: buffer positions sorted by each column's value."""
        n = self._n
        position = np.empty(self.capacity, dtype=np.int64)
        position[self._slots()] = np.arange(n)
        return position[self._order[:, :n]]

    def project(self, subspace: Sequence[int]) -> np.ndarray:
        dims = as_subspace(subspace, self.d)
        return self.buffer[:, list(dims)]

    def column_is_constant(self, dim: int) -> bool:
        col = self._order[dim]
        return self._data[col[0], dim] == self._data[col[self._n - 1], dim]


def read_csv_stream(path, label_column: Optional[str] = None) -> Iterator[Observation]:
    """Yield the rows of a headed CSV file as observations (t starts at 1)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        label_idx = None
        if label_column is not None:
            if label_column not in header:
                raise KeyError(f"label column {label_column!r} not in header {header}")
            label_idx = header.index(label_column)
        value_idx = [i for i in range(len(header)) if i != label_idx]
        for row_no, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(
                    f"row {row_no}: expected {len(header)} cells, got {len(row)}")
            values = np.empty(len(value_idx))
            for k, i in enumerate(value_idx):
                try:
                    v = float(row[i])
                except ValueError:
                    raise DataError(
                        f"row {row_no}, column {header[i]}: not a number: {row[i]!r}"
                    ) from None
                if not math.isfinite(v):
                    raise DataError(f"row {row_no}, column {header[i]}: non-finite value")
                values[k] = v
            label = None
            if label_idx is not None:
                cell = row[label_idx].strip()
                if cell not in ("0", "1", "0.0", "1.0"):
                    raise DataError(
                        f"row {row_no}, column {label_column}: label must be 0/1, got {cell!r}")
                label = float(cell) == 1.0
            yield Observation(values, row_no, label)


def load_csv(path, label_column: Optional[str] = None):
    """Read a whole CSV stream into ``(X, labels)``; labels is None without a label column."""
    obs = list(read_csv_stream(path, label_column))
    if not obs:
        raise DataError(f"{path} has no data rows")
    X = np.vstack([o.values for o in obs])
    labels = None if label_column is None else np.array([o.label for o in obs], dtype=bool)
    return X, labels


def as_array_stream(stream) -> tuple[np.ndarray, Optional[np.ndarray]]:
    """Accept an array or a sequence of observations; return (X, labels or None)."""
    if isinstance(stream, np.ndarray):
        X = np.asarray(stream, dtype=np.float64)
        if X.ndim != 2:
            raise ShapeError("stream array must be 2-D (n, d)")
        return X, None
    obs = list(stream)
    if not obs:
        return np.zeros((0, 0)), None
    X = np.vstack([np.asarray(o.values, dtype=np.float64) for o in obs])
    labels = None
    if all(o.label is not None for o in obs):
        labels = np.array([o.label for o in obs], dtype=bool)
    return X, labels
