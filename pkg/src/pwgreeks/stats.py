"""Mergeable running mean / variance for vector-valued samples."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

Z99 = 2.576


@dataclass
class RunningStats:
    """Count, mean and sum of squared deviations (Chan et al. merge).

    Batches are reduced with numpy's pairwise summation; merging is
    deterministic for a fixed merge order.
    """

    dim: int
    count: int = 0
    mean: np.ndarray = None
    m2: np.ndarray = None

    def __post_init__(self):
        if self.mean is None:
            self.mean = np.zeros(self.dim)
        if self.m2 is None:
            self.m2 = np.zeros(self.dim)

    @classmethod
    def from_batch(cls, samples) -> "RunningStats":
        samples = np.asarray(samples, dtype=float)
        if samples.ndim == 1:
            samples = samples[:, None]
        m, d = samples.shape
        if m == 0:
            return cls(d)
        mean = samples.mean(axis=0)
        m2 = ((samples - mean) ** 2).sum(axis=0)
        return cls(d, m, mean, m2)

    def push(self, x) -> None:
        self.merge(RunningStats.from_batch(np.atleast_1d(np.asarray(x, dtype=float))[None, :]))

    def push_batch(self, samples) -> None:
        self.merge(RunningStats.from_batch(samples))

    def merge(self, other: "RunningStats") -> "RunningStats":
        if other.count == 0:
            return self
        if self.count == 0:
            self.count, self.mean, self.m2 = other.count, other.mean.copy(), other.m2.copy()
            return self
        n = self.count + other.count
        delta = other.mean - self.mean
        self.mean = self.mean + delta * (other.count / n)
        self.m2 = self.m2 + other.m2 + delta * delta * (self.count * other.count / n)
        self.count = n
        return self

    def copy(self) -> "RunningStats":
        return RunningStats(self.dim, self.count, self.mean.copy(), self.m2.copy())

    @property
    def variance(self) -> np.ndarray:
        """Unbiased per-sample variance."""
        if self.count < 2:
            return np.zeros(self.dim)
        return self.m2 / (self.count - 1)

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.variance)

    @property
    def se(self) -> np.ndarray:
        if self.count == 0:
            return np.zeros(self.dim)
        return np.sqrt(self.variance / self.count)


@dataclass(frozen=True)
class Checkpoint:
    paths: int
    mean: np.ndarray
    se: np.ndarray


@dataclass
class Accumulator:
    """Running stats plus snapshots every ``every`` samples."""

    dim: int
    every: int | None = None
    stats: RunningStats = None
    checkpoints: list = field(default_factory=list)

    def __post_init__(self):
        if self.stats is None:
            self.stats = RunningStats(self.dim)

    def split_points(self, start: int, stop: int) -> list[int]:
        """Checkpoint boundaries strictly inside ``(start, stop)`` plus ``stop``."""
        if not self.every:
            return [stop]
        first = (start // self.every + 1) * self.every
        return [p for p in range(first, stop, self.every)] + [stop]

    def merge_block(self, stats: RunningStats) -> None:
        self.stats.merge(stats)
        if self.every and self.stats.count % self.every == 0:
            self.checkpoints.append(
                Checkpoint(self.stats.count, self.stats.mean.copy(), self.stats.se.copy())
            )
