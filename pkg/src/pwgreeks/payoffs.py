"""Payoffs evaluated on batches of simulated paths.

Every payoff is called as ``payoff(paths, grid)`` with ``paths`` of shape
``(m, N + 1, n)`` (index 0 is the spot) and returns ``(m,)`` values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InvalidInputError
from .grid import SimulationGrid

DEFAULT_BARRIER_SHIFT = -0.01
DEFAULT_STRIKE_WIDTH = 0.01


def smooth_indicator_up(r, barrier, b):
    """Sine ramp replacing ``1{r >= barrier}``; band centred at ``barrier + b``."""
    if b == 0:
        raise InvalidInputError("smoothing width b must be nonzero")
    u = np.clip((np.asarray(r, dtype=float) - barrier - b) / abs(b), -1.0, 1.0)
    return 0.5 + 0.5 * np.sin(0.5 * np.pi * u)


def smooth_indicator_down(r, barrier, b):
    """Sine ramp replacing ``1{r <= barrier}``."""
    return 1.0 - smooth_indicator_up(r, barrier, b)


def smooth_put(r, strike, k):
    """C1 put intrinsic: ``(K + k - r)^2 / (4k)`` inside ``|r - K| < k``."""
    if not k > 0:
        raise InvalidInputError("put smoothing width k must be positive")
    r = np.asarray(r, dtype=float)
    inside = np.abs(r - strike) < k
    return np.where(inside, 0.25 * (strike + k - r) ** 2 / k, np.maximum(strike - r, 0.0))


def performance(paths, ref_spot):
    """Worst-of performance ``min_j S^(j) / ref^(j)`` at every grid point."""
    paths = np.asarray(paths, dtype=float)
    return np.min(paths / np.asarray(ref_spot, dtype=float), axis=-1)


@dataclass(frozen=True)
class Smoothing:
    """``level`` 0 = none, 1 = sine-ramped barriers, 2 = also quadratic put cap.

    ``b`` shifts the knock-out ramps and ``ki_b`` the knock-in ramp;
    ``ki_b`` defaults to ``b`` so both barrier types are ramped the same way.
    """

    level: int = 0
    b: float = DEFAULT_BARRIER_SHIFT
    k: float = DEFAULT_STRIKE_WIDTH
    ki_b: float | None = None

    def __post_init__(self):
        if self.level not in (0, 1, 2):
            raise InvalidInputError(f"smoothing level must be 0, 1 or 2, got {self.level!r}")
        if self.ki_b is None:
            object.__setattr__(self, "ki_b", self.b)
        if self.level >= 1 and (self.b == 0 or self.ki_b == 0):
            raise InvalidInputError("barrier smoothing width b must be nonzero")
        if self.level == 2 and not self.k > 0:
            raise InvalidInputError("put smoothing width k must be positive")


@dataclass(frozen=True)
class Autocallable:
    """Worst-of autocallable with a maturity down-and-in put.

    On each knock-out date the first performance at or above its barrier pays
    that coupon and ends the trade.  Otherwise the holder receives
    ``(ki_strike - R_T)^+`` if ``R_T <= ki_barrier``.  Knock-in is observed at
    maturity only.  ``maturity`` defaults to the last knock-out date.
    """

    ko_times: tuple
    ko_coupons: tuple
    ko_barriers: tuple
    ki_barrier: float
    ki_strike: float
    ref_spot: np.ndarray
    smoothing: Smoothing = field(default_factory=Smoothing)
    maturity: float | None = None

    def __post_init__(self):
        for name in ("ko_times", "ko_coupons", "ko_barriers"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        ref = np.atleast_1d(np.asarray(self.ref_spot, dtype=float)).copy()
        ref.setflags(write=False)
        object.__setattr__(self, "ref_spot", ref)
        if not (len(self.ko_times) == len(self.ko_coupons) == len(self.ko_barriers)):
            raise ConfigError("ko_times, ko_coupons and ko_barriers differ in length", "payoff")
        if not self.ko_times:
            raise ConfigError("at least one knock-out date is required", "payoff.ko_times")
        if any(b <= 0 for b in self.ko_barriers) or self.ki_barrier <= 0:
            raise ConfigError("barriers must be positive", "payoff")
        if any(np.diff(self.ko_times) <= 0):
            raise ConfigError("knock-out times must be increasing", "payoff.ko_times")
        if np.any(ref <= 0):
            raise ConfigError("reference spot must be positive", "payoff.ref_spot")
        if self.maturity is None:
            object.__setattr__(self, "maturity", self.ko_times[-1])
        elif self.maturity < self.ko_times[-1]:
            raise ConfigError("maturity precedes the last knock-out date", "payoff.maturity")

    @property
    def event_times(self) -> tuple:
        if self.maturity > self.ko_times[-1]:
            return self.ko_times + (float(self.maturity),)
        return self.ko_times

    def event_indices(self, grid: SimulationGrid) -> list[int]:
        """Grid indices of the knock-out dates followed by maturity if distinct."""
        try:
            idx = [grid.index_of(t) for t in self.event_times]
        except InvalidInputError as exc:
            raise ConfigError(str(exc), "payoff.ko_times") from None
        if idx[-1] != grid.n_steps:
            raise ConfigError("payoff maturity must be the grid maturity", "payoff.maturity")
        if 1 in idx:
            raise ConfigError(
                "t_1 coincides with a knock-out date; insert a smaller first step",
                "payoff.ko_times",
            )
        return idx

    def __call__(self, paths, grid: SimulationGrid) -> np.ndarray:
        idx = self.event_indices(grid)
        perf = performance(np.asarray(paths)[:, idx, :], self.ref_spot)
        sm = self.smoothing
        alive = np.ones(perf.shape[0])
        value = np.zeros(perf.shape[0])
        for j, (coupon, barrier) in enumerate(zip(self.ko_coupons, self.ko_barriers)):
            if sm.level:
                hit = smooth_indicator_up(perf[:, j], barrier, sm.b)
            else:
                hit = (perf[:, j] >= barrier).astype(float)
            value += alive * hit * coupon
            alive = alive * (1.0 - hit)
        r_t = perf[:, -1]
        if sm.level:
            knocked_in = smooth_indicator_down(r_t, self.ki_barrier, sm.ki_b)
        else:
            knocked_in = (r_t <= self.ki_barrier).astype(float)
        if sm.level == 2:
            put = smooth_put(r_t, self.ki_strike, sm.k)
        else:
            put = np.maximum(self.ki_strike - r_t, 0.0)
        return value + alive * knocked_in * put


@dataclass(frozen=True)
class EuropeanCall:
    """``(S_T - K)^+`` on asset ``asset``."""

    strike: float
    asset: int = 0

    def __post_init__(self):
        if not self.strike > 0:
            raise InvalidInputError("strike must be positive")

    def __call__(self, paths, grid=None) -> np.ndarray:
        return np.maximum(np.asarray(paths)[:, -1, self.asset] - self.strike, 0.0)


@dataclass(frozen=True)
class Constant:
    value: float = 1.0

    def __call__(self, paths, grid=None) -> np.ndarray:
        return np.full(np.asarray(paths).shape[0], float(self.value))


@dataclass(frozen=True)
class Linear:
    """Sum of terminal prices, ``F = sum_j S_T^(j)``."""

    def __call__(self, paths, grid=None) -> np.ndarray:
        return np.asarray(paths)[:, -1, :].sum(axis=-1)


def european_call(path, strike):
    """``(S_T - K)^+`` for a single-asset path of shape ``(N + 1,)`` or ``(N + 1, 1)``."""
    if not strike > 0:
        raise InvalidInputError("strike must be positive")
    return max(float(np.ravel(path)[-1]) - strike, 0.0)
