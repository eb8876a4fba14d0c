"""Simulation time grids."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

DEFAULT_FIRST_STEP = 1.0 / 360.0

_TIME_TOL = 1e-12


@dataclass(frozen=True)
class SimulationGrid:
    """Ascending simulation instants ``0 = t_0 < t_1 < ... < t_N``.

    Attributes
    ----------
    times : ndarray
        Year fractions, ``times[0] == 0``.
    inserted_first : bool
        True when ``t_1`` is an extra small step placed ahead of the first
        event date.
    """

    times: np.ndarray
    inserted_first: bool = False

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or times.size < 2:
            raise InvalidInputError("grid needs at least two time points")
        if times[0] != 0.0:
            raise InvalidInputError("grid must start at t_0 = 0")
        if np.any(np.diff(times) <= 0.0):
            raise InvalidInputError("grid times must be strictly increasing")
        times.setflags(write=False)
        object.__setattr__(self, "times", times)

    @property
    def dt(self) -> np.ndarray:
        return np.diff(self.times)

    @property
    def n_steps(self) -> int:
        return self.times.size - 1

    @property
    def dt1(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def maturity(self) -> float:
        return float(self.times[-1])

    def index_of(self, t: float) -> int:
        """Grid index of time ``t``; raises if ``t`` is not a grid point."""
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > _TIME_TOL * max(1.0, abs(t)):
            raise InvalidInputError(f"time {t!r} is not on the simulation grid")
        return i

    def with_first_time(self, t1: float) -> "SimulationGrid":
        """Move ``t_1`` to ``t1`` keeping ``t_2, ..., t_N`` fixed."""
        if self.n_steps < 2:
            raise InvalidInputError("need at least two steps to move t_1")
        if not 0.0 < t1 < self.times[2]:
            raise InvalidInputError(f"t_1 = {t1!r} must lie in (0, t_2)")
        times = self.times.copy()
        times[1] = t1
        return SimulationGrid(times, inserted_first=self.inserted_first)


def build_grid(event_times, step, insert_first=None) -> SimulationGrid:
    """Build a grid containing every event time with gaps of at most ``step``.

    Gaps between consecutive anchors (0, the optional inserted first point,
    then the events) are split into equal sub-steps; events never move.
    """
    events = np.asarray(sorted(float(t) for t in event_times))
    if events.size == 0:
        raise InvalidInputError("event_times must be nonempty")
    if np.any(events <= 0.0):
        raise InvalidInputError("event times must be positive")
    if np.any(np.diff(events) <= _TIME_TOL):
        raise InvalidInputError("duplicate event times")
    if not step > 0.0:
        raise InvalidInputError("step must be positive")

    anchors = [0.0]
    if insert_first is not None:
        if not 0.0 < insert_first < events[0] - _TIME_TOL:
            raise InvalidInputError(
                "inserted first step must lie strictly before the first event time"
            )
        anchors.append(float(insert_first))
    anchors.extend(events.tolist())

    times = [0.0]
    for left, right in zip(anchors[:-1], anchors[1:]):
        n_sub = max(1, math.ceil((right - left) / step - 1e-9))
        sub = np.linspace(left, right, n_sub + 1)[1:]
        sub[-1] = right
        times.extend(sub.tolist())
    return SimulationGrid(np.array(times), inserted_first=insert_first is not None)
