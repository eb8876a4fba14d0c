"""Exponential local-vol stepping and the coupled path triple."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .correlation import CorrelationModel, InflationParams, factor, inflate
from .errors import InvalidInputError, NumericalError
from .grid import SimulationGrid
from .market import LocalVolSurface
from .rng import NoiseBlock


@dataclass(frozen=True)
class ModelSpec:
    """Spot vector, one vol surface per asset, correlation and grid."""

    spot: np.ndarray
    surfaces: tuple
    corr: CorrelationModel
    grid: SimulationGrid

    def __post_init__(self):
        spot = np.atleast_1d(np.asarray(self.spot, dtype=float)).copy()
        spot.setflags(write=False)
        object.__setattr__(self, "spot", spot)
        object.__setattr__(self, "surfaces", tuple(self.surfaces))
        if np.any(~(spot > 0.0)):
            raise InvalidInputError("spot must be positive")
        if len(self.surfaces) != spot.size:
            raise InvalidInputError("need one vol surface per asset")
        if self.corr.n != spot.size:
            raise InvalidInputError("correlation dimension does not match asset count")

    @property
    def n(self) -> int:
        return self.spot.size

    def with_spot(self, spot) -> "ModelSpec":
        return replace(self, spot=np.asarray(spot, dtype=float))

    def with_grid(self, grid: SimulationGrid) -> "ModelSpec":
        return replace(self, grid=grid)

    def first_step_vols(self):
        """``(sigma, d_sigma, d2_sigma)`` per asset at ``t_0`` and the spot."""
        vols = np.array(
            [surf.vol(0.0, s) for surf, s in zip(self.surfaces, self.spot)], dtype=float
        )
        return vols[:, 0], vols[:, 1], vols[:, 2]


@dataclass(frozen=True)
class FirstStep:
    """Dynamics used on ``[t_0, t_1)``.

    ``frozen_vol`` replaces the surface by a constant per asset (covariance
    inflation); ``corr`` replaces the model correlation.
    """

    corr: CorrelationModel
    frozen_vol: np.ndarray | None = None


def inflated_first_step(spec: ModelSpec, eps: InflationParams) -> FirstStep:
    """First-step vol ``sigma_0(spot) + eps1`` and correlation blended by ``eps2``."""
    sigma0, _, _ = spec.first_step_vols()
    corr = factor(inflate(spec.corr.sigma_mat, eps.eps2))
    return FirstStep(corr=corr, frozen_vol=sigma0 + eps.eps1)


def _vols_at(spec: ModelSpec, t: float, s: np.ndarray) -> np.ndarray:
    sig = np.empty_like(s)
    for j, surf in enumerate(spec.surfaces):
        sig[:, j] = surf.vol(t, s[:, j])[0]
    return sig


def exp_step(s_prev, sigma, dt, w):
    """``s * exp(-sigma^2 dt / 2 + sigma sqrt(dt) w)`` with ``w`` the mixed noise."""
    return s_prev * np.exp(-0.5 * sigma * sigma * dt + sigma * np.sqrt(dt) * w)


def step(spec: ModelSpec, i: int, s_prev, z, corr: CorrelationModel | None = None):
    """Advance from ``t_i`` to ``t_{i+1}`` with standard normal ``z``.

    ``s_prev`` and ``z`` are ``(n,)`` or ``(m, n)``.
    """
    s_prev = np.asarray(s_prev, dtype=float)
    z = np.asarray(z, dtype=float)
    if not (np.all(np.isfinite(s_prev)) and np.all(np.isfinite(z))):
        raise NumericalError("non-finite input to step")
    single = s_prev.ndim == 1
    s2, z2 = np.atleast_2d(s_prev), np.atleast_2d(z)
    rho = (corr or spec.corr).rho
    sigma = _vols_at(spec, float(spec.grid.times[i]), s2)
    out = exp_step(s2, sigma, float(spec.grid.dt[i]), z2 @ rho.T)
    return out[0] if single else out


def simulate(spec: ModelSpec, draws, first: FirstStep | None = None) -> np.ndarray:
    """Simulate paths for ``draws`` of shape ``(m, N, n)``.

    Returns prices of shape ``(m, N + 1, n)``; index 0 holds the spot.
    """
    draws = np.asarray(draws, dtype=float)
    m, n_steps, n = draws.shape
    if n_steps != spec.grid.n_steps or n != spec.n:
        raise InvalidInputError("noise shape does not match grid and asset count")
    dt = spec.grid.dt
    times = spec.grid.times
    paths = np.empty((m, n_steps + 1, n))
    s = np.broadcast_to(spec.spot, (m, n)).copy()
    paths[:, 0] = s
    for i in range(n_steps):
        if i == 0 and first is not None:
            rho = first.corr.rho
            if first.frozen_vol is not None:
                sigma = np.broadcast_to(first.frozen_vol, (m, n))
            else:
                sigma = _vols_at(spec, times[0], s)
        else:
            rho = spec.corr.rho
            sigma = _vols_at(spec, times[i], s)
        s = exp_step(s, sigma, dt[i], draws[:, i, :] @ rho.T)
        paths[:, i + 1] = s
    if not np.all(np.isfinite(s)):
        raise NumericalError("simulation produced non-finite prices")
    return paths


@dataclass(frozen=True)
class PathTriple:
    """Trajectories driven by ``Z``, the reflected ``Z^`` and the zeroed ``Z-``.

    Each array is ``(m, N + 1, n)``; all three share ``Z_2, ..., Z_N``.
    """

    s_path: np.ndarray
    s_hat_path: np.ndarray
    s_bar_path: np.ndarray
    z1: np.ndarray = field(repr=False)


def simulate_triple(spec: ModelSpec, noise: NoiseBlock | np.ndarray, first: FirstStep | None = None) -> PathTriple:
    """Simulate the coupled triple for a block of paths in one stacked pass."""
    draws = noise.draws if isinstance(noise, NoiseBlock) else np.asarray(noise, dtype=float)
    m = draws.shape[0]
    stacked = np.concatenate([draws, draws, draws], axis=0)
    stacked[m : 2 * m, 0, :] *= -1.0
    stacked[2 * m :, 0, :] = 0.0
    paths = simulate(spec, stacked, first)
    return PathTriple(
        s_path=paths[:m],
        s_hat_path=paths[m : 2 * m],
        s_bar_path=paths[2 * m :],
        z1=draws[:, 0, :],
    )


def flat_model(spot, vols, sigma_mat, grid: SimulationGrid) -> ModelSpec:
    """Model with flat vol surfaces (``s_ref`` equal to each spot)."""
    spot = np.atleast_1d(np.asarray(spot, dtype=float))
    vols = np.broadcast_to(np.asarray(vols, dtype=float), spot.shape)
    surfaces = tuple(LocalVolSurface.flat(v, s_ref=s) for v, s in zip(vols, spot))
    return ModelSpec(spot=spot, surfaces=surfaces, corr=factor(sigma_mat), grid=grid)
