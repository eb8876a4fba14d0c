"""Parametric local volatility surfaces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

VOL_FLOOR = 1e-4
VOL_CAP = 5.0


@dataclass(frozen=True)
class LocalVolSurface:
    """Piecewise-in-time local vol, quadratic in log-moneyness.

    For ``t`` in bucket ``b`` and ``m = ln(s / s_ref)``::

        sigma(t, s) = atm[b] + skew[b] * m + kurt[b] * m**2

    clamped to ``[floor, cap]``.  Buckets are left-closed and end at each
    tenor, so ``[0, tenors[0])`` uses the first parameter set and the last
    set also covers everything beyond the last tenor.
    """

    tenors: np.ndarray
    atm: np.ndarray
    skew: np.ndarray
    kurt: np.ndarray
    s_ref: float = 1.0
    floor: float = VOL_FLOOR
    cap: float = VOL_CAP

    def __post_init__(self):
        arrs = {}
        for name in ("tenors", "atm", "skew", "kurt"):
            a = np.atleast_1d(np.asarray(getattr(self, name), dtype=float)).copy()
            a.setflags(write=False)
            arrs[name] = a
            object.__setattr__(self, name, a)
        sizes = {a.size for a in arrs.values()}
        if len(sizes) != 1 or 0 in sizes:
            raise InvalidInputError("tenors, atm, skew and kurt must have equal nonzero length")
        if np.any(np.diff(self.tenors) <= 0.0) or self.tenors[0] <= 0.0:
            raise InvalidInputError("tenors must be positive and strictly increasing")
        if not self.s_ref > 0.0:
            raise InvalidInputError("s_ref must be positive")
        if not 0.0 < self.floor < self.cap:
            raise InvalidInputError("need 0 < floor < cap")

    @classmethod
    def flat(cls, vol: float, s_ref: float = 1.0) -> "LocalVolSurface":
        return cls(tenors=[1.0], atm=[vol], skew=[0.0], kurt=[0.0], s_ref=s_ref)

    def bucket(self, t) -> np.ndarray:
        b = np.searchsorted(self.tenors, t, side="right")
        return np.minimum(b, self.tenors.size - 1)

    def vol(self, t, s):
        """Return ``(sigma, d_sigma/ds, d2_sigma/ds2)`` at time ``t`` and spot ``s``.

        Where the clamp is active the derivatives are zero.
        """
        s = np.asarray(s, dtype=float)
        if np.any(~(s > 0.0)):
            raise InvalidInputError("spot must be positive")
        b = self.bucket(t)
        a, sk, ku = self.atm[b], self.skew[b], self.kurt[b]
        m = np.log(s / self.s_ref)
        raw = a + (sk + ku * m) * m
        d1 = (sk + 2.0 * ku * m) / s
        d2 = (2.0 * ku - sk - 2.0 * ku * m) / (s * s)
        clamped = (raw < self.floor) | (raw > self.cap)
        sigma = np.clip(raw, self.floor, self.cap)
        if np.any(clamped):
            d1 = np.where(clamped, 0.0, d1)
            d2 = np.where(clamped, 0.0, d2)
        return sigma, d1, d2


@dataclass(frozen=True)
class CFunctions:
    """Per-asset first-step coefficients of ``R(s, w) = c2 + c1 * w``."""

    c1: np.ndarray
    c2: np.ndarray
    dc1: np.ndarray
    dc2: np.ndarray


def c_functions(sigma0, d_sigma0, d2_sigma0, s, dt1) -> CFunctions:
    """Coefficients of ``R`` and their spot derivatives from first-step vols."""
    sigma0, d_sigma0, d2_sigma0, s = (
        np.asarray(v, dtype=float) for v in (sigma0, d_sigma0, d2_sigma0, s)
    )
    if np.any(~(s > 0.0)):
        raise InvalidInputError("spot must be positive")
    c1 = d_sigma0 / sigma0
    c2 = 1.0 / (s * sigma0) - dt1 * d_sigma0
    dc1 = d2_sigma0 / sigma0 - c1 * c1
    dc2 = -(1.0 + s * c1) / (s * s * sigma0) - dt1 * d2_sigma0
    return CFunctions(c1=c1, c2=c2, dc1=dc1, dc2=dc2)


def surface_c_functions(surfaces, s, dt1) -> CFunctions:
    """:func:`c_functions` for one surface per asset, evaluated at ``t = 0``."""
    s = np.asarray(s, dtype=float)
    vols = np.array([surf.vol(0.0, s_j) for surf, s_j in zip(surfaces, s)], dtype=float)
    return c_functions(vols[:, 0], vols[:, 1], vols[:, 2], s, dt1)
