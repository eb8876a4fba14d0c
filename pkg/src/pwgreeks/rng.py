"""Counter-based standard normals.

Every draw is a pure function of ``(seed, path, step, asset)``: the four
indices form a Philox4x32-10 counter, the seed forms the key.  Chunking or
threading the path range therefore cannot change any value, and coupled
trajectories (reflected / zeroed first step, bumped spots) see exactly the
same noise.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

warnings.filterwarnings("ignore", message="The TBB threading layer")

import numba as nb  # noqa: E402
import numpy as np  # noqa: E402
from scipy.special import ndtri  # noqa: E402

__all__ = ["philox4x32", "normal", "NoiseBlock", "first_step_variants", "generate_block"]

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_MASK = np.uint64(0xFFFFFFFF)
_SHIFT = np.uint64(32)


def philox4x32(c0, c1, c2, c3, k0, k1, rounds=10):
    """Philox4x32 bijection on broadcastable uint32-valued arrays.

    Returns the four output words as uint64 arrays holding 32-bit values.
    """
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) & _MASK for c in (c0, c1, c2, c3))
    k0 = int(k0) & 0xFFFFFFFF
    k1 = int(k1) & 0xFFFFFFFF
    for r in range(rounds):
        if r:
            k0 = (k0 + _W0) & 0xFFFFFFFF
            k1 = (k1 + _W1) & 0xFFFFFFFF
        p0 = _M0 * c0
        p1 = _M1 * c2
        c0, c1, c2, c3 = (
            (p1 >> _SHIFT) ^ c1 ^ np.uint64(k0),
            p1 & _MASK,
            (p0 >> _SHIFT) ^ c3 ^ np.uint64(k1),
            p0 & _MASK,
        )
    return c0, c1, c2, c3


def _uniform53(w0, w1):
    # 53-bit mantissa, offset by half an ulp so 0 and 1 are never produced
    hi = (w0 >> np.uint64(5)).astype(np.float64)
    lo = (w1 >> np.uint64(6)).astype(np.float64)
    return (hi * 67108864.0 + lo + 0.5) * (1.0 / 9007199254740992.0)


def normal(seed, path, step, asset):
    """Standard normal keyed by ``(seed, path, step, asset)``; broadcasts."""
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    path = np.asarray(path, dtype=np.uint64)
    w0, w1, _, _ = philox4x32(
        path & _MASK,
        path >> _SHIFT,
        step,
        asset,
        seed & 0xFFFFFFFF,
        seed >> 32,
    )
    return ndtri(_uniform53(w0, w1))


@dataclass(frozen=True)
class NoiseBlock:
    """Normals for a contiguous path range.

    ``draws[p, i - 1, k]`` is ``Z_i^{(k)}`` for path ``first_path + p``; the
    step axis is 0-based so ``draws[:, 0]`` is the first-step noise.
    """

    draws: np.ndarray
    seed: int
    first_path: int = 0

    @property
    def n_paths(self) -> int:
        return self.draws.shape[0]

    @property
    def z1(self) -> np.ndarray:
        return self.draws[:, 0, :]

    def reflected(self) -> np.ndarray:
        out = self.draws.copy()
        out[:, 0, :] *= -1.0
        return out

    def zeroed(self) -> np.ndarray:
        out = self.draws.copy()
        out[:, 0, :] = 0.0
        return out


@nb.njit(cache=True, parallel=True)
def _uniform_block(k0, k1, first_path, n_paths, n_steps, n_assets):  # pragma: no cover
    out = np.empty((n_paths, n_steps, n_assets))
    mask = np.uint64(0xFFFFFFFF)
    for p in nb.prange(n_paths):
        path = np.uint64(first_path + p)
        for i in range(n_steps):
            for k in range(n_assets):
                c0 = path & mask
                c1 = path >> np.uint64(32)
                c2 = np.uint64(i + 1)
                c3 = np.uint64(k)
                a = np.uint64(k0)
                b = np.uint64(k1)
                for r in range(10):
                    if r > 0:
                        a = (a + np.uint64(0x9E3779B9)) & mask
                        b = (b + np.uint64(0xBB67AE85)) & mask
                    p0 = np.uint64(0xD2511F53) * c0
                    p1 = np.uint64(0xCD9E8D57) * c2
                    n0 = (p1 >> np.uint64(32)) ^ c1 ^ a
                    n2 = (p0 >> np.uint64(32)) ^ c3 ^ b
                    c1 = p1 & mask
                    c3 = p0 & mask
                    c0 = n0
                    c2 = n2
                hi = np.float64(c0 >> np.uint64(5))
                lo = np.float64(c1 >> np.uint64(6))
                out[p, i, k] = (hi * 67108864.0 + lo + 0.5) * (1.0 / 9007199254740992.0)
    return out


def generate_block(seed, first_path, n_paths, n_steps, n_assets) -> NoiseBlock:
    """Draw the ``(n_paths, n_steps, n_assets)`` block starting at ``first_path``.

    Same values as :func:`normal` evaluated on the index grid, computed by a
    compiled loop.
    """
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    u = _uniform_block(
        seed & 0xFFFFFFFF, seed >> 32, int(first_path), int(n_paths), int(n_steps), int(n_assets)
    )
    draws = ndtri(u, out=u)
    draws.setflags(write=False)
    return NoiseBlock(draws=draws, seed=int(seed), first_path=int(first_path))


def first_step_variants(z1):
    """Return ``(-z1, 0)``: the reflected and zeroed first-step noise."""
    z1 = np.asarray(z1, dtype=float)
    return -z1, np.zeros_like(z1)
