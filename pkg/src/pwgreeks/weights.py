"""Path-weighting kernels for Delta and Gamma.

Kernels depend on the spot ``s``, the first-step normal ``z`` and the
first-step scaled noise ``x``.  ``z`` and ``x`` are separate arguments on
purpose: the variance-reduced estimators evaluate them at
``(Z_1, sqrt(dt1) Z_1)``, ``(Z_1, -sqrt(dt1) Z_1)`` and ``(Z_1, 0)``.

Vectors are rows; every function accepts a leading batch of paths, so ``z``
and ``x`` may be ``(n,)`` or ``(m, n)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .correlation import CorrelationModel
from .errors import InvalidInputError, SingularCorrelationError
from .market import CFunctions, c_functions

SYMMETRY_RTOL = 1e-10


@dataclass(frozen=True)
class WeightSet:
    theta0: np.ndarray
    theta1: np.ndarray
    lambda0: np.ndarray
    lambda1: np.ndarray
    lambda2: np.ndarray

    def delta_weight(self, dt1: float) -> np.ndarray:
        """Combined raw Delta weight ``theta0 + theta1 / sqrt(dt1)``."""
        return self.theta0 + self.theta1 / np.sqrt(dt1)

    def gamma_weight(self, dt1: float) -> np.ndarray:
        return self.lambda0 + self.lambda1 / np.sqrt(dt1) + self.lambda2 / dt1


@dataclass(frozen=True)
class DiagonalKernel:
    """First-step data for correlated-diagonal dynamics.

    ``c`` holds the coefficients of ``R(s, w) = c2 + c1 * w`` at the spot;
    ``rho_inv`` is the inverse eigen factor of the first-step correlation.
    """

    c: CFunctions
    rho: np.ndarray
    rho_inv: np.ndarray

    @property
    def n(self) -> int:
        return self.rho.shape[0]


def diagonal_kernel(spec, first=None) -> DiagonalKernel:
    """Kernel for a :class:`~pwgreeks.dynamics.ModelSpec` and optional first step.

    A frozen first-step vol is constant in the spot, so its ``c1`` and
    ``dc1`` vanish.
    """
    corr: CorrelationModel = first.corr if first is not None else spec.corr
    if corr.rho_inv is None:
        raise SingularCorrelationError(
            f"correlation factor is singular (min Lambda = {corr.min_lambda:.3e}); "
            "use covariance inflation"
        )
    dt1 = spec.grid.dt1
    if first is not None and first.frozen_vol is not None:
        zero = np.zeros(spec.n)
        c = c_functions(first.frozen_vol, zero, zero, spec.spot, dt1)
    else:
        sigma, d_sigma, d2_sigma = spec.first_step_vols()
        c = c_functions(sigma, d_sigma, d2_sigma, spec.spot, dt1)
    return DiagonalKernel(c=c, rho=corr.rho, rho_inv=corr.rho_inv)


class RBundle(NamedTuple):
    r: np.ndarray
    dw_r: np.ndarray
    ds_r: np.ndarray
    dww_r: np.ndarray
    dsw_r: np.ndarray


def r_bundle(c: CFunctions, w) -> RBundle:
    """``R`` and its elementwise derivatives at mixed noise ``w``."""
    w = np.asarray(w, dtype=float)
    shape = w.shape
    return RBundle(
        r=c.c2 + c.c1 * w,
        dw_r=np.broadcast_to(c.c1, shape),
        ds_r=c.dc2 + c.dc1 * w,
        dww_r=np.zeros(shape),
        dsw_r=np.broadcast_to(c.dc1, shape),
    )


def _bundle(kernel: DiagonalKernel, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != kernel.n:
        raise InvalidInputError("x has the wrong dimension")
    return r_bundle(kernel.c, x @ kernel.rho.T)


def _outer(a, b):
    return a[..., :, None] * b[..., None, :]


def _diag(v):
    out = np.zeros(v.shape + (v.shape[-1],))
    idx = np.arange(v.shape[-1])
    out[..., idx, idx] = v
    return out


def delta_weights(kernel: DiagonalKernel, z, x):
    """``(theta0, theta1)`` with ``theta0 = -dR/dw`` and ``theta1 = (z rho^-1) * R``."""
    z = np.asarray(z, dtype=float)
    rb = _bundle(kernel, x)
    zr = z @ kernel.rho_inv
    return -rb.dw_r, zr * rb.r


def gamma_weights(kernel: DiagonalKernel, z, x):
    """``(lambda0, lambda1, lambda2)``, each ``(..., n, n)``."""
    z = np.asarray(z, dtype=float)
    rb = _bundle(kernel, x)
    zr = z @ kernel.rho_inv
    theta1 = zr * rb.r
    lam0 = _outer(rb.dw_r, rb.dw_r) + _diag(rb.dww_r * rb.r - rb.dsw_r)
    lam1 = (
        _diag(zr * rb.ds_r - zr * rb.dw_r * rb.r)
        - _outer(theta1, rb.dw_r)
        - _outer(rb.dw_r, theta1)
    )
    inv_sigma = kernel.rho_inv.T @ kernel.rho_inv
    lam2 = _outer(theta1, theta1) - inv_sigma * _outer(rb.r, rb.r)
    return lam0, lam1, lam2


def diagonal_weights(kernel: DiagonalKernel, z, x) -> WeightSet:
    theta0, theta1 = delta_weights(kernel, z, x)
    return WeightSet(theta0, theta1, *gamma_weights(kernel, z, x))


class JDerivatives(NamedTuple):
    """``J = (d_x H_0)^-1 d_s H_0`` and its derivatives.

    Index order: ``j[p, l]``, ``dx[p, l, r] = d J_pl / d x_r``,
    ``ds[p, l, m] = d J_pl / d s_m``, ``dxx[p, l, r, q] = d2 J_pl / d x_r d x_q``,
    ``dsx[p, l, m, r] = d2 J_pl / d s_m d x_r``; all may carry leading batch axes.
    """

    j: np.ndarray
    dx: np.ndarray
    ds: np.ndarray
    dxx: np.ndarray
    dsx: np.ndarray


def generic_weights(j_callback: Callable[[np.ndarray, np.ndarray], JDerivatives], s, z, x) -> WeightSet:
    """Weights from the matrix forms built on an arbitrary ``J`` callback."""
    z = np.asarray(z, dtype=float)
    jd = j_callback(np.asarray(s, dtype=float), np.asarray(x, dtype=float))
    n = jd.j.shape[-1]
    if (
        jd.j.shape[-2:] != (n, n)
        or jd.dx.shape[-3:] != (n, n, n)
        or jd.ds.shape[-3:] != (n, n, n)
        or jd.dxx.shape[-4:] != (n, n, n, n)
        or jd.dsx.shape[-4:] != (n, n, n, n)
        or z.shape[-1] != n
    ):
        raise InvalidInputError("J callback returned inconsistent dimensions")
    div = np.einsum("...plp->...l", jd.dx)
    zj = np.einsum("...p,...pl->...l", z, jd.j)
    lam0 = (
        _outer(div, div)
        + np.einsum("...rm,...plrp->...lm", jd.j, jd.dxx)
        - np.einsum("...plmp->...lm", jd.dsx)
    )
    lam1 = (
        np.einsum("...p,...plm->...lm", z, jd.ds)
        - np.einsum("...p,...rm,...plr->...lm", z, jd.j, jd.dx)
        - _outer(zj, div)
        - _outer(div, zj)
    )
    lam2 = _outer(zj, zj) - np.einsum("...pl,...pm->...lm", jd.j, jd.j)
    return WeightSet(-div, zj, lam0, lam1, lam2)


def diagonal_j_callback(kernel: DiagonalKernel):
    """``J`` callback for correlated-diagonal dynamics: ``J = rho^-1 diag(R(rho x))``.

    The spot argument is ignored; ``kernel`` already carries the spot data.
    """
    rho, rho_inv = kernel.rho, kernel.rho_inv
    n = kernel.n
    eye = np.eye(n)

    def callback(s, x):
        rb = _bundle(kernel, x)
        j = rho_inv * rb.r[..., None, :]
        # d R_l / d x_r = R'_l rho_lr
        dr_dx = rb.dw_r[..., :, None] * rho
        dx = rho_inv[:, :, None] * dr_dx[..., None, :, :]
        ds = rho_inv[:, :, None] * (rb.ds_r[..., :, None] * eye)[..., None, :, :]
        d2r = rb.dww_r[..., :, None, None] * rho[:, :, None] * rho[:, None, :]
        dxx = rho_inv[:, :, None, None] * d2r[..., None, :, :, :]
        dsr = rb.dsw_r[..., :, None, None] * eye[:, :, None] * rho[:, None, :]
        dsx = rho_inv[:, :, None, None] * dsr[..., None, :, :, :]
        return JDerivatives(j, dx, ds, dxx, dsx)

    return callback


def check_symmetric(mat, rtol=SYMMETRY_RTOL) -> np.ndarray:
    """Assert ``mat`` is symmetric to ``rtol`` and return ``(mat + mat^T) / 2``."""
    mat = np.asarray(mat, dtype=float)
    tr = np.swapaxes(mat, -1, -2)
    scale = max(1.0, float(np.max(np.abs(mat), initial=0.0)))
    err = float(np.max(np.abs(mat - tr), initial=0.0))
    if err > rtol * scale:
        raise ArithmeticError(f"matrix asymmetric beyond tolerance ({err:.3e})")
    return 0.5 * (mat + tr)
