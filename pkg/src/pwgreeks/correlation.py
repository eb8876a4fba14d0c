"""Correlation factorisation and covariance inflation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NotACorrelationError

SYMMETRY_TOL = 1e-12
NEGATIVE_EIG_TOL = 1e-8
SINGULAR_TOL = 1e-10


@dataclass(frozen=True)
class CorrelationModel:
    """Eigen factor ``rho = Q Lambda`` of a correlation matrix.

    ``Q^T Sigma Q = Lambda^2`` so ``rho rho^T = Sigma``.  ``rho_inv`` is None
    when the smallest ``Lambda_kk`` is at or below ``SINGULAR_TOL``.
    """

    sigma_mat: np.ndarray
    q: np.ndarray
    lambda_diag: np.ndarray
    rho: np.ndarray
    rho_inv: np.ndarray | None

    @property
    def n(self) -> int:
        return self.sigma_mat.shape[0]

    @property
    def min_lambda(self) -> float:
        return float(np.min(np.abs(self.lambda_diag)))

    @property
    def is_singular(self) -> bool:
        return self.rho_inv is None


@dataclass(frozen=True)
class InflationParams:
    eps1: float = 0.01
    eps2: float = 0.0

    def __post_init__(self):
        if not self.eps1 >= 0.0:
            raise InvalidInputError(f"eps1 must be >= 0, got {self.eps1!r}")
        if not 0.0 <= self.eps2 <= 1.0:
            raise InvalidInputError(f"eps2 must lie in [0, 1], got {self.eps2!r}")


def _validate(sigma_mat) -> np.ndarray:
    sig = np.array(sigma_mat, dtype=float)
    if sig.ndim != 2 or sig.shape[0] != sig.shape[1]:
        raise InvalidInputError("correlation matrix must be square")
    if not np.all(np.isfinite(sig)):
        raise InvalidInputError("correlation matrix has non-finite entries")
    if np.max(np.abs(sig - sig.T)) > SYMMETRY_TOL:
        raise InvalidInputError("correlation matrix is not symmetric")
    if np.max(np.abs(np.diag(sig) - 1.0)) > SYMMETRY_TOL:
        raise InvalidInputError("correlation matrix must have unit diagonal")
    if np.any(np.abs(sig) > 1.0 + SYMMETRY_TOL):
        raise InvalidInputError("correlation entries must lie in [-1, 1]")
    return sig


def factor(sigma_mat) -> CorrelationModel:
    """Eigen-factorise ``sigma_mat`` into ``rho = Q Lambda``.

    Tiny negative eigenvalues (round-off, down to ``-1e-8``) are clamped to
    zero; anything more negative raises :class:`NotACorrelationError`.
    """
    sig = _validate(sigma_mat)
    sig = 0.5 * (sig + sig.T)
    eigvals, q = np.linalg.eigh(sig)
    if eigvals[0] < -NEGATIVE_EIG_TOL:
        raise NotACorrelationError(
            f"matrix is not positive semidefinite (eigenvalue {eigvals[0]:.3e})"
        )
    lam = np.sqrt(np.clip(eigvals, 0.0, None))
    rho = q * lam
    rho_inv = None
    if lam.min() > SINGULAR_TOL:
        rho_inv = (q / lam).T
    for a in (sig, q, lam, rho) + ((rho_inv,) if rho_inv is not None else ()):
        a.setflags(write=False)
    return CorrelationModel(sigma_mat=sig, q=q, lambda_diag=lam, rho=rho, rho_inv=rho_inv)


def inflate(sigma_mat, eps2: float) -> np.ndarray:
    """Blend towards the identity: ``eps2 * I + (1 - eps2) * Sigma``."""
    if not 0.0 <= eps2 <= 1.0:
        raise InvalidInputError(f"eps2 must lie in [0, 1], got {eps2!r}")
    sig = _validate(sigma_mat)
    return eps2 * np.eye(sig.shape[0]) + (1.0 - eps2) * sig


def eps2_rule(sigma_mat) -> float:
    """Default correlation blend ``0.5 * exp(-10 * min_k |Lambda_kk|)``."""
    model = sigma_mat if isinstance(sigma_mat, CorrelationModel) else factor(sigma_mat)
    return 0.5 * float(np.exp(-10.0 * model.min_lambda))


def uniform_correlation(n: int, corr: float) -> np.ndarray:
    """``n x n`` matrix with unit diagonal and every off-diagonal equal to ``corr``."""
    sig = np.full((n, n), float(corr))
    np.fill_diagonal(sig, 1.0)
    return sig
