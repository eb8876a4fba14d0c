"""Reference implementations used only by the tests.

Nothing here imports the weights or estimators modules: Black-Scholes
closed forms, the exact one-step transition density of the exponential
scheme, and its spot derivatives by numerical differentiation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import multivariate_normal, norm


@dataclass(frozen=True)
class BsParams:
    spot: float
    strike: float
    vol: float
    maturity: float

    def __post_init__(self):
        if min(self.spot, self.strike, self.vol, self.maturity) <= 0:
            raise ValueError("Black-Scholes parameters must be positive")


def _d1_d2(p: BsParams):
    sd = p.vol * math.sqrt(p.maturity)
    d1 = (math.log(p.spot / p.strike) + 0.5 * sd * sd) / sd
    return d1, d1 - sd, sd


def bs_call(p: BsParams):
    """Zero-rate ``(price, delta, gamma)`` of a European call."""
    d1, d2, sd = _d1_d2(p)
    price = p.spot * norm.cdf(d1) - p.strike * norm.cdf(d2)
    return price, norm.cdf(d1), norm.pdf(d1) / (p.spot * sd)


def bs_put(p: BsParams):
    d1, d2, sd = _d1_d2(p)
    price = p.strike * norm.cdf(-d2) - p.spot * norm.cdf(-d1)
    return price, norm.cdf(d1) - 1.0, norm.pdf(d1) / (p.spot * sd)


def lognormal_logpdf(s, s1, sigma, dt):
    """Log-density of ``s1 = s exp(-sigma^2 dt / 2 + sigma sqrt(dt) Z)``."""
    v = sigma * sigma * dt
    m = math.log(s) - 0.5 * v
    y = math.log(s1)
    return -y - 0.5 * math.log(2.0 * math.pi * v) - (y - m) ** 2 / (2.0 * v)


def lognormal_score(s, s1, sigma, dt):
    """Analytic ``d/ds log p(s -> s1)`` at constant ``sigma``."""
    v = sigma * sigma * dt
    return (math.log(s1 / s) + 0.5 * v) / (s * v)


def step_logpdf(s, s1, vol_fn, corr, dt):
    """One exponential step for ``n`` assets with spot-dependent vols.

    ``log s1`` is Gaussian with mean ``log s - sigma^2 dt / 2`` and covariance
    ``diag(sigma) corr diag(sigma) dt`` where ``sigma = vol_fn(s)``.
    """
    s = np.asarray(s, dtype=float)
    s1 = np.asarray(s1, dtype=float)
    sig = np.asarray(vol_fn(s), dtype=float)
    cov = np.outer(sig, sig) * np.asarray(corr, dtype=float) * dt
    mean = np.log(s) - 0.5 * sig * sig * dt
    y = np.log(s1)
    return multivariate_normal(mean=mean, cov=cov).logpdf(y) - y.sum()


def numeric_score(logpdf, s, h=1e-5):
    """Central-difference gradient of ``logpdf`` in the spot vector."""
    s = np.asarray(s, dtype=float)
    g = np.empty(s.size)
    for i in range(s.size):
        e = np.zeros(s.size)
        e[i] = h * s[i]
        g[i] = (logpdf(s + e) - logpdf(s - e)) / (2.0 * e[i])
    return g


def numeric_hessian(logpdf, s, h=1e-4):
    """Central-difference Hessian of ``logpdf`` in the spot vector."""
    s = np.asarray(s, dtype=float)
    n = s.size
    hs = h * s
    out = np.empty((n, n))
    f0 = logpdf(s)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = hs[i]
        out[i, i] = (logpdf(s + ei) - 2.0 * f0 + logpdf(s - ei)) / (hs[i] ** 2)
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = hs[j]
            v = (
                logpdf(s + ei + ej) - logpdf(s + ei - ej) - logpdf(s - ei + ej) + logpdf(s - ei - ej)
            ) / (4.0 * hs[i] * hs[j])
            out[i, j] = out[j, i] = v
    return out


def quadratic_vol(atm, skew, kurt, s_ref):
    """``sigma(s) = atm + skew m + kurt m^2`` with ``m = log(s / s_ref)``, per asset."""
    atm, skew, kurt, s_ref = (np.asarray(a, dtype=float) for a in (atm, skew, kurt, s_ref))

    def vol(s):
        m = np.log(np.asarray(s, dtype=float) / s_ref)
        return atm + skew * m + kurt * m * m

    return vol
