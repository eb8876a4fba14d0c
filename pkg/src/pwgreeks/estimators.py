"""Monte Carlo estimators of price, Delta vector and Gamma matrix.

``RPW``  raw path weighting on the first-step noise.
``PW``   the antithetic-adjusted form using the reflected and zeroed paths.
``PWCI`` ``PW`` applied to the covariance-inflated first step.
``FD``   central finite differences with common random numbers.

Work is split into chunks of ``chunk_size`` consecutive path indices.  Each
chunk draws its own noise from the counter-based generator, so the result
depends on ``(seed, n_paths, chunk_size)`` only, never on ``workers``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .correlation import InflationParams, eps2_rule
from .dynamics import FirstStep, ModelSpec, inflated_first_step, simulate, simulate_triple
from .errors import InvalidInputError, NumericalError
from .rng import generate_block
from .stats import Z99, Accumulator, Checkpoint, RunningStats
from .weights import check_symmetric, delta_weights, diagonal_kernel, diagonal_weights, gamma_weights

KINDS = ("FD", "RPW", "PW", "PWCI")
DEFAULT_EPS1 = 0.01


@dataclass(frozen=True)
class RunConfig:
    n_paths: int
    seed: int = 1
    chunk_size: int = 10_000
    workers: int = 1
    checkpoint_every: int | None = None

    def __post_init__(self):
        if self.n_paths < 1 or self.chunk_size < 1 or self.workers < 1:
            raise InvalidInputError("n_paths, chunk_size and workers must be >= 1")
        if self.checkpoint_every is not None and self.checkpoint_every < 1:
            raise InvalidInputError("checkpoint_every must be >= 1")


@dataclass
class GreeksEstimate:
    """Estimates with standard errors; ``checkpoints`` hold running snapshots."""

    kind: str
    price: float
    delta: np.ndarray
    gamma: np.ndarray
    se_price: float
    se_delta: np.ndarray
    se_gamma: np.ndarray
    paths_used: int
    checkpoints: list = field(default_factory=list, repr=False)

    @property
    def n(self) -> int:
        return self.delta.size

    @property
    def std_delta(self) -> np.ndarray:
        """Per-path standard deviation of the Delta contributions."""
        return self.se_delta * math.sqrt(self.paths_used)

    @property
    def std_gamma(self) -> np.ndarray:
        return self.se_gamma * math.sqrt(self.paths_used)

    def ci(self, quantity="delta", z=Z99):
        """``(low, high)`` confidence bounds for ``price``, ``delta`` or ``gamma``."""
        est = getattr(self, quantity)
        se = getattr(self, f"se_{quantity}")
        return est - z * se, est + z * se

    @classmethod
    def from_stats(cls, kind, n, stats: RunningStats, checkpoints=()):
        return cls.from_moments(kind, n, stats.mean, stats.se, stats.count, checkpoints)

    @classmethod
    def from_moments(cls, kind, n, mean, se, count, checkpoints=()):
        """Unpack flat ``[price, delta, gamma]`` means and standard errors."""
        gamma = mean[1 + n :].reshape(n, n)
        return cls(
            kind=kind,
            price=float(mean[0]),
            delta=mean[1 : 1 + n].copy(),
            gamma=0.5 * (gamma + gamma.T),
            se_price=float(se[0]),
            se_delta=se[1 : 1 + n].copy(),
            se_gamma=se[1 + n :].reshape(n, n).copy(),
            paths_used=int(count),
            checkpoints=list(checkpoints),
        )


def _pack(price, delta, gamma):
    m = price.shape[0]
    return np.concatenate([price[:, None], delta, gamma.reshape(m, -1)], axis=1)


def _chunk_stats(samples: dict, start: int, splits: list[int]):
    """Reduce each kind's samples into stats blocks ending at ``splits``."""
    out = {}
    for kind, arr in samples.items():
        blocks = []
        lo = start
        for hi in splits:
            blocks.append(RunningStats.from_batch(arr[lo - start : hi - start]))
            lo = hi
        out[kind] = blocks
    return out


def run_chunks(sample_fn, dim: int, kinds, run: RunConfig) -> dict:
    """Drive ``sample_fn(first_path, n)`` over all chunks and merge in order.

    ``sample_fn`` returns ``{kind: (n, dim) samples}``.
    """
    accs = {k: Accumulator(dim, run.checkpoint_every) for k in kinds}
    probe = accs[kinds[0]]
    bounds = [
        (p0, min(p0 + run.chunk_size, run.n_paths)) for p0 in range(0, run.n_paths, run.chunk_size)
    ]

    def work(bound):
        p0, p1 = bound
        samples = sample_fn(p0, p1 - p0)
        return _chunk_stats(samples, p0, probe.split_points(p0, p1))

    if run.workers == 1:
        results = map(work, bounds)
    else:
        pool = ThreadPoolExecutor(max_workers=run.workers)
        results = pool.map(work, bounds)
    try:
        for res in results:
            for kind in kinds:
                for block in res[kind]:
                    accs[kind].merge_block(block)
    finally:
        if run.workers != 1:
            pool.shutdown()
    for acc in accs.values():
        if acc.every and (not acc.checkpoints or acc.checkpoints[-1].paths != acc.stats.count):
            acc.checkpoints.append(Checkpoint(acc.stats.count, acc.stats.mean.copy(), acc.stats.se.copy()))
    return accs


def _pw_samples(spec: ModelSpec, payoff, block, kinds, first: FirstStep | None, kernel):
    grid = spec.grid
    dt1 = grid.dt1
    sq = math.sqrt(dt1)
    z = block.z1
    x = sq * z
    out = {}
    needs_triple = any(k != "RPW" for k in kinds)
    if needs_triple:
        tri = simulate_triple(spec, block, first)
        f = payoff(tri.s_path, grid)
        f_hat = payoff(tri.s_hat_path, grid)
        f_bar = payoff(tri.s_bar_path, grid)
    else:
        f = payoff(simulate(spec, block.draws, first), grid)
    if not np.all(np.isfinite(f)):
        raise NumericalError("payoff produced non-finite values")
    ws = diagonal_weights(kernel, z, x)
    fc = f[:, None]
    if "RPW" in kinds:
        delta = fc * ws.delta_weight(dt1)
        gamma = fc[:, :, None] * check_symmetric(ws.gamma_weight(dt1))
        out["RPW"] = _pack(f, delta, gamma)
    if needs_triple:
        _, theta1_h = delta_weights(kernel, z, -x)
        _, lam1_h, lam2_h = gamma_weights(kernel, z, -x)
        _, _, lam2_b = gamma_weights(kernel, z, np.zeros_like(x))
        fh, fb = f_hat[:, None], f_bar[:, None]
        delta = fc * ws.theta0 + (fc * ws.theta1 - fh * theta1_h) / (2.0 * sq)
        fc3, fh3, fb3 = fc[:, :, None], fh[:, :, None], fb[:, :, None]
        gamma = (
            fc3 * ws.lambda0
            + (fc3 * ws.lambda1 - fh3 * lam1_h) / (2.0 * sq)
            + (fc3 * ws.lambda2 - 2.0 * fb3 * lam2_b + fh3 * lam2_h) / (2.0 * dt1)
        )
        out["PW"] = _pack(f, delta, check_symmetric(gamma))
    return out


def default_inflation(spec: ModelSpec, eps1: float = DEFAULT_EPS1) -> InflationParams:
    """``eps1`` (default 0.01) and the eigenvalue-based ``eps2`` rule."""
    return InflationParams(eps1=eps1, eps2=eps2_rule(spec.corr))


def path_weighting(spec: ModelSpec, payoff, run: RunConfig, kinds=("RPW", "PW"), eps: InflationParams | None = None) -> dict:
    """Run any of ``RPW``, ``PW`` and ``PWCI`` from one set of simulated paths.

    ``RPW`` and ``PW`` share the plain triple; ``PWCI`` needs its own triple
    because the first step differs.
    """
    kinds = tuple(kinds)
    bad = set(kinds) - {"RPW", "PW", "PWCI"}
    if bad:
        raise InvalidInputError(f"unknown path-weighting kinds {sorted(bad)}")
    n = spec.n
    dim = 1 + n + n * n
    plain = tuple(k for k in kinds if k in ("RPW", "PW"))
    kernel = diagonal_kernel(spec) if plain else None
    first_ci = kernel_ci = None
    if "PWCI" in kinds:
        first_ci = inflated_first_step(spec, eps or default_inflation(spec))
        kernel_ci = diagonal_kernel(spec, first_ci)

    def sample_fn(p0, m):
        block = generate_block(run.seed, p0, m, spec.grid.n_steps, n)
        out = _pw_samples(spec, payoff, block, plain, None, kernel) if plain else {}
        if first_ci is not None:
            out["PWCI"] = _pw_samples(spec, payoff, block, ("PW",), first_ci, kernel_ci)["PW"]
        return out

    accs = run_chunks(sample_fn, dim, kinds, run)
    return {k: GreeksEstimate.from_stats(k, n, a.stats, a.checkpoints) for k, a in accs.items()}


def raw_pw(spec: ModelSpec, payoff, run: RunConfig) -> GreeksEstimate:
    return path_weighting(spec, payoff, run, kinds=("RPW",))["RPW"]


def adjusted_pw(spec: ModelSpec, payoff, run: RunConfig) -> GreeksEstimate:
    return path_weighting(spec, payoff, run, kinds=("PW",))["PW"]


def pwci(spec: ModelSpec, payoff, run: RunConfig, eps: InflationParams | None = None) -> GreeksEstimate:
    """Adjusted path weighting on the covariance-inflated first step.

    Defined for singular correlations; ``eps`` defaults to
    :func:`default_inflation`.
    """
    return path_weighting(spec, payoff, run, kinds=("PWCI",), eps=eps)["PWCI"]


def default_bumps(spec: ModelSpec) -> np.ndarray:
    """Relative spot bumps: one day's expected move ``sigma / sqrt(360)``."""
    sigma, _, _ = spec.first_step_vols()
    return sigma / math.sqrt(360.0)


def fd_scenarios(n: int, what: str = "all") -> list[tuple]:
    """Bump patterns (tuples of -1/0/+1 per asset) needed for ``what``.

    ``delta``: up/down per asset.  ``gamma`` and ``all``: base, up/down per
    asset, and the four corners for every asset pair.
    """
    if what not in ("delta", "gamma", "all"):
        raise InvalidInputError(f"unknown FD target {what!r}")
    unit = np.eye(n, dtype=int)
    scen = []
    if what != "delta":
        scen.append((0,) * n)
    for j in range(n):
        scen.append(tuple(unit[j]))
        scen.append(tuple(-unit[j]))
    if what != "delta":
        for j in range(n):
            for k in range(j + 1, n):
                for a in (1, -1):
                    for b in (1, -1):
                        scen.append(tuple(a * unit[j] + b * unit[k]))
    return scen


def fd_greeks(spec: ModelSpec, payoff, run: RunConfig, bump=None, what: str = "all") -> GreeksEstimate:
    """Central finite differences sharing the noise of the base run.

    Delta uses the two-point stencil, diagonal Gamma three points and cross
    Gamma the four corners ``(+-h_j, +-h_k)``.  ``bump`` is relative to spot
    (scalar or per asset); the default is :func:`default_bumps`.  With
    ``what="delta"`` the price and Gamma entries are left at zero.
    """
    n = spec.n
    rel = default_bumps(spec) if bump is None else np.broadcast_to(np.asarray(bump, dtype=float), (n,))
    if np.any(~(rel > 0)):
        raise InvalidInputError("bump must be positive")
    h = spec.spot * rel
    scen = fd_scenarios(n, what)
    specs = [spec.with_spot(spec.spot + np.asarray(sc) * h) for sc in scen]
    pos = {sc: i for i, sc in enumerate(scen)}
    unit = np.eye(n, dtype=int)
    dim = 1 + n + n * n

    def sample_fn(p0, m):
        block = generate_block(run.seed, p0, m, spec.grid.n_steps, n)
        vals = [payoff(simulate(s, block.draws), spec.grid) for s in specs]
        price = vals[pos[(0,) * n]] if what != "delta" else np.zeros(m)
        delta = np.empty((m, n))
        gamma = np.zeros((m, n, n))
        for j in range(n):
            up, dn = vals[pos[tuple(unit[j])]], vals[pos[tuple(-unit[j])]]
            delta[:, j] = (up - dn) / (2.0 * h[j])
            if what != "delta":
                gamma[:, j, j] = (up - 2.0 * price + dn) / (h[j] * h[j])
        if what != "delta":
            for j in range(n):
                for k in range(j + 1, n):
                    pp = vals[pos[tuple(unit[j] + unit[k])]]
                    pm = vals[pos[tuple(unit[j] - unit[k])]]
                    mp = vals[pos[tuple(-unit[j] + unit[k])]]
                    mm = vals[pos[tuple(-unit[j] - unit[k])]]
                    g = (pp - pm - mp + mm) / (4.0 * h[j] * h[k])
                    gamma[:, j, k] = g
                    gamma[:, k, j] = g
        return {"FD": _pack(price, delta, gamma)}

    acc = run_chunks(sample_fn, dim, ("FD",), run)["FD"]
    return GreeksEstimate.from_stats("FD", n, acc.stats, acc.checkpoints)


def estimate(spec: ModelSpec, payoff, run: RunConfig, kinds=KINDS, eps: InflationParams | None = None, bump=None) -> dict:
    """All requested estimators, keyed by kind."""
    kinds = tuple(kinds)
    unknown = set(kinds) - set(KINDS)
    if unknown:
        raise InvalidInputError(f"unknown estimators {sorted(unknown)}")
    out = {}
    if "FD" in kinds:
        out["FD"] = fd_greeks(spec, payoff, run, bump=bump)
    pw_kinds = tuple(k for k in kinds if k != "FD")
    if pw_kinds:
        out.update(path_weighting(spec, payoff, run, kinds=pw_kinds, eps=eps))
    return {k: out[k] for k in kinds}
