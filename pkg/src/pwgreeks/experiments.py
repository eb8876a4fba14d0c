"""The five numerical studies, each producing CSV tables.

Every ``run_*`` function takes an :class:`~pwgreeks.config.ExperimentConfig`
and returns ``{file name: Table}``.  :func:`write_outputs` writes the tables
plus a JSON run manifest.  Apart from the timing study, outputs depend only
on the config (seed included), so reruns give identical bytes.
"""

from __future__ import annotations

import csv
import io
import json
import math
import platform
import statistics
import time
from dataclasses import dataclass
from importlib import metadata
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .correlation import InflationParams, factor, uniform_correlation
from .dynamics import ModelSpec, inflated_first_step, simulate
from .errors import ConfigError, InvalidInputError
from .estimators import (
    GreeksEstimate,
    RunConfig,
    estimate,
    fd_greeks,
    path_weighting,
    run_chunks,
)
from .market import LocalVolSurface
from .rng import generate_block
from .stats import Z99

CSV_SCHEMA_VERSION = 1
EXPERIMENTS = ("convergence", "ladder", "slopes", "variance-table", "timing")


@dataclass(frozen=True)
class Table:
    header: tuple
    rows: list

    def column(self, name: str) -> list:
        i = self.header.index(name)
        return [r[i] for r in self.rows]

    def where(self, **match) -> list[dict]:
        """Rows as dicts whose columns equal ``match``."""
        out = []
        for r in self.rows:
            d = dict(zip(self.header, r))
            if all(d[k] == v for k, v in match.items()):
                out.append(d)
        return out


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def table_to_csv(table: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.header)
    for r in table.rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def components(n: int) -> list[tuple[str, str, tuple]]:
    """``(label, attribute, index)`` for price, each Delta and upper Gamma entry."""
    out = [("price", "price", ())]
    out += [(f"delta_{j}", "delta", (j,)) for j in range(n)]
    out += [(f"gamma_{j}_{k}", "gamma", (j, k)) for j in range(n) for k in range(j, n)]
    return out


def _value(est: GreeksEstimate, attr: str, idx: tuple):
    val = getattr(est, attr)
    se = getattr(est, f"se_{attr}")
    if idx:
        return float(val[idx]), float(se[idx])
    return float(val), float(se)


def _spec_and_payoff(cfg: ExperimentConfig, level=None, spot=None):
    spec = cfg.model_spec(spot=spot)
    payoff = cfg.payoff.build(np.asarray(cfg.model.spot), level)
    return spec, payoff


def run_convergence(cfg: ExperimentConfig) -> dict:
    """Running estimates with 99% bands at every checkpoint, per estimator."""
    run = cfg.run
    if run.checkpoint_every is None:
        run = RunConfig(run.n_paths, run.seed, run.chunk_size, run.workers, max(1, run.n_paths // 20))
    spec, payoff = _spec_and_payoff(cfg)
    eps = cfg.inflation_params(spec) if "PWCI" in cfg.estimators else None
    res = estimate(spec, payoff, run, kinds=cfg.estimators, eps=eps, bump=cfg.fd_bump)
    rows = []
    n = spec.n
    for kind, est in res.items():
        for cp in est.checkpoints:
            proxy = GreeksEstimate.from_moments(kind, n, cp.mean, cp.se, cp.paths)
            for label, attr, idx in components(n):
                v, se = _value(proxy, attr, idx)
                rows.append((kind, cp.paths, label, v, se, v - Z99 * se, v + Z99 * se))
    header = ("estimator", "paths", "quantity", "estimate", "se", "ci99_low", "ci99_high")
    return {"convergence.csv": Table(header, rows)}


def run_spot_ladder(cfg: ExperimentConfig) -> dict:
    """FD and PW Greeks on a ladder of scaled spots, same seed at every point."""
    mult = cfg.section("ladder").get("multipliers")
    if not mult:
        raise ConfigError("missing section", "ladder")
    base = np.asarray(cfg.model.spot)
    payoff = cfg.payoff.build(base)
    kinds = tuple(k for k in ("FD", "PW") if k in cfg.estimators) or ("FD", "PW")
    rows = []
    for m in mult:
        spec = cfg.model_spec(spot=base * m)
        res = estimate(spec, payoff, cfg.run, kinds=kinds, bump=cfg.fd_bump)
        for kind, est in res.items():
            for label, attr, idx in components(spec.n):
                v, se = _value(est, attr, idx)
                rows.append((m, kind, label, v, se, v - Z99 * se, v + Z99 * se))
    header = ("spot_multiplier", "estimator", "quantity", "estimate", "se", "ci99_low", "ci99_high")
    return {"ladder.csv": Table(header, rows)}


def fit_slope(x, y) -> float:
    """Least-squares slope of ``y`` on ``x``."""
    return float(np.polyfit(np.asarray(x, float), np.asarray(y, float), 1)[0])


def run_variance_slopes(cfg: ExperimentConfig) -> dict:
    """Per-path variance of each Greek component against ``dt1 = base / 2^k``.

    The tail ``t_2, ..., t_N`` of the grid stays fixed.  ``slopes.csv`` holds
    the least-squares slope of ``log Var`` on ``log dt1`` and, equivalently,
    of ``log SE`` on ``log(1/dt1)`` (minus one half of the former).
    """
    sec = cfg.section("slopes")
    if not sec:
        raise ConfigError("missing section", "slopes")
    levels = sec["levels"] if cfg.payoff.type == "autocallable" else [0]
    base_grid = cfg.grid_for()
    points, fits = [], []
    for level in levels:
        spec0, payoff = _spec_and_payoff(cfg, level)
        label = f"PW{level}"
        series: dict = {}
        for k in sec["k_values"]:
            dt1 = sec["base_dt1"] * 2.0 ** (-k)
            try:
                grid = base_grid.with_first_time(dt1)
            except InvalidInputError as exc:
                raise ConfigError(str(exc), "slopes.base_dt1") from None
            spec = spec0.with_grid(grid)
            res = path_weighting(spec, payoff, cfg.run, kinds=sec["kinds"])
            for kind, est in res.items():
                for qlabel, attr, idx in components(spec.n)[1:]:
                    _, se = _value(est, attr, idx)
                    var = se * se * est.paths_used
                    points.append((label, level, kind, qlabel, k, dt1, math.log(1.0 / dt1), se, var))
                    series.setdefault((kind, qlabel), []).append((dt1, se, var))
        for (kind, qlabel), pts in series.items():
            dts = np.array([p[0] for p in pts])
            var = np.array([p[2] for p in pts])
            if np.all(var > 0):
                s = fit_slope(np.log(dts), np.log(var))
            else:
                s = float("nan")
            fits.append((label, level, kind, qlabel, len(pts), s, -0.5 * s))
    return {
        "slopes_points.csv": Table(
            ("label", "smoothing_level", "estimator", "quantity", "k", "dt1", "log_inv_dt1", "se", "per_path_var"),
            points,
        ),
        "slopes.csv": Table(
            ("label", "smoothing_level", "estimator", "quantity", "points",
             "slope_log_var_vs_log_dt1", "slope_log_se_vs_log_inv_dt1"),
            fits,
        ),
    }


def flat_spec(n: int, spot: float, vol: float, corr, grid) -> ModelSpec:
    """``n`` identical assets with flat vol and uniform correlation."""
    spots = np.full(n, float(spot))
    surfaces = tuple(LocalVolSurface.flat(vol, s_ref=spot) for _ in range(n))
    mat = uniform_correlation(n, corr) if np.isscalar(corr) else np.asarray(corr, float)
    return ModelSpec(spots, surfaces, factor(mat), grid)


_TABLE_KINDS = ("FD", "RPW", "PW", "PWCI")


def run_variance_table(cfg: ExperimentConfig) -> dict:
    """Standard errors of Delta and Gamma per (vol, corr, smoothing) and estimator.

    Uses the config's payoff on flat-vol assets at the first configured spot.
    Kinds that need an invertible correlation report ``nan`` when it is
    singular.
    """
    sec = cfg.section("variance_table")
    if not sec:
        raise ConfigError("missing section", "variance_table")
    n = cfg.model.n
    spot = float(cfg.model.spot[0])
    grid = cfg.grid_for()
    kinds = sec["kinds"]
    levels = sec["levels"] if cfg.payoff.type == "autocallable" else [0]
    rows = []
    for vol in sec["vols"]:
        for corr in sec["corrs"]:
            spec = flat_spec(n, spot, vol, corr, grid)
            eps = cfg.inflation_params(spec)
            for level in levels:
                payoff = cfg.payoff.build(spec.spot, level)
                res = {}
                if "FD" in kinds:
                    res["FD"] = fd_greeks(spec, payoff, cfg.run, bump=cfg.fd_bump)
                plain = tuple(k for k in ("RPW", "PW") if k in kinds)
                if plain and not spec.corr.is_singular:
                    res.update(path_weighting(spec, payoff, cfg.run, kinds=plain))
                if "PWCI" in kinds:
                    res.update(path_weighting(spec, payoff, cfg.run, kinds=("PWCI",), eps=eps))
                row = [vol, corr, level, eps.eps1, eps.eps2]
                se = {}
                for kind in _TABLE_KINDS:
                    est = res.get(kind)
                    d = float(est.se_delta[0]) if est else float("nan")
                    g = float(est.se_gamma[0, 0]) if est else float("nan")
                    c = float(est.se_gamma[0, 1]) if est and n > 1 else float("nan")
                    se[kind] = (d, g, c)
                    row += [d, g, c]
                for num, den in (("RPW", "PW"), ("PW", "PWCI")):
                    row += [_ratio(se[num][0], se[den][0]), _ratio(se[num][1], se[den][1])]
                rows.append(tuple(row))
    header = ["vol", "corr", "smoothing_level", "eps1", "eps2"]
    for kind in _TABLE_KINDS:
        header += [f"{kind}_se_delta", f"{kind}_se_gamma", f"{kind}_se_cross_gamma"]
    header += ["RPW_over_PW_delta", "RPW_over_PW_gamma", "PW_over_PWCI_delta", "PW_over_PWCI_gamma"]
    return {"variance_table.csv": Table(tuple(header), rows)}


def _ratio(a: float, b: float) -> float:
    # a denominator at round-off level means the estimator has no variance
    if math.isnan(a) or math.isnan(b) or b <= 1e-12 * abs(a):
        return float("nan")
    return a / b


def _median_time(fn, repeats: int) -> float:
    fn()
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def run_timing(cfg: ExperimentConfig) -> dict:
    """Wall-clock FD/PW ratios for full Delta and full Gamma versus basket size.

    Each timing is the median of ``repeats`` runs after one discarded warm-up.
    The PW pass computes price, Delta and Gamma together, so the same PW time
    is the denominator of both ratios.
    """
    sec = cfg.section("timing")
    if not sec:
        raise ConfigError("missing section", "timing")
    spot = float(cfg.model.spot[0])
    grid = cfg.grid_for()
    run = cfg.run
    rows = []
    for n in sec["sizes"]:
        spec = flat_spec(n, spot, sec["vol"], sec["corr"], grid)
        payoff = cfg.payoff.build(spec.spot)
        t_fd_d = _median_time(lambda: fd_greeks(spec, payoff, run, bump=cfg.fd_bump, what="delta"), sec["repeats"])
        t_fd_g = _median_time(lambda: fd_greeks(spec, payoff, run, bump=cfg.fd_bump, what="all"), sec["repeats"])
        t_pw = _median_time(lambda: path_weighting(spec, payoff, run, kinds=("PW",)), sec["repeats"])
        rows.append((n, run.n_paths, 2 * n, 2 * n * n + 1, t_fd_d, t_fd_g, t_pw, t_fd_d / t_pw, t_fd_g / t_pw))
    header = ("n_assets", "paths", "fd_delta_runs", "fd_gamma_runs", "fd_delta_seconds",
              "fd_gamma_seconds", "pw_seconds", "delta_time_ratio", "gamma_time_ratio")
    return {"timing.csv": Table(header, rows)}


RUNNERS = {
    "convergence": run_convergence,
    "ladder": run_spot_ladder,
    "slopes": run_variance_slopes,
    "variance-table": run_variance_table,
    "timing": run_timing,
}


def run_experiment(name: str, cfg: ExperimentConfig) -> dict:
    if name not in RUNNERS:
        raise ConfigError(f"unknown experiment {name!r}", "experiment")
    return RUNNERS[name](cfg)


def _versions() -> dict:
    out = {"python": platform.python_version()}
    for pkg in ("artifact", "numpy", "scipy", "numba", "click", "PyYAML"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def write_outputs(out_dir, name: str, cfg: ExperimentConfig, tables: dict) -> list[Path]:
    """Write every table and ``manifest.json``; returns the paths written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for fname, table in tables.items():
        path = out_dir / fname
        path.write_text(table_to_csv(table))
        written.append(path)
    manifest = {
        "experiment": name,
        "csv_schema_version": CSV_SCHEMA_VERSION,
        "config_sha256": cfg.digest(),
        "seed": cfg.run.seed,
        "n_paths": cfg.run.n_paths,
        "chunk_size": cfg.run.chunk_size,
        "files": sorted(tables),
        "versions": _versions(),
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    written.append(path)
    return written


def inflation_bias(spec: ModelSpec, payoff, run: RunConfig, eps1_values, eps2: float = 0.0) -> Table:
    """Price shift caused by first-step covariance inflation, per ``eps1``.

    Inflated and plain paths share all noise; each path is averaged with its
    first-step reflection, which removes the term linear in ``Z_1``.  The
    table carries the mean shift, its standard error and the log-log slope
    of ``|bias|`` against ``eps1``.
    """
    eps1_values = [float(e) for e in eps1_values]
    firsts = [inflated_first_step(spec, InflationParams(e, eps2)) for e in eps1_values]
    grid = spec.grid

    def sample_fn(p0, m):
        block = generate_block(run.seed, p0, m, grid.n_steps, spec.n)
        refl = block.reflected()
        base = 0.5 * (payoff(simulate(spec, block.draws), grid) + payoff(simulate(spec, refl), grid))
        cols = [
            0.5 * (payoff(simulate(spec, block.draws, f), grid) + payoff(simulate(spec, refl, f), grid)) - base
            for f in firsts
        ]
        return {"BIAS": np.stack(cols, axis=1)}

    stats = run_chunks(sample_fn, len(eps1_values), ("BIAS",), run)["BIAS"].stats
    bias, se = stats.mean, stats.se
    slope = fit_slope(np.log(eps1_values), np.log(np.abs(bias))) if np.all(bias != 0) else float("nan")
    rows = [(e, eps2, float(b), float(s), slope) for e, b, s in zip(eps1_values, bias, se)]
    return Table(("eps1", "eps2", "bias", "se", "loglog_slope"), rows)
