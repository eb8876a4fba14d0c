"""Experiment configuration loaded from YAML.

A config has nested ``model``, ``grid``, ``payoff`` and ``run`` sections plus
one optional section per experiment.  Times and other scalars may be written
as fractions (``"7/360"``).  Every validation failure raises
:class:`~pwgreeks.errors.ConfigError` naming the offending key.

Minimal example::

    model:
      spot: [1.0, 1.0]
      vol: 0.2            # flat surfaces, or a ``surfaces`` list
      correlation: 0.5    # uniform off-diagonal, or a full matrix
    grid: {step: 7/360, first_step: 1/360}
    payoff:
      type: autocallable
      ko_times: [90/360, 180/360, 270/360, 1.0]
      ko_coupons: [0.1, 0.1, 0.1, 0.1]
      ko_barriers: [0.95, 0.9, 0.85, 0.8]
      ki_barrier: 0.75
      ki_strike: 1.0
    run: {n_paths: 100000, seed: 1}
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
import yaml

from .correlation import InflationParams, eps2_rule, factor, uniform_correlation
from .dynamics import ModelSpec
from .errors import ConfigError, InvalidInputError
from .estimators import KINDS, RunConfig
from .grid import DEFAULT_FIRST_STEP, build_grid
from .market import LocalVolSurface
from .payoffs import Autocallable, Constant, EuropeanCall, Linear, Smoothing

MIN_PATHS = 1000
PAYOFF_TYPES = ("autocallable", "european_call", "constant", "linear")


def parse_number(value, key: str) -> float:
    """Float from a number or a fraction string such as ``"7/360"``."""
    if isinstance(value, bool):
        raise ConfigError(f"expected a number, got {value!r}", key)
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError):
            pass
    raise ConfigError(f"expected a number, got {value!r}", key)


def _numbers(value, key: str) -> list[float]:
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError("expected a nonempty list", key)
    return [parse_number(v, f"{key}[{i}]") for i, v in enumerate(value)]


def _int(value, key: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(f"expected an integer >= {minimum}, got {value!r}", key)
    return value


def _section(raw: dict, key: str, required: bool = True) -> dict:
    sec = raw.get(key)
    if sec is None:
        if required:
            raise ConfigError("missing section", key)
        return {}
    if not isinstance(sec, dict):
        raise ConfigError("expected a mapping", key)
    return sec


def _check_keys(sec: dict, allowed: set, prefix: str) -> None:
    unknown = sorted(set(sec) - allowed)
    if unknown:
        raise ConfigError(f"unknown keys {unknown}", prefix)


@dataclass(frozen=True)
class ModelConfig:
    spot: tuple
    surfaces: tuple
    corr_matrix: np.ndarray

    @property
    def n(self) -> int:
        return len(self.spot)


@dataclass(frozen=True)
class GridConfig:
    step: float
    first_step: float | None = DEFAULT_FIRST_STEP


@dataclass(frozen=True)
class PayoffConfig:
    """Payoff parameters; ``build(n)`` returns a payoff for ``n`` assets."""

    type: str
    params: dict = field(default_factory=dict)

    def smoothing(self, level: int | None = None) -> Smoothing:
        sm = dict(self.params.get("smoothing", {}))
        if level is not None:
            sm["level"] = level
        return Smoothing(**sm)

    def build(self, spot, level: int | None = None):
        p = self.params
        if self.type == "autocallable":
            ref = p.get("ref_spot")
            ref = np.asarray(spot, dtype=float) if ref is None else np.broadcast_to(ref, np.shape(spot))
            return Autocallable(
                ko_times=p["ko_times"],
                ko_coupons=p["ko_coupons"],
                ko_barriers=p["ko_barriers"],
                ki_barrier=p["ki_barrier"],
                ki_strike=p["ki_strike"],
                ref_spot=ref,
                smoothing=self.smoothing(level),
                maturity=p.get("maturity"),
            )
        if self.type == "european_call":
            return EuropeanCall(strike=p["strike"], asset=p.get("asset", 0))
        if self.type == "constant":
            return Constant(p.get("value", 1.0))
        return Linear()

    @property
    def event_times(self) -> list[float]:
        p = self.params
        if self.type == "autocallable":
            times = list(p["ko_times"])
            if p.get("maturity") is not None and p["maturity"] > times[-1]:
                times.append(p["maturity"])
            return times
        return [p["maturity"]]


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed configuration.  ``raw`` keeps the normalised input for hashing."""

    model: ModelConfig
    grid: GridConfig
    payoff: PayoffConfig
    run: RunConfig
    estimators: tuple
    inflation: dict
    fd_bump: float | None
    sections: dict
    raw: dict = field(repr=False, default_factory=dict)

    def grid_for(self, first_step: float | None = None):
        first = self.grid.first_step if first_step is None else first_step
        try:
            return build_grid(self.payoff.event_times, self.grid.step, insert_first=first)
        except InvalidInputError as exc:
            raise ConfigError(str(exc), "grid") from None

    def model_spec(self, spot=None, grid=None, corr_matrix=None, surfaces=None) -> ModelSpec:
        spot = np.asarray(self.model.spot if spot is None else spot, dtype=float)
        surfaces = self.model.surfaces if surfaces is None else surfaces
        corr = self.model.corr_matrix if corr_matrix is None else corr_matrix
        try:
            return ModelSpec(spot, surfaces, factor(corr), self.grid_for() if grid is None else grid)
        except InvalidInputError as exc:
            raise ConfigError(str(exc), "model") from None

    def inflation_params(self, spec: ModelSpec) -> InflationParams:
        eps1 = self.inflation.get("eps1", 0.01)
        eps2 = self.inflation.get("eps2", "rule")
        if eps2 == "rule":
            eps2 = eps2_rule(spec.corr)
        return InflationParams(eps1=eps1, eps2=eps2)

    def section(self, name: str) -> dict:
        return self.sections.get(name, {})

    def with_run(self, **changes) -> "ExperimentConfig":
        """Copy with ``run`` fields overridden (CLI flags)."""
        fields = {k: getattr(self.run, k) for k in ("n_paths", "seed", "chunk_size", "workers", "checkpoint_every")}
        fields.update({k: v for k, v in changes.items() if v is not None})
        raw = copy.deepcopy(self.raw)
        raw.setdefault("run", {}).update({k: v for k, v in changes.items() if v is not None})
        try:
            run = RunConfig(**fields)
        except InvalidInputError as exc:
            raise ConfigError(str(exc), "run") from None
        if run.n_paths < MIN_PATHS:
            raise ConfigError(f"n_paths must be >= {MIN_PATHS}", "run.n_paths")
        return ExperimentConfig(
            self.model, self.grid, self.payoff, run, self.estimators,
            self.inflation, self.fd_bump, self.sections, raw,
        )

    def with_section(self, name: str, value) -> "ExperimentConfig":
        """Copy with the top-level section ``name`` replaced and re-validated."""
        raw = copy.deepcopy(self.raw)
        raw[name] = copy.deepcopy(value)
        return parse_config(raw)

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form of the normalised config."""
        text = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def _parse_surface(sec, key: str, s_ref: float) -> LocalVolSurface:
    if not isinstance(sec, dict):
        raise ConfigError("expected a mapping", key)
    _check_keys(sec, {"tenors", "atm", "skew", "kurt", "s_ref"}, key)
    try:
        return LocalVolSurface(
            tenors=_numbers(sec.get("tenors"), f"{key}.tenors"),
            atm=_numbers(sec.get("atm"), f"{key}.atm"),
            skew=_numbers(sec.get("skew", [0.0] * len(sec.get("atm") or [0])), f"{key}.skew"),
            kurt=_numbers(sec.get("kurt", [0.0] * len(sec.get("atm") or [0])), f"{key}.kurt"),
            s_ref=parse_number(sec.get("s_ref", s_ref), f"{key}.s_ref"),
        )
    except InvalidInputError as exc:
        raise ConfigError(str(exc), key) from None


def _parse_corr(value, n: int, key: str) -> np.ndarray:
    if isinstance(value, (int, float, str)) and not isinstance(value, bool):
        c = parse_number(value, key)
        if not -1.0 <= c <= 1.0:
            raise ConfigError("correlation must lie in [-1, 1]", key)
        return uniform_correlation(n, c)
    if not isinstance(value, list) or len(value) != n:
        raise ConfigError(f"expected a scalar or an {n}x{n} matrix", key)
    mat = np.array([_numbers(row, f"{key}[{i}]") for i, row in enumerate(value)])
    if mat.shape != (n, n):
        raise ConfigError(f"expected an {n}x{n} matrix", key)
    try:
        factor(mat)
    except InvalidInputError as exc:
        raise ConfigError(str(exc), key) from None
    return mat


def _parse_model(raw: dict) -> ModelConfig:
    sec = _section(raw, "model")
    _check_keys(sec, {"spot", "vol", "surfaces", "correlation"}, "model")
    spot = _numbers(sec.get("spot"), "model.spot")
    if any(s <= 0 for s in spot):
        raise ConfigError("spot must be positive", "model.spot")
    n = len(spot)
    if ("vol" in sec) == ("surfaces" in sec):
        raise ConfigError("give exactly one of 'vol' or 'surfaces'", "model")
    if "vol" in sec:
        vols = sec["vol"]
        vols = _numbers(vols if isinstance(vols, list) else [vols] * n, "model.vol")
        if len(vols) != n or any(v <= 0 for v in vols):
            raise ConfigError(f"need {n} positive vols", "model.vol")
        surfaces = tuple(LocalVolSurface.flat(v, s_ref=s) for v, s in zip(vols, spot))
    else:
        secs = sec["surfaces"]
        if isinstance(secs, dict):
            secs = [secs] * n
        if not isinstance(secs, list) or len(secs) != n:
            raise ConfigError(f"need {n} surfaces", "model.surfaces")
        surfaces = tuple(
            _parse_surface(s, f"model.surfaces[{i}]", spot[i]) for i, s in enumerate(secs)
        )
    corr = _parse_corr(sec.get("correlation", 0.0), n, "model.correlation")
    return ModelConfig(tuple(spot), surfaces, corr)


def _parse_grid(raw: dict) -> GridConfig:
    sec = _section(raw, "grid", required=False)
    _check_keys(sec, {"step", "first_step"}, "grid")
    step = parse_number(sec.get("step", "7/360"), "grid.step")
    if step <= 0:
        raise ConfigError("step must be positive", "grid.step")
    first = sec.get("first_step", DEFAULT_FIRST_STEP)
    if first is not None:
        first = parse_number(first, "grid.first_step")
        if first <= 0:
            raise ConfigError("first_step must be positive", "grid.first_step")
    return GridConfig(step, first)


_AUTOCALL_KEYS = {
    "type", "ko_times", "ko_coupons", "ko_barriers", "ki_barrier", "ki_strike",
    "ref_spot", "maturity", "smoothing",
}


def _parse_smoothing(sec, key: str) -> dict:
    if sec is None:
        return {}
    if not isinstance(sec, dict):
        raise ConfigError("expected a mapping", key)
    _check_keys(sec, {"level", "b", "k", "ki_b"}, key)
    out = {}
    if "level" in sec:
        out["level"] = _int(sec["level"], f"{key}.level", minimum=0)
    for name in ("b", "k", "ki_b"):
        if sec.get(name) is not None:
            out[name] = parse_number(sec[name], f"{key}.{name}")
    try:
        Smoothing(**out)
    except InvalidInputError as exc:
        raise ConfigError(str(exc), key) from None
    return out


def _parse_payoff(raw: dict, n: int) -> PayoffConfig:
    sec = _section(raw, "payoff")
    kind = sec.get("type")
    if kind not in PAYOFF_TYPES:
        raise ConfigError(f"type must be one of {PAYOFF_TYPES}", "payoff.type")
    if kind == "autocallable":
        _check_keys(sec, _AUTOCALL_KEYS, "payoff")
        p = {
            "ko_times": _numbers(sec.get("ko_times"), "payoff.ko_times"),
            "ko_coupons": _numbers(sec.get("ko_coupons"), "payoff.ko_coupons"),
            "ko_barriers": _numbers(sec.get("ko_barriers"), "payoff.ko_barriers"),
            "ki_barrier": parse_number(sec.get("ki_barrier"), "payoff.ki_barrier"),
            "ki_strike": parse_number(sec.get("ki_strike"), "payoff.ki_strike"),
            "smoothing": _parse_smoothing(sec.get("smoothing"), "payoff.smoothing"),
        }
        if sec.get("maturity") is not None:
            p["maturity"] = parse_number(sec["maturity"], "payoff.maturity")
        if sec.get("ref_spot") is not None:
            ref = sec["ref_spot"]
            p["ref_spot"] = _numbers(ref if isinstance(ref, list) else [ref] * n, "payoff.ref_spot")
        cfg = PayoffConfig(kind, p)
        try:
            cfg.build(np.ones(n))
        except InvalidInputError as exc:
            raise ConfigError(str(exc), "payoff") from None
        return cfg
    _check_keys(sec, {"type", "strike", "asset", "value", "maturity"}, "payoff")
    p = {"maturity": parse_number(sec.get("maturity"), "payoff.maturity")}
    if p["maturity"] <= 0:
        raise ConfigError("maturity must be positive", "payoff.maturity")
    if kind == "european_call":
        p["strike"] = parse_number(sec.get("strike"), "payoff.strike")
        p["asset"] = _int(sec.get("asset", 0), "payoff.asset", minimum=0)
        if p["asset"] >= n:
            raise ConfigError("asset index out of range", "payoff.asset")
        if p["strike"] <= 0:
            raise ConfigError("strike must be positive", "payoff.strike")
    elif kind == "constant":
        p["value"] = parse_number(sec.get("value", 1.0), "payoff.value")
    return PayoffConfig(kind, p)


def _parse_run(raw: dict) -> RunConfig:
    sec = _section(raw, "run", required=False)
    _check_keys(sec, {"n_paths", "seed", "chunk_size", "workers", "checkpoint_every"}, "run")
    n_paths = _int(sec.get("n_paths", 100_000), "run.n_paths", minimum=MIN_PATHS)
    every = sec.get("checkpoint_every")
    return RunConfig(
        n_paths=n_paths,
        seed=_int(sec.get("seed", 1), "run.seed", minimum=0),
        chunk_size=_int(sec.get("chunk_size", 10_000), "run.chunk_size"),
        workers=_int(sec.get("workers", 1), "run.workers"),
        checkpoint_every=None if every is None else _int(every, "run.checkpoint_every"),
    )


def _parse_inflation(raw: dict) -> dict:
    sec = _section(raw, "inflation", required=False)
    _check_keys(sec, {"eps1", "eps2"}, "inflation")
    out = {}
    if "eps1" in sec:
        out["eps1"] = parse_number(sec["eps1"], "inflation.eps1")
    if "eps2" in sec and sec["eps2"] != "rule":
        out["eps2"] = parse_number(sec["eps2"], "inflation.eps2")
    try:
        InflationParams(out.get("eps1", 0.01), out.get("eps2", 0.0))
    except InvalidInputError as exc:
        raise ConfigError(str(exc), "inflation") from None
    return out


def _parse_sections(raw: dict) -> dict:
    out = {}
    lad = _section(raw, "ladder", required=False)
    if lad:
        _check_keys(lad, {"multipliers", "low", "high", "points"}, "ladder")
        if "multipliers" in lad:
            mult = _numbers(lad["multipliers"], "ladder.multipliers")
        else:
            lo = parse_number(lad.get("low", 0.8), "ladder.low")
            hi = parse_number(lad.get("high", 1.2), "ladder.high")
            pts = _int(lad.get("points", 11), "ladder.points")
            mult = np.linspace(lo, hi, pts).tolist()
        if any(m <= 0 for m in mult):
            raise ConfigError("multipliers must be positive", "ladder")
        out["ladder"] = {"multipliers": mult}
    sl = _section(raw, "slopes", required=False)
    if sl:
        _check_keys(sl, {"k_values", "base_dt1", "levels", "kinds"}, "slopes")
        ks = sl.get("k_values", list(range(7)))
        if not isinstance(ks, list) or not ks:
            raise ConfigError("expected a nonempty list", "slopes.k_values")
        out["slopes"] = {
            "k_values": [_int(k, f"slopes.k_values[{i}]", minimum=0) for i, k in enumerate(ks)],
            "base_dt1": parse_number(sl.get("base_dt1", "1/360"), "slopes.base_dt1"),
            "levels": [_int(v, "slopes.levels", minimum=0) for v in sl.get("levels", [0, 1, 2])],
            "kinds": _kinds(sl.get("kinds", ["RPW", "PW"]), "slopes.kinds", allowed=("RPW", "PW")),
        }
    vt = _section(raw, "variance_table", required=False)
    if vt:
        _check_keys(vt, {"vols", "corrs", "levels", "kinds"}, "variance_table")
        out["variance_table"] = {
            "vols": _numbers(vt.get("vols"), "variance_table.vols"),
            "corrs": _numbers(vt.get("corrs"), "variance_table.corrs"),
            "levels": [_int(v, "variance_table.levels", minimum=0) for v in vt.get("levels", [0, 2])],
            "kinds": _kinds(vt.get("kinds", list(KINDS)), "variance_table.kinds"),
        }
    tm = _section(raw, "timing", required=False)
    if tm:
        _check_keys(tm, {"sizes", "repeats", "vol", "corr"}, "timing")
        sizes = tm.get("sizes", [1, 2, 4, 8])
        if not isinstance(sizes, list) or not sizes:
            raise ConfigError("expected a nonempty list", "timing.sizes")
        out["timing"] = {
            "sizes": [_int(s, "timing.sizes") for s in sizes],
            "repeats": _int(tm.get("repeats", 3), "timing.repeats"),
            "vol": parse_number(tm.get("vol", 0.2), "timing.vol"),
            "corr": parse_number(tm.get("corr", 0.0), "timing.corr"),
        }
    return out


def _kinds(value, key: str, allowed=KINDS) -> tuple:
    if not isinstance(value, list) or not value or any(k not in allowed for k in value):
        raise ConfigError(f"expected a nonempty list drawn from {list(allowed)}", key)
    return tuple(value)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def parse_config(raw: dict) -> ExperimentConfig:
    """Validate a config mapping (as loaded from YAML)."""
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a mapping", "<root>")
    _check_keys(
        raw,
        {"model", "grid", "payoff", "run", "estimators", "inflation", "fd_bump",
         "ladder", "slopes", "variance_table", "timing"},
        "<root>",
    )
    model = _parse_model(raw)
    fd_bump = raw.get("fd_bump")
    if fd_bump is not None:
        fd_bump = parse_number(fd_bump, "fd_bump")
        if fd_bump <= 0:
            raise ConfigError("must be positive", "fd_bump")
    cfg = ExperimentConfig(
        model=model,
        grid=_parse_grid(raw),
        payoff=_parse_payoff(raw, model.n),
        run=_parse_run(raw),
        estimators=_kinds(raw.get("estimators", list(KINDS)), "estimators"),
        inflation=_parse_inflation(raw),
        fd_bump=fd_bump,
        sections=_parse_sections(raw),
        raw=_jsonable(copy.deepcopy(raw)),
    )
    if cfg.payoff.type == "autocallable":
        # rejects off-grid dates and t_1 landing on an event
        cfg.payoff.build(np.asarray(model.spot)).event_indices(cfg.grid_for())
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}", str(path)) from None
    return parse_config(raw)
