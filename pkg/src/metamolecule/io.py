"""Run configuration, the series file format and run orchestration."""
from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import math
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .analysis import CHANNELS, TimeSeries, compare, energy_rate
from .grid import GridGeometry, run_grid
from .model import ModelParams, ParameterError, validate_params
from .pwd import RunSchedule, ensemble_series, run_ensemble


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{key + ': ' if key else ''}{message}{where}")
        self.key = key
        self.line = line


@dataclass(frozen=True)
class GridSettings:
    L_R: float = 6.0
    L_P: float = 6.0
    dR: float = 0.1
    dP: float = 0.1
    tau: float = 0.001
    t_max: float = 100.0
    stride: int = 100
    boundary_fraction: float = 1e-5

    @property
    def geometry(self) -> GridGeometry:
        return GridGeometry(self.L_R, self.L_P, self.dR, self.dP)


@dataclass(frozen=True)
class CompareSettings:
    rmse_tol: float = 0.02
    sigma_factor: float = 3.0
    abs_slack: float = 0.02
    channels: tuple = ("sx", "sz")


@dataclass(frozen=True)
class PwdSettings:
    tau: float = 0.1
    t_max: float = 100.0
    stride: int = 1
    n_traj: int = 100_000
    n_blocks: int = 20
    weight_bound: float = 1e12


ENGINES = ("pwd", "grid", "both")


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams = field(default_factory=ModelParams)
    engine: str = "both"
    pwd: PwdSettings = field(default_factory=PwdSettings)
    grid: GridSettings = field(default_factory=GridSettings)
    compare: CompareSettings = field(default_factory=CompareSettings)
    output: str = "results"
    seed: int = 20240101
    workers: int = 1
    initial_sigma_z: int = 1

    @property
    def schedule(self) -> RunSchedule:
        s = self.pwd
        return RunSchedule(s.tau, s.t_max, s.stride, s.n_traj, self.seed, s.n_blocks, s.weight_bound)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["compare"]["channels"] = list(self.compare.channels)
        return d

    def digest(self) -> str:
        """Hash of everything that affects results (not output path or worker count)."""
        d = self.to_dict()
        del d["output"], d["workers"]
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


_SECTIONS = {"model": ModelParams, "pwd": PwdSettings, "grid": GridSettings, "compare": CompareSettings}
_SCALARS = {"engine": str, "output": str, "seed": int, "workers": int, "initial_sigma_z": int}


def _coerce(value, kind, key):
    if kind is tuple:
        if isinstance(value, str):
            value = [value]
        if not isinstance(value, (list, tuple)):
            raise ConfigError("expected a list", key)
        return tuple(str(v) for v in value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
            raise ConfigError(f"expected an integer, got {value!r}", key)
        return int(value)
    if kind is float:
        if isinstance(value, bool):
            raise ConfigError(f"expected a number, got {value!r}", key)
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"expected a number, got {value!r}", key) from None
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", key)
        return value
    raise AssertionError(kind)


def _field_kind(f):
    t = f.type if isinstance(f.type, str) else f.type.__name__
    return {"float": float, "int": int, "str": str, "tuple": tuple}[t]


def config_from_dict(doc: dict | None) -> RunConfig:
    """Build and validate a :class:`RunConfig`; unknown keys are rejected."""
    doc = doc or {}
    if not isinstance(doc, dict):
        raise ConfigError("top level must be a mapping")
    kwargs = {}
    for key, value in doc.items():
        if key in _SECTIONS:
            cls = _SECTIONS[key]
            if value is None:
                value = {}
            if not isinstance(value, dict):
                raise ConfigError("expected a mapping", key)
            known = {f.name: f for f in fields(cls)}
            sub = {}
            for k, v in value.items():
                if k not in known:
                    raise ConfigError(f"unknown key (allowed: {', '.join(known)})", f"{key}.{k}")
                sub[k] = _coerce(v, _field_kind(known[k]), f"{key}.{k}")
            kwargs[key] = cls(**sub)
        elif key in _SCALARS:
            kwargs[key] = _coerce(value, _SCALARS[key], key)
        else:
            raise ConfigError("unknown key", key)
    cfg = RunConfig(**kwargs)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    try:
        validate_params(cfg.model)
    except ParameterError as e:
        raise ConfigError(str(e).split(": ", 1)[1], f"model.{e.key}") from None
    if cfg.engine not in ENGINES:
        raise ConfigError(f"must be one of {ENGINES}", "engine")
    if cfg.initial_sigma_z not in (1, -1):
        raise ConfigError("must be +1 (ground-state start) or -1 (swapped slot convention)", "initial_sigma_z")
    if cfg.workers < 1:
        raise ConfigError("must be >= 1", "workers")
    checks = [
        ("pwd.tau", cfg.pwd.tau > 0),
        ("pwd.t_max", cfg.pwd.t_max >= cfg.pwd.tau),
        ("pwd.stride", cfg.pwd.stride >= 1),
        ("pwd.n_traj", cfg.pwd.n_traj >= 1),
        ("pwd.n_blocks", cfg.pwd.n_blocks >= 2),
        ("pwd.weight_bound", cfg.pwd.weight_bound > 0),
        ("grid.L_R", cfg.grid.L_R > 0),
        ("grid.L_P", cfg.grid.L_P > 0),
        ("grid.dR", cfg.grid.dR > 0),
        ("grid.dP", cfg.grid.dP > 0),
        ("grid.tau", cfg.grid.tau > 0),
        ("grid.t_max", cfg.grid.t_max >= cfg.grid.tau),
        ("grid.stride", cfg.grid.stride >= 1),
        ("grid.boundary_fraction", cfg.grid.boundary_fraction > 0),
    ]
    for key, ok in checks:
        section, name = key.split(".")
        v = getattr(getattr(cfg, section), name)
        if not ok or not math.isfinite(v):
            raise ConfigError(f"invalid value {v!r}", key)
    if cfg.engine == "both":
        dt_p = cfg.pwd.tau * cfg.pwd.stride
        dt_g = cfg.grid.tau * cfg.grid.stride
        if not math.isclose(dt_p, dt_g, rel_tol=1e-9):
            raise ConfigError(f"output spacings differ (pwd {dt_p}, grid {dt_g}); compare never resamples", "grid.stride")


def apply_overrides(cfg: RunConfig, overrides: dict) -> RunConfig:
    """Replace top-level fields and re-validate."""
    cfg = replace(cfg, **overrides)
    _validate(cfg)
    return cfg


def parse_config(text: str) -> RunConfig:
    """Parse a YAML document into a validated :class:`RunConfig`."""
    try:
        doc = yaml.safe_load(text)
    except yaml.MarkedYAMLError as e:
        line = e.problem_mark.line + 1 if e.problem_mark is not None else None
        raise ConfigError(f"parse error: {e.problem}", line=line) from None
    return config_from_dict(doc)


# -- series files --------------------------------------------------------------

COLUMNS = ("t", "sx", "sx_err", "sz", "sz_err", "e_s", "e_b", "e_c", "e_total", "dedt")


def _fmt(x: float) -> str:
    return repr(float(x))


def emit_series(series: TimeSeries, path) -> None:
    """Write a series as CSV preceded by '#' metadata lines."""
    extra = sorted(k for k in series.data if k not in COLUMNS)
    cols = list(COLUMNS) + extra
    buf = _io.StringIO()
    buf.write(f"# provenance: {json.dumps(series.provenance)}\n")
    for k in sorted(series.meta):
        buf.write(f"# {k}: {json.dumps(series.meta[k], sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for i, t in enumerate(series.t):
        row = []
        for c in cols:
            if c == "t":
                row.append(_fmt(t))
            elif c in series.data:
                row.append(_fmt(series.data[c][i]))
            else:
                row.append("")
        w.writerow(row)
    Path(path).write_text(buf.getvalue())


class SeriesFormatError(ValueError):
    pass


def load_series(path) -> TimeSeries:
    text = Path(path).read_text()
    meta = {}
    lines = text.splitlines()
    body = []
    for ln in lines:
        if ln.startswith("#"):
            key, sep, val = ln[1:].strip().partition(":")
            if not sep:
                raise SeriesFormatError(f"malformed metadata line {ln!r}")
            try:
                meta[key.strip()] = json.loads(val)
            except json.JSONDecodeError:
                meta[key.strip()] = val.strip()
        elif ln.strip():
            body.append(ln)
    if not body:
        raise SeriesFormatError(f"{path}: no header row")
    rows = list(csv.reader(body))
    header = rows[0]
    missing = [c for c in COLUMNS if c not in header]
    if missing:
        raise SeriesFormatError(f"{path}: missing columns {missing}")
    cols = {h: [] for h in header}
    for n, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise SeriesFormatError(f"{path}: row {n} has {len(row)} fields, expected {len(header)}")
        for h, v in zip(header, row):
            cols[h].append(v)
    data = {}
    for h, vals in cols.items():
        if h == "t":
            continue
        if all(v == "" for v in vals):
            continue
        try:
            data[h] = np.array([float(v) for v in vals])
        except ValueError:
            raise SeriesFormatError(f"{path}: non-numeric value in column {h!r}") from None
    t = np.array([float(v) for v in cols["t"]])
    provenance = meta.pop("provenance", "pwd")
    return TimeSeries(t, data, provenance=provenance, meta=meta)


# -- orchestration -------------------------------------------------------------

def run_pwd(cfg: RunConfig, workers: int | None = None) -> TimeSeries:
    sched = cfg.schedule
    res = run_ensemble(cfg.model, sched, workers=workers or cfg.workers, sigma_z=cfg.initial_sigma_z)
    meta = _series_meta(cfg, "pwd")
    return ensemble_series(cfg.model, sched, res, meta=meta)


def run_grid_series(cfg: RunConfig, progress=None) -> TimeSeries:
    gs = cfg.grid
    res = run_grid(cfg.model, gs.geometry, gs.tau, gs.t_max, gs.stride, cfg.initial_sigma_z,
                   gs.boundary_fraction, progress=progress)
    data = {k: v for k, v in res.observables.items()}
    data["dedt"] = energy_rate(data["e_total"], gs.tau * gs.stride)
    meta = _series_meta(cfg, "grid")
    meta["max_rk_error"] = res.max_rk_error
    meta["max_boundary_ratio"] = res.max_boundary_ratio
    return TimeSeries(res.times, data, provenance="grid", meta=meta)


def _series_meta(cfg: RunConfig, engine: str) -> dict:
    meta = {
        "version": __version__,
        "config_hash": cfg.digest(),
        "params": cfg.model.to_dict(),
        "initial_sigma_z": cfg.initial_sigma_z,
    }
    if engine == "pwd":
        meta.update(seed=cfg.seed, pwd=asdict(cfg.pwd))
    else:
        meta.update(grid=asdict(cfg.grid))
    return meta


def comparison_report(a: TimeSeries, b: TimeSeries, settings: CompareSettings, t_range=None) -> dict:
    """Equivalence check of two series; ``a`` supplies the standard errors.

    Passes when every channel has RMSE <= ``rmse_tol`` and, pointwise,
    |a - b| <= sigma_factor * SE + abs_slack.
    """
    report = {"channels": {}, "passed": True, "settings": {**asdict(settings), "channels": list(settings.channels)}}
    mask = np.ones_like(a.t, dtype=bool) if t_range is None else a.window(*t_range)
    for ch in settings.channels:
        c = compare(a, b, ch, t_range=t_range)
        err = a.data.get(ch + "_err", b.data.get(ch + "_err", np.zeros_like(a.t)))[mask]
        dev = np.abs(a[ch][mask] - b[ch][mask])
        bound_ok = bool(np.all(dev <= settings.sigma_factor * err + settings.abs_slack))
        ok = c.rmse <= settings.rmse_tol and bound_ok
        report["channels"][ch] = {**asdict(c), "pointwise_bound_ok": bound_ok,
                                  "max_se": float(err.max()), "passed": ok}
        report["passed"] &= ok
    return report


def run(cfg: RunConfig, out_dir=None, log=print) -> dict:
    """Execute the configured engines and write series, manifest and report."""
    out = Path(out_dir or cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"version": __version__, "config_hash": cfg.digest(), "config": cfg.to_dict(), "engines": {}}
    series = {}
    if cfg.engine in ("pwd", "both"):
        t0 = time.perf_counter()
        s = run_pwd(cfg)
        manifest["engines"]["pwd"] = {"wall_time_s": time.perf_counter() - t0, "hops": s.meta["hops"],
                                      "file": "pwd_series.csv"}
        emit_series(s, out / "pwd_series.csv")
        series["pwd"] = s
        log(f"pwd: {s.meta['n_traj']} trajectories, {s.meta['hops']} hops")
    if cfg.engine in ("grid", "both"):
        t0 = time.perf_counter()
        s = run_grid_series(cfg)
        manifest["engines"]["grid"] = {"wall_time_s": time.perf_counter() - t0,
                                       "max_rk_error": s.meta["max_rk_error"],
                                       "max_boundary_ratio": s.meta["max_boundary_ratio"],
                                       "file": "grid_series.csv"}
        emit_series(s, out / "grid_series.csv")
        series["grid"] = s
        log(f"grid: max embedded error {s.meta['max_rk_error']:.3e}, "
            f"boundary ratio {s.meta['max_boundary_ratio']:.3e}")
    report = None
    if cfg.engine == "both":
        report = comparison_report(series["pwd"], series["grid"], cfg.compare)
        (out / "comparison.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        manifest["comparison"] = {"passed": report["passed"], "file": "comparison.json"}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return {"series": series, "report": report, "manifest": manifest, "out": out}
