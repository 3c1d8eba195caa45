"""Dataset ingestion, experiment orchestration, and report emission.

This module is the reproduction surface of the package: it loads or
synthesizes an hourly scalar series, streams it through :class:`HtmModel`
across seeds, and emits deterministic reports for the prediction,
fault-sweep, lifespan, and latency experiments. Reports are plain dicts
with a canonical JSON form, so two runs with the same config and seeds
produce byte-identical output.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .pipeline import HtmModel
from .ssr import latency_sweep, p_false_match, p_match
from .validation import ConfigError, DataError, require, rng_for

__all__ = ["TimeSeries", "ingest_csv", "synthetic_series", "mape",
           "lifespan_rounds", "elasticity_projection", "run_prediction",
           "run_fault_sweep", "default_config", "load_config",
           "merge_config", "canonical_json", "report_canonical",
           "write_report", "write_curves_csv", "write_sweep_csv"]

SECONDS_PER_YEAR = 365.25 * 86400.0


# -- data ----------------------------------------------------------------------
@dataclass
class TimeSeries:
    """Scalar sequence with optional timestamps."""

    values: np.ndarray
    timestamps: Optional[list] = None
    name: str = "series"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        require(self.values.size > 0, "series is empty", DataError)
        require(bool(np.isfinite(self.values).all()),
                "series contains non-finite values", DataError)
        if self.timestamps is not None:
            require(len(self.timestamps) == self.values.size,
                    "timestamps and values disagree in length", DataError)

    def __len__(self):
        return self.values.size


def _looks_like_type_header(row: list[str], value_col: int) -> bool:
    if not row or len(row) <= value_col:
        return False
    try:
        float(row[value_col])
        return False
    except ValueError:
        return True


def ingest_csv(path, value_col: int = 1, ts_col: int = 0) -> TimeSeries:
    """Read a two-column timestamp/value CSV into a TimeSeries.

    Handles the common hourly-energy file layout: a name header followed
    by up to two non-numeric metadata rows (field types and flags), which
    are skipped automatically. Rows whose value cell is missing or not a
    finite number are rejected with their 1-based row numbers.
    """
    path = Path(path)
    require(path.exists(), f"no such file: {path}", DataError)
    timestamps, values, bad = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    require(len(rows) >= 2, f"{path} holds no data rows", DataError)
    start = 1  # name header
    for extra in range(2):
        if start < len(rows) and _looks_like_type_header(rows[start], value_col):
            start += 1
    for lineno, row in enumerate(rows[start:], start=start + 1):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) <= max(value_col, ts_col):
            bad.append(lineno)
            continue
        try:
            v = float(row[value_col])
        except ValueError:
            bad.append(lineno)
            continue
        if not math.isfinite(v):
            bad.append(lineno)
            continue
        timestamps.append(row[ts_col])
        values.append(v)
    if bad:
        shown = ", ".join(str(b) for b in bad[:10])
        more = "" if len(bad) <= 10 else f" (+{len(bad) - 10} more)"
        raise DataError(f"{path}: unparseable value rows: {shown}{more}")
    require(len(values) > 0, f"{path}: no numeric rows found", DataError)
    return TimeSeries(np.asarray(values), timestamps, name=path.stem)


def synthetic_series(n: int = 4390, seed: int = 7, base: float = 40.0,
                     daily: float = 18.0, weekly: float = 7.0,
                     noise: float = 2.5, spike_rate: float = 0.02,
                     spike_scale: float = 12.0) -> TimeSeries:
    """Seeded hourly stand-in series with daily and weekly structure.

    A deterministic pair of harmonics carries the learnable signal; the
    noise term and occasional demand spikes set the error floor. Hourly
    ISO timestamps are attached so the file round-trips through the CSV
    reader.
    """
    require(n >= 2, "need at least two samples")
    rng = rng_for(seed, 0x5E1E5)
    t = np.arange(n)
    vals = (base
            + daily * np.sin(2 * np.pi * t / 24.0)
            + weekly * np.sin(2 * np.pi * t / 168.0 + 1.0)
            + noise * rng.standard_normal(n))
    spikes = rng.random(n) < spike_rate
    vals = vals + spikes * rng.exponential(spike_scale, n)
    vals = np.maximum(vals, 1.0)
    t0 = np.datetime64("2010-07-02T00:00")
    stamps = [str(t0 + np.timedelta64(int(h), "h")) for h in t]
    return TimeSeries(vals, stamps, name=f"synthetic-{n}-{seed}")


def load_series(data_cfg: dict) -> TimeSeries:
    path = data_cfg.get("path")
    if path:
        return ingest_csv(path)
    return synthetic_series(**data_cfg.get("synthetic", {}))


# -- metrics ---------------------------------------------------------------------
def mape(y, y_hat) -> float:
    """Aggregate absolute error normalized by aggregate magnitude."""
    y = np.asarray(y, dtype=float).ravel()
    y_hat = np.asarray(y_hat, dtype=float).ravel()
    require(y.size == y_hat.size, "length mismatch", DataError)
    require(y.size > 0, "empty input", DataError)
    require(bool(np.isfinite(y).all() and np.isfinite(y_hat).all()),
            "non-finite values", DataError)
    denom = np.abs(y).sum()
    require(denom > 0, "all-zero reference series", DataError)
    return float(np.abs(y - y_hat).sum() / denom)


def lifespan_rounds(endurance: float, n_columns: int, n_winners: int) -> float:
    """Learning rounds before the first uniformly-shared device expires.

    With ``n_winners`` of ``n_columns`` columns written per round, each
    device sees ``n_winners / n_columns`` writes per round on average, so
    the endurance budget stretches by the inverse factor.
    """
    require(n_winners > 0, "n_winners must be positive")
    require(n_columns > 0, "n_columns must be positive")
    require(endurance > 0, "endurance must be positive")
    return endurance * n_columns / n_winners


def elasticity_projection(activation_counts, observed_rounds: int,
                          endurance: float, rounds_per_year: float,
                          mode: str = "empirical", n_points: int = 60) -> dict:
    """Project per-column write budgets onto a yearly horizon.

    Each column's empirical activation frequency (writes per round) is
    scaled to the projection rate; a column stays elastic while its
    projected writes remain under the endurance budget. ``uniform`` mode
    replaces the empirical frequencies with their mean, the idealized
    evenly-shared load.
    """
    counts = np.asarray(activation_counts, dtype=float).ravel()
    require(observed_rounds > 0, "observed_rounds must be positive")
    require(rounds_per_year > 0, "rounds_per_year must be positive")
    require(mode in ("empirical", "uniform"), f"unknown mode {mode!r}")
    freq = counts / observed_rounds
    if mode == "uniform":
        freq = np.full_like(freq, freq.mean())
    with np.errstate(divide="ignore"):
        expiry_years = endurance / (freq * rounds_per_year)
    finite = expiry_years[np.isfinite(expiry_years)]
    if finite.size == 0:
        return {"mode": mode, "first_expiry_years": None,
                "last_expiry_years": None, "curve": []}
    first, last = float(finite.min()), float(finite.max())
    grid = np.linspace(0.0, last * 1.05, n_points)
    curve = [[float(yr), int((expiry_years > yr).sum())] for yr in grid]
    return {"mode": mode, "first_expiry_years": first,
            "last_expiry_years": last, "curve": curve}


# -- configuration ------------------------------------------------------------
def default_config() -> dict:
    return {
        "model": "sw",
        "steps_ahead": 2,
        "warmup": 500,
        "seeds": [0, 1, 2, 3, 4],
        "data": {"path": None, "synthetic": {"n": 4390, "seed": 7}},
        "encoder": {"n_buckets": 140, "width": 512, "active_bits": 21,
                    "lo": None, "hi": None},
        "region": {"n_columns": 961, "n_winners": 40, "cells_per_column": 4},
        "head": {"lr": 0.1, "readout": "argmax"},
        "sp": {}, "tm": {}, "clf": {},
        "device": {},
        "fault": {"kinds": ["stuck_on", "stuck_off"],
                  "fractions": [0.0, 0.1, 0.2, 0.3],
                  "targets": ["proximal", "classifier"],
                  "samples": 1500},
        "lifespan": {"endurance": 1e9, "round_ms": 10.0},
    }


_OPEN_SUBTREES = {"sp", "tm", "clf", "device", "data.synthetic"}


def merge_config(base: dict, override: dict, _path: str = "") -> dict:
    """Recursive merge with unknown-key rejection outside open subtrees."""
    out = dict(base)
    for key, val in override.items():
        here = f"{_path}{key}"
        if key not in base:
            parent = _path.rstrip(".")
            if parent not in _OPEN_SUBTREES:
                raise ConfigError(f"unknown config key: {here}")
            out[key] = val
        elif isinstance(base[key], dict) and isinstance(val, dict):
            out[key] = merge_config(base[key], val, _path=f"{here}.")
        else:
            out[key] = val
    return out


def validate_config(cfg: dict) -> dict:
    require(cfg["model"] in ("sw", "hw"),
            f"model must be 'sw' or 'hw', got {cfg['model']!r}")
    require(int(cfg["steps_ahead"]) >= 1, "steps_ahead must be positive")
    require(int(cfg["warmup"]) >= 0, "warmup must be nonnegative")
    require(len(cfg["seeds"]) >= 1, "need at least one seed")
    fault = cfg["fault"]
    for f in fault["fractions"]:
        require(0.0 <= float(f) <= 0.3,
                f"fault fraction {f} outside [0, 0.3]")
    for kind in fault["kinds"]:
        require(kind in ("stuck_on", "stuck_off"),
                f"unknown fault kind {kind!r}")
    for tgt in fault["targets"]:
        require(tgt in ("proximal", "classifier"),
                f"unknown fault target {tgt!r}")
    return cfg


def load_config(path=None, overrides: Optional[dict] = None) -> dict:
    cfg = default_config()
    if path is not None:
        p = Path(path)
        require(p.exists(), f"no such config file: {p}")
        try:
            user = json.loads(p.read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"config {p} is not valid JSON: {e}") from e
        require(isinstance(user, dict), "config root must be an object")
        cfg = merge_config(cfg, user)
    if overrides:
        cfg = merge_config(cfg, overrides)
    return validate_config(cfg)


# -- model construction ---------------------------------------------------------
def _build_model(cfg: dict, lo: float, hi: float, seed: int) -> HtmModel:
    from .memristor import DeviceParams
    dev = DeviceParams(**cfg["device"]) if cfg["device"] else None
    return HtmModel(
        lo=lo, hi=hi,
        n_buckets=int(cfg["encoder"]["n_buckets"]),
        input_width=int(cfg["encoder"]["width"]),
        active_bits=int(cfg["encoder"]["active_bits"]),
        n_columns=int(cfg["region"]["n_columns"]),
        n_winners=int(cfg["region"]["n_winners"]),
        cells_per_column=int(cfg["region"]["cells_per_column"]),
        steps_ahead=int(cfg["steps_ahead"]),
        lr=float(cfg["head"]["lr"]),
        readout=cfg["head"]["readout"],
        model=cfg["model"],
        sp_params=cfg["sp"] or None, tm_params=cfg["tm"] or None,
        clf_params=cfg["clf"] or None, device_params=dev,
        seed=int(seed)).initialize()


def _series_range(cfg: dict, series: TimeSeries) -> tuple[float, float]:
    lo = cfg["encoder"]["lo"]
    hi = cfg["encoder"]["hi"]
    lo = float(series.values.min()) if lo is None else float(lo)
    hi = float(series.values.max()) if hi is None else float(hi)
    require(hi > lo, "encoder range is empty")
    return lo, hi


def _stream_one(model: HtmModel, values: np.ndarray, warmup: int,
                k: int, curve_every: int = 250):
    """Run one seeded model over the series; return per-seed metrics."""
    n = values.size
    estimates = np.full(n, np.nan)
    anomalies = np.zeros(n)
    for t, v in enumerate(values):
        r = model.step(v, learn=True)
        anomalies[t] = r.anomaly
        if t + k < n:
            estimates[t + k] = r.estimate
    targets = np.arange(n) >= max(warmup, k)
    run_mape = mape(values[targets], estimates[targets])
    # cumulative error curve from the first predictable sample
    curve = []
    abs_err = np.abs(values - np.where(np.isnan(estimates), 0.0, estimates))
    abs_ref = np.abs(values)
    have = ~np.isnan(estimates)
    cum_err = np.cumsum(abs_err * have)
    cum_ref = np.cumsum(abs_ref * have)
    for s in range(curve_every, n + 1, curve_every):
        if cum_ref[s - 1] > 0:
            curve.append([int(s), float(cum_err[s - 1] / cum_ref[s - 1])])
    return {
        "mape": run_mape,
        "curve": curve,
        "anomaly_mean_post_warmup": float(anomalies[warmup:].mean())
        if n > warmup else float(anomalies.mean()),
        "activation_counts": model.sp_.activation_counts_.copy(),
        "ledger": model.ledger_.as_dict(),
        "latency_us": model.latency(pipeline=True).microseconds,
    }


# -- reports -----------------------------------------------------------------
def canonical_json(payload: dict) -> str:
    """Deterministic JSON: sorted keys, no whitespace variance."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"),
                      allow_nan=False)


def _config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()[:16]


def report_canonical(report: dict) -> str:
    """Canonical byte form of a report, wallclock fields excluded."""
    body = {k: v for k, v in report.items() if k != "runtime_seconds"}
    return canonical_json(body)


def _probability_block(cfg: dict) -> dict:
    n_c = int(cfg["region"]["n_columns"])
    n_w = int(cfg["region"]["n_winners"])
    value = p_false_match(961, 40, 30)
    return {
        "p_match_default": p_match(n_c, n_w, 256, 10),
        "p_false_match_961_40_30": value,
        "reference_false_match": 6.408e-14,
        "note": ("exact evaluation of the stored-pattern false-match model; "
                 "the 6.408e-14 figure quoted for this configuration is not "
                 "reproducible from that model, which yields "
                 f"{value:.4e} instead"),
    }


def _lifespan_block(cfg: dict, activation_counts=None,
                    observed_rounds: int = 0) -> dict:
    ls = cfg["lifespan"]
    n_c = int(cfg["region"]["n_columns"])
    n_w = int(cfg["region"]["n_winners"])
    rounds = lifespan_rounds(float(ls["endurance"]), n_c, n_w)
    round_s = float(ls["round_ms"]) / 1e3
    years = rounds * round_s / SECONDS_PER_YEAR
    rounds_per_year = SECONDS_PER_YEAR / round_s
    block = {
        "endurance": float(ls["endurance"]),
        "rounds": rounds,
        "round_ms": float(ls["round_ms"]),
        "years": years,
        "years_display": f"{years:.1f}",
    }
    if activation_counts is not None and observed_rounds > 0:
        block["elasticity_empirical"] = elasticity_projection(
            activation_counts, observed_rounds, float(ls["endurance"]),
            rounds_per_year, mode="empirical")
        block["elasticity_uniform"] = elasticity_projection(
            activation_counts, observed_rounds, float(ls["endurance"]),
            rounds_per_year, mode="uniform")
    return block


def run_prediction(cfg: dict, series: Optional[TimeSeries] = None) -> dict:
    """Stream the series across seeds; return the prediction report."""
    cfg = validate_config(merge_config(default_config(), cfg))
    if series is None:
        series = load_series(cfg["data"])
    warmup = int(cfg["warmup"])
    k = int(cfg["steps_ahead"])
    require(len(series) >= warmup + k + 1,
            f"series length {len(series)} too short for warmup {warmup}",
            DataError)
    lo, hi = _series_range(cfg, series)
    t_start = time.time()
    per_seed = []
    counts0 = None
    for seed in cfg["seeds"]:
        model = _build_model(cfg, lo, hi, seed)
        out = _stream_one(model, series.values, warmup, k)
        if counts0 is None:
            counts0 = out["activation_counts"]
        per_seed.append({"seed": int(seed), "mape": out["mape"],
                         "curve": out["curve"],
                         "anomaly_mean": out["anomaly_mean_post_warmup"],
                         "latency_us": out["latency_us"],
                         "ledger": out["ledger"]})
    mapes = np.array([s["mape"] for s in per_seed])
    report = {
        "kind": "prediction",
        "version": __version__,
        "config": cfg,
        "config_hash": _config_hash(cfg),
        "series": {"name": series.name, "n": len(series),
                   "lo": lo, "hi": hi},
        "seeds": [int(s) for s in cfg["seeds"]],
        "per_seed": per_seed,
        "mape_mean": float(mapes.mean()),
        "mape_std": float(mapes.std()),
        "probabilities": _probability_block(cfg),
        "lifespan": _lifespan_block(cfg, counts0, len(series)),
        "latency_sweep": latency_sweep([256, 961, 2025, 4096]),
    }
    report["canonical_sha256"] = hashlib.sha256(
        canonical_json(report).encode()).hexdigest()
    report["runtime_seconds"] = time.time() - t_start
    return report


def _inject(model: HtmModel, kind: str, fraction: float, targets,
            seed: int) -> int:
    """Uniform random fault injection into the configured device pools."""
    total = 0
    pools = []
    if "proximal" in targets:
        pools.append(("proximal", model.sp_.crossbar_.devices))
    if "classifier" in targets:
        pools.append(("classifier", model.clf_.devices_))
    pool_code = {"proximal": 1, "classifier": 2}
    for label, devices in pools:
        n = devices.w.size
        count = int(round(fraction * n))
        if count == 0:
            continue
        rng = rng_for(seed, 0xFA017, pool_code[label],
                      int(round(fraction * 1000)))
        flat = rng.choice(n, size=count, replace=False)
        devices.inject_fault(kind, np.unravel_index(flat, devices.w.shape))
        total += count
    return total


def run_fault_sweep(cfg: dict, series: Optional[TimeSeries] = None) -> dict:
    """MAPE versus stuck-at fault fraction on the device-backed model."""
    cfg = validate_config(cfg)
    require(cfg["model"] == "hw",
            "fault sweeps need the device-backed model (model='hw')")
    if series is None:
        series = load_series(cfg["data"])
    n_samples = min(int(cfg["fault"]["samples"]), len(series))
    values = series.values[:n_samples]
    warmup = int(cfg["warmup"])
    k = int(cfg["steps_ahead"])
    require(n_samples >= warmup + k + 1,
            "fault sweep slice shorter than warmup", DataError)
    lo, hi = _series_range(cfg, series)
    t_start = time.time()

    def sweep_point(kind, fraction):
        mapes = []
        for seed in cfg["seeds"]:
            model = _build_model(cfg, lo, hi, seed)
            if fraction > 0:
                _inject(model, kind, float(fraction),
                        cfg["fault"]["targets"], int(seed))
            out = _stream_one(model, values, warmup, k)
            mapes.append(out["mape"])
        return mapes

    baseline = sweep_point("stuck_on", 0.0)  # kind is moot at fraction 0
    base_mean = float(np.mean(baseline))
    table = []
    for kind in cfg["fault"]["kinds"]:
        for fraction in cfg["fault"]["fractions"]:
            if float(fraction) == 0.0:
                mapes = baseline
            else:
                mapes = sweep_point(kind, float(fraction))
            mean = float(np.mean(mapes))
            table.append({"kind": kind, "fraction": float(fraction),
                          "mape_per_seed": [float(m) for m in mapes],
                          "mape_mean": mean,
                          "delta_vs_baseline": mean - base_mean})
    report = {
        "kind": "fault_sweep",
        "version": __version__,
        "config": cfg,
        "config_hash": _config_hash(cfg),
        "series": {"name": series.name, "n": n_samples, "lo": lo, "hi": hi},
        "baseline_mape_mean": base_mean,
        "baseline_mape_per_seed": [float(m) for m in baseline],
        "sweep": table,
        "probabilities": _probability_block(cfg),
    }
    report["canonical_sha256"] = hashlib.sha256(
        canonical_json(report).encode()).hexdigest()
    report["runtime_seconds"] = time.time() - t_start
    return report


# -- emission --------------------------------------------------------------------
def write_report(report: dict, path) -> None:
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")


def write_curves_csv(report: dict, path) -> None:
    """Cumulative error curves, one row per (seed, checkpoint)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "sample", "cumulative_mape"])
        for entry in report.get("per_seed", []):
            for sample, value in entry["curve"]:
                w.writerow([entry["seed"], sample, f"{value:.6f}"])


def write_sweep_csv(report: dict, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "fraction", "mape_mean", "delta_vs_baseline"])
        for row in report.get("sweep", []):
            w.writerow([row["kind"], row["fraction"],
                        f"{row['mape_mean']:.6f}",
                        f"{row['delta_vs_baseline']:.6f}"])
