"""Seeded experiment campaigns over (n, m) grids, checks, and file output.

A campaign runs the full sample -> hull -> validate -> moments -> isotropy
pipeline once per (cell, trial), with every trial seed derived up front
from the master seed as derive_seed(master, [n, m, trial]).  Trials are
therefore independent tasks: results are collected, canonically sorted by
(n, m, trial), and emitted as CSV/JSONL whose bytes do not depend on the
worker count.

Determinism contract: every record field except ``wall_time_ms`` is a
pure function of (n, m, trial seed).  Measured wall time is kept on
records returned by :func:`run_trial` for diagnostics, but campaign
emission canonicalizes it to 0.0 so output files are byte-stable.

The probabilistic claims under test involve absolute constants the theory
never pins down, so the campaign-side checks are fit-and-freeze: a
calibration run fits them (psi_2 bound A-hat, the L_K threshold c_star,
the per-cell second-moment constant band) and writes them to a fixture
that later runs assert against.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .hull import (
    DegenerateCloudError,
    DegenerateFacetError,
    inradius as complex_inradius,
    symmetric_hull,
    validate_complex,
)
from .isotropy import isotropy_constant
from .moments import (
    facet_cross_sums,
    mc_moment_oracle,
    polytope_covariance,
    polytope_mean_square,
    polytope_volume,
)
from .sphere_stats import (
    RngStream,
    bernstein_bound,
    cap_tail_prob,
    derive_seed,
    psi2_norm_estimate,
    sample_symmetric_cloud,
    sphere_abs_moment,
)

__all__ = [
    "AlphaRule",
    "ExperimentConfig",
    "TrialRecord",
    "TrialError",
    "ConfigError",
    "EmitError",
    "ExperimentResult",
    "run_trial",
    "run_experiment",
    "check_inradius_bound",
    "check_second_moment_bound",
    "check_isotropy_threshold",
    "emit_records",
    "records_from_csv",
    "records_from_jsonl",
    "default_grid",
    "default_experiment_config",
    "run_calibration",
    "load_fixture",
    "save_fixture",
    "fixture_path",
    "psi2_sphere_estimates",
    "bernstein_tail_table",
    "stirling_moment_band",
    "small_cap_constant",
]

log = logging.getLogger("isohull")

CSV_COLUMNS = (
    "n",
    "m",
    "trial",
    "seed",
    "l_k",
    "identity_bound",
    "vol_root",
    "inradius",
    "mean_square",
    "max_facet_cross",
    "facet_count",
    "resampled",
    "wall_time_ms",
)
_INT_COLUMNS = {"n", "m", "trial", "seed", "facet_count", "resampled"}

RESAMPLE_CAP = 8
ORACLE_STREAM_LABEL = 1

DEFAULT_DIMS = tuple(range(2, 9))
DEFAULT_RATIOS = (1.5, 2.0, 3.0, 8.0)
DEFAULT_TRIALS = 200
DEFAULT_MASTER_SEED = 424242

# Dedicated seeds for the deterministic calibration procedures that do not
# go through the campaign grid.
PSI2_CAL_SEED = 711019
BERNSTEIN_CAL_SEED = 815321
PSI2_CAL_DIMS = (2, 8, 32, 64)
PSI2_CAL_SAMPLES = 100_000


class ConfigError(ValueError):
    """Invalid experiment configuration."""


class TrialError(RuntimeError):
    """A single trial failed (degeneracy cap exceeded or internal check)."""


class EmitError(OSError):
    """Output files could not be written."""


def _fmt(x: float) -> str:
    """Serialize a float with 17 significant digits (exact round trip)."""
    return f"{float(x):.17g}"


def cell_points(n: int, ratio: float) -> int:
    """Point count for an (n, ratio) grid rule: round(ratio * n), at least n + 1."""
    return max(n + 1, int(math.floor(ratio * n + 0.5)))


def default_grid() -> list[tuple[int, int]]:
    """The default campaign grid: n in 2..8 crossed with m/n in {1.5, 2, 3, 8}."""
    return [(n, cell_points(n, r)) for n in DEFAULT_DIMS for r in DEFAULT_RATIOS]


@dataclass(frozen=True)
class AlphaRule:
    """Inradius threshold rule: the default sqrt(log(m/n)/n)/(2 sqrt(2)), or fixed."""

    kind: str = "default"
    value: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("default", "fixed"):
            raise ConfigError(f"unknown alpha rule {self.kind!r}")
        if self.kind == "fixed" and (self.value is None or self.value < 0):
            raise ConfigError("fixed alpha rule needs a non-negative value")

    def alpha(self, n: int, m: int) -> float:
        if self.kind == "fixed":
            return float(self.value)
        return math.sqrt(math.log(m / n) / n) / (2.0 * math.sqrt(2.0))

    def to_json(self):
        if self.kind == "fixed":
            return {"fixed": self.value}
        return "default"

    @classmethod
    def from_json(cls, obj) -> "AlphaRule":
        if obj in (None, "default"):
            return cls()
        if isinstance(obj, dict) and set(obj) == {"fixed"}:
            return cls("fixed", float(obj["fixed"]))
        raise ConfigError(f"cannot parse alpha rule from {obj!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Campaign definition: grid, trial count, seeding, oracle, and outputs."""

    grid: tuple[tuple[int, int], ...]
    trials: int = DEFAULT_TRIALS
    master_seed: int = DEFAULT_MASTER_SEED
    oracle_samples: int = 0
    alpha_rule: AlphaRule = field(default_factory=AlphaRule)
    output_dir: str | None = None
    emit_csv: bool = True
    emit_jsonl: bool = True
    workers: int = 1

    def validate(self) -> None:
        if not self.grid:
            raise ConfigError("grid must contain at least one (n, m) cell")
        for n, m in self.grid:
            if n < 2:
                raise ConfigError(f"cell dimension must be >= 2, got n={n}")
            if m <= n:
                raise ConfigError(f"cell must satisfy m > n, got (n={n}, m={m})")
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if self.oracle_samples < 0:
            raise ConfigError("oracle_samples must be >= 0")
        if not 0 <= self.master_seed < (1 << 64):
            raise ConfigError("master_seed must be a 64-bit unsigned integer")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")

    def to_json_dict(self) -> dict:
        return {
            "grid": [[n, m] for n, m in self.grid],
            "trials": self.trials,
            "master_seed": self.master_seed,
            "oracle_samples": self.oracle_samples,
            "alpha_rule": self.alpha_rule.to_json(),
            "output_dir": self.output_dir,
            "emit": {"csv": self.emit_csv, "jsonl": self.emit_jsonl},
            "workers": self.workers,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ExperimentConfig":
        if not isinstance(obj, dict):
            raise ConfigError("config must be a JSON object")
        known = {
            "grid",
            "trials",
            "master_seed",
            "oracle_samples",
            "alpha_rule",
            "output_dir",
            "emit",
            "workers",
        }
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "grid" not in obj:
            raise ConfigError("config requires a 'grid' entry")
        grid: list[tuple[int, int]] = []
        for item in obj["grid"]:
            if isinstance(item, dict):
                n = int(item["n"])
                if "m" in item:
                    grid.append((n, int(item["m"])))
                elif "ratio" in item:
                    grid.append((n, cell_points(n, float(item["ratio"]))))
                else:
                    raise ConfigError(f"grid entry needs 'm' or 'ratio': {item!r}")
            else:
                pair = list(item)
                if len(pair) != 2:
                    raise ConfigError(f"grid entry must be a pair: {item!r}")
                grid.append((int(pair[0]), int(pair[1])))
        emit = obj.get("emit", {"csv": True, "jsonl": True})
        if isinstance(emit, str):
            emit = {"csv": emit in ("csv", "both"), "jsonl": emit in ("jsonl", "both")}
        cfg = cls(
            grid=tuple(grid),
            trials=int(obj.get("trials", DEFAULT_TRIALS)),
            master_seed=int(obj.get("master_seed", DEFAULT_MASTER_SEED)),
            oracle_samples=int(obj.get("oracle_samples", 0)),
            alpha_rule=AlphaRule.from_json(obj.get("alpha_rule")),
            output_dir=obj.get("output_dir"),
            emit_csv=bool(emit.get("csv", True)),
            emit_jsonl=bool(emit.get("jsonl", True)),
            workers=int(obj.get("workers", 1)),
        )
        cfg.validate()
        return cfg

    def content_hash(self) -> str:
        """Hash of the record-determining part of the config (not paths/workers)."""
        payload = {
            "grid": [[n, m] for n, m in self.grid],
            "trials": self.trials,
            "master_seed": self.master_seed,
            "oracle_samples": self.oracle_samples,
        }
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def default_experiment_config(
    output_dir: str | None = None,
    trials: int = DEFAULT_TRIALS,
    master_seed: int = DEFAULT_MASTER_SEED,
    oracle_samples: int = 0,
    workers: int = 1,
) -> ExperimentConfig:
    return ExperimentConfig(
        grid=tuple(default_grid()),
        trials=trials,
        master_seed=master_seed,
        oracle_samples=oracle_samples,
        output_dir=output_dir,
        workers=workers,
    )


@dataclass(frozen=True)
class TrialRecord:
    """One trial of the pipeline; fields mirror the CSV columns exactly.

    ``wall_time_ms`` is measured elapsed time and is the one field outside
    the determinism contract; campaign emission zeroes it.  ``oracle_deltas``
    (exact minus estimate, in standard-error units) is diagnostic only and
    never serialized into campaign files.
    """

    n: int
    m: int
    trial: int
    seed: int
    l_k: float
    identity_bound: float
    vol_root: float
    inradius: float
    mean_square: float
    max_facet_cross: float
    facet_count: int
    resampled: int
    wall_time_ms: float
    oracle_deltas: dict | None = field(default=None, compare=False)

    def to_csv_row(self) -> str:
        vals = []
        for col in CSV_COLUMNS:
            v = getattr(self, col)
            vals.append(str(int(v)) if col in _INT_COLUMNS else _fmt(v))
        return ",".join(vals)

    def to_json_line(self) -> str:
        parts = []
        for col in CSV_COLUMNS:
            v = getattr(self, col)
            parts.append(f'"{col}": {int(v) if col in _INT_COLUMNS else _fmt(v)}')
        return "{" + ", ".join(parts) + "}"

    @classmethod
    def from_values(cls, values: dict) -> "TrialRecord":
        kwargs = {}
        for col in CSV_COLUMNS:
            v = values[col]
            kwargs[col] = int(v) if col in _INT_COLUMNS else float(v)
        return cls(**kwargs)

    def canonical(self) -> "TrialRecord":
        """The record with measured timing zeroed (the byte-stable form)."""
        return dataclasses.replace(self, wall_time_ms=0.0, oracle_deltas=None)


def _sort_key(r: TrialRecord):
    return (r.n, r.m, r.trial)


def run_trial(
    n: int, m: int, seed: int, oracle_samples: int = 0, trial_index: int = 0
) -> TrialRecord:
    """Run the full pipeline once; deterministic given the arguments.

    Degenerate hulls (a probability-zero event for random clouds) are
    retried with a fresh derived seed up to RESAMPLE_CAP attempts; the
    number of re-draws is recorded.  With ``oracle_samples`` > 0 the Monte
    Carlo oracle runs and its deltas are attached in standard-error units.
    """
    if n < 2 or m <= n:
        raise ConfigError(f"need m > n >= 2, got (n={n}, m={m})")
    t0 = time.perf_counter()
    attempt_seed = int(seed)
    resampled = 0
    fc = None
    for attempt in range(RESAMPLE_CAP):
        cloud = sample_symmetric_cloud(n, m, attempt_seed)
        try:
            candidate = symmetric_hull(cloud)
        except (DegenerateCloudError, DegenerateFacetError):
            candidate = None
        if candidate is not None and validate_complex(candidate).passed:
            fc = candidate
            break
        resampled += 1
        attempt_seed = derive_seed(seed, [attempt + 1])
    if fc is None:
        raise TrialError(
            f"degeneracy re-draw cap ({RESAMPLE_CAP} attempts) exceeded for "
            f"(n={n}, m={m}, seed={seed})"
        )

    volume = polytope_volume(fc)
    mean_square = polytope_mean_square(fc)
    cov = polytope_covariance(fc)
    trace = float(np.trace(cov))
    if abs(trace - mean_square) > 1e-10 * max(mean_square, 1e-300):
        raise TrialError(
            f"trace/mean-square mismatch: {trace} vs {mean_square} "
            f"at (n={n}, m={m}, seed={seed})"
        )
    rad = complex_inradius(fc)
    max_cross = float(facet_cross_sums(fc).max())
    report = isotropy_constant(volume, cov)

    deltas = None
    if oracle_samples > 0:
        est = mc_moment_oracle(
            fc, oracle_samples, RngStream(attempt_seed, (ORACLE_STREAM_LABEL,))
        )
        deltas = {
            "mean_square": (mean_square - est.mean_square) / est.mean_square_se,
            "covariance_max": float(
                np.abs((cov - est.covariance) / np.maximum(est.covariance_se, 1e-300)).max()
            ),
        }
        if est.volume is not None:
            deltas["volume"] = (volume - est.volume) / est.volume_se

    wall_ms = (time.perf_counter() - t0) * 1e3
    return TrialRecord(
        n=n,
        m=m,
        trial=int(trial_index),
        seed=int(seed),
        l_k=report.l_k,
        identity_bound=report.identity_bound,
        vol_root=report.vol_root,
        inradius=rad,
        mean_square=mean_square,
        max_facet_cross=max_cross,
        facet_count=fc.facet_count,
        resampled=resampled,
        wall_time_ms=wall_ms,
        oracle_deltas=deltas,
    )


def _limit_worker_blas() -> None:
    # Worker initializer: one BLAS thread per process.  With several trial
    # processes on a small box, threaded BLAS only adds contention.
    try:
        from threadpoolctl import threadpool_limits

        threadpool_limits(limits=1)
    except ImportError:
        pass


def _trial_task(task: tuple[int, int, int, int, int]):
    n, m, trial, seed, oracle_samples = task
    try:
        return ("ok", run_trial(n, m, seed, oracle_samples, trial_index=trial))
    except TrialError as exc:
        return ("failed", {"n": n, "m": m, "trial": trial, "seed": seed, "error": str(exc)})


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list[TrialRecord]
    failures: list[dict]
    summary: dict
    paths: dict


def _quantiles(values: np.ndarray) -> dict:
    qs = np.quantile(values, [0.0, 0.25, 0.5, 0.75, 1.0])
    return {
        "min": float(qs[0]),
        "q25": float(qs[1]),
        "median": float(qs[2]),
        "q75": float(qs[3]),
        "max": float(qs[4]),
    }


def _cell_groups(records: Sequence[TrialRecord]) -> dict[tuple[int, int], list[TrialRecord]]:
    groups: dict[tuple[int, int], list[TrialRecord]] = {}
    for r in records:
        groups.setdefault((r.n, r.m), []).append(r)
    return dict(sorted(groups.items()))


def summarize_records(
    records: Sequence[TrialRecord],
    failures: Sequence[dict] = (),
    alpha_rule: AlphaRule | None = None,
) -> dict:
    """Per-cell summary statistics plus the config-free bound checks."""
    rule = alpha_rule or AlphaRule()
    cells = []
    for (n, m), recs in _cell_groups(records).items():
        arr = {
            name: np.array([getattr(r, name) for r in recs])
            for name in ("l_k", "vol_root", "inradius", "mean_square", "max_facet_cross")
        }
        log_ratio = math.log(m / n)
        alpha = rule.alpha(n, m)
        cells.append(
            {
                "n": n,
                "m": m,
                "trials": len(recs),
                "failures": sum(1 for f in failures if f["n"] == n and f["m"] == m),
                "resampled_total": int(sum(r.resampled for r in recs)),
                "facet_count_mean": float(np.mean([r.facet_count for r in recs])),
                "stats": {name: _quantiles(vals) for name, vals in arr.items()},
                "inradius_check": {
                    "alpha": alpha,
                    "violations": int(np.sum(arr["inradius"] < alpha)),
                    "reference_rate": math.exp(-n),
                },
                "c_emp": float(np.max(arr["mean_square"]) * n / log_ratio),
                "facet_cross_ratio": float(
                    np.max(arr["max_facet_cross"]) / (n * log_ratio)
                ),
                "growth_stat": float(
                    np.median(arr["vol_root"]) * n / math.sqrt(log_ratio)
                ),
                "l_k_max": float(np.max(arr["l_k"])),
            }
        )
    return {"cells": cells, "total_records": len(records), "total_failures": len(failures)}


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Execute every trial in the grid and write the configured outputs.

    Per-trial seeds are derive_seed(master, [n, m, trial]), fixed before
    dispatch, and results are sorted by (n, m, trial), so records are
    identical for any worker count.  Emitted records are canonicalized
    (wall_time_ms = 0.0); aggregate timing goes to the logger only.
    Individual trial failures are collected, not fatal.
    """
    config.validate()
    tasks = [
        (n, m, t, derive_seed(config.master_seed, [n, m, t]), config.oracle_samples)
        for (n, m) in config.grid
        for t in range(config.trials)
    ]
    t0 = time.perf_counter()
    if config.workers == 1:
        outcomes = map(_trial_task, tasks)
    else:
        pool = ProcessPoolExecutor(
            max_workers=config.workers, initializer=_limit_worker_blas
        )
        outcomes = pool.map(_trial_task, tasks)

    records: list[TrialRecord] = []
    failures: list[dict] = []
    done = 0
    for status, payload in outcomes:
        if status == "ok":
            records.append(payload)
        else:
            failures.append(payload)
        done += 1
        if done % 500 == 0:
            log.info("campaign progress: %d/%d trials", done, len(tasks))
    if config.workers > 1:
        pool.shutdown()
    elapsed = time.perf_counter() - t0
    log.info(
        "campaign finished: %d records, %d failures, %.1f s wall",
        len(records),
        len(failures),
        elapsed,
    )

    records = sorted((r.canonical() for r in records), key=_sort_key)
    failures.sort(key=lambda f: (f["n"], f["m"], f["trial"]))
    summary = summarize_records(records, failures, config.alpha_rule)
    summary["config"] = config.to_json_dict()
    summary["config_content_hash"] = config.content_hash()

    paths: dict = {}
    if config.output_dir is not None:
        out = Path(config.output_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
            paths = emit_records(records, out, config.emit_csv, config.emit_jsonl)
            summary_path = out / "summary.json"
            summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
            paths["summary"] = str(summary_path)
        except OSError as exc:
            raise EmitError(f"cannot write outputs under {config.output_dir}: {exc}") from exc
    return ExperimentResult(config, records, failures, summary, paths)


def emit_records(
    records: Sequence[TrialRecord],
    output_dir: str | Path,
    csv: bool = True,
    jsonl: bool = True,
    basename: str = "records",
) -> dict:
    """Write records in canonical (n, m, trial) order; returns written paths.

    CSV carries the exact column header; JSONL mirrors the columns one
    object per line.  All floats use 17 significant digits, so a parse
    round trip preserves every value bit for bit.
    """
    ordered = sorted(records, key=_sort_key)
    out = Path(output_dir)
    paths: dict = {}
    try:
        out.mkdir(parents=True, exist_ok=True)
        if csv:
            path = out / f"{basename}.csv"
            lines = [",".join(CSV_COLUMNS)]
            lines += [r.to_csv_row() for r in ordered]
            path.write_text("\n".join(lines) + "\n")
            paths["csv"] = str(path)
        if jsonl:
            path = out / f"{basename}.jsonl"
            path.write_text("".join(r.to_json_line() + "\n" for r in ordered))
            paths["jsonl"] = str(path)
    except OSError as exc:
        raise EmitError(f"cannot write records under {out}: {exc}") from exc
    return paths


def records_from_csv(path: str | Path) -> list[TrialRecord]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != ",".join(CSV_COLUMNS):
        raise ValueError(f"unexpected CSV header in {path}")
    records = []
    for line in lines[1:]:
        values = dict(zip(CSV_COLUMNS, line.split(",")))
        records.append(TrialRecord.from_values(values))
    return records


def records_from_jsonl(path: str | Path) -> list[TrialRecord]:
    records = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            records.append(TrialRecord.from_values(json.loads(line)))
    return records


# ---------------------------------------------------------------------------
# Bound checks over record sets


def check_inradius_bound(
    records: Sequence[TrialRecord], alpha_rule: AlphaRule | None = None
) -> list[dict]:
    """Count, per cell, trials whose inradius falls below the alpha rule.

    Reports the empirical violation rate next to the theoretical reference
    e^{-n}; this is a comparison, not an assertion (the reference holds
    asymptotically and only for m above an unspecified multiple of n).
    """
    if not records:
        raise ValueError("no records")
    rule = alpha_rule or AlphaRule()
    report = []
    for (n, m), recs in _cell_groups(records).items():
        alpha = rule.alpha(n, m)
        inr = np.array([r.inradius for r in recs])
        violations = int(np.sum(inr < alpha))
        report.append(
            {
                "n": n,
                "m": m,
                "trials": len(recs),
                "alpha": alpha,
                "violations": violations,
                "rate": violations / len(recs),
                "reference_rate": math.exp(-n),
                "min_inradius": float(inr.min()),
            }
        )
    return report


def check_second_moment_bound(records: Sequence[TrialRecord]) -> dict:
    """Fitted second-moment constants per cell.

    C_emp = max over trials of mean_square * n / log(m/n), plus the facet
    statistic ratio max_facet_cross / (n log(m/n)); the overall band
    reports how stable C_emp is across cells.
    """
    if not records:
        raise ValueError("no records")
    cells = []
    for (n, m), recs in _cell_groups(records).items():
        if m <= n:
            raise ConfigError(f"cell (n={n}, m={m}) has log(m/n) <= 0")
        log_ratio = math.log(m / n)
        ms = np.array([r.mean_square for r in recs])
        mc = np.array([r.max_facet_cross for r in recs])
        cells.append(
            {
                "n": n,
                "m": m,
                "c_emp": float(ms.max() * n / log_ratio),
                "facet_cross_ratio": float(mc.max() / (n * log_ratio)),
            }
        )
    c_vals = [c["c_emp"] for c in cells]
    return {
        "cells": cells,
        "c_emp_min": min(c_vals),
        "c_emp_max": max(c_vals),
        "band_ratio": max(c_vals) / min(c_vals),
    }


def check_isotropy_threshold(
    records: Sequence[TrialRecord], c_star: float, c1: float = 1.0, c2: float = 1.0
) -> list[dict]:
    """Per-cell fraction of trials with l_k <= c_star.

    The reference column is the bound shape 1 - c1 exp(-c2 n min(1,
    log(m/n))) with fitted constants; only the shape is meaningful, the
    fractions are the data.
    """
    if c_star <= 0:
        raise ValueError("c_star must be positive")
    report = []
    for (n, m), recs in _cell_groups(records).items():
        lk = np.array([r.l_k for r in recs])
        frac = float(np.mean(lk <= c_star))
        shape = 1.0 - c1 * math.exp(-c2 * n * min(1.0, math.log(m / n)))
        report.append(
            {
                "n": n,
                "m": m,
                "fraction": frac,
                "bound_shape": shape,
                "l_k_max": float(lk.max()),
            }
        )
    return report


# ---------------------------------------------------------------------------
# Calibration: fit-and-freeze constants with provenance


def fixture_path() -> Path:
    return Path(__file__).parent / "fixtures" / "calibration.json"


def load_fixture(path: str | Path | None = None) -> dict:
    p = Path(path) if path is not None else fixture_path()
    return json.loads(p.read_text())


def save_fixture(fixture: dict, path: str | Path | None = None) -> Path:
    p = Path(path) if path is not None else fixture_path()
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(fixture, indent=2, sort_keys=True) + "\n")
    return p


def psi2_sphere_estimates(
    dims: Sequence[int] = PSI2_CAL_DIMS,
    sample_count: int = PSI2_CAL_SAMPLES,
    seed: int = PSI2_CAL_SEED,
) -> dict[int, float]:
    """Empirical psi_2 norms of sqrt(n) <P, theta> per dimension.

    Uses theta = e_1 (rotation invariance makes the direction immaterial)
    and a per-dimension derived stream, so results are reproducible.
    """
    out = {}
    for n in dims:
        stream = RngStream(seed, (n,))
        g = np.asarray(stream.gaussian((sample_count, n)))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        out[int(n)] = psi2_norm_estimate(math.sqrt(n) * g[:, 0])
    return out


def bernstein_tail_table(
    a_hat: float,
    dims: Sequence[int] = (2, 8, 32),
    counts: Sequence[int] = (16, 64),
    eps_grid: Sequence[float] = (0.5, 1.0),
    replications: int = 4000,
    seed: int = BERNSTEIN_CAL_SEED,
) -> list[dict]:
    """Empirical tails of |sum sqrt(n) <P_i, theta>| > eps N vs the bound."""
    rows = []
    for n in dims:
        for N in counts:
            stream = RngStream(seed, (n, N))
            g = np.asarray(stream.gaussian((replications, N, n)))
            g /= np.linalg.norm(g, axis=2, keepdims=True)
            sums = math.sqrt(n) * g[:, :, 0].sum(axis=1)
            for eps in eps_grid:
                tail = float(np.mean(np.abs(sums) > eps * N))
                bound = bernstein_bound(N, eps, a_hat)
                rows.append(
                    {
                        "n": int(n),
                        "N": int(N),
                        "eps": float(eps),
                        "tail": tail,
                        "bound": bound,
                    }
                )
    return rows


def stirling_moment_band(
    n_values: Sequence[int] = tuple(range(2, 65)),
    q_values: Sequence[int] = tuple(range(1, 65)),
) -> dict:
    """Range of sphere_abs_moment(n, q)^{1/q} / sqrt(q / (q + n)) over a grid."""
    lo, hi = math.inf, -math.inf
    for n in n_values:
        for q in q_values:
            ratio = sphere_abs_moment(n, q) ** (1.0 / q) / math.sqrt(q / (q + n))
            lo = min(lo, ratio)
            hi = max(hi, ratio)
    return {
        "b1": lo,
        "b2": hi,
        "n_min": int(min(n_values)),
        "n_max": int(max(n_values)),
        "q_min": int(min(q_values)),
        "q_max": int(max(q_values)),
    }


def small_cap_constant(
    n_values: Sequence[int] = (2, 3, 4, 6, 8, 12, 16, 24, 32, 48, 64),
    eps_fractions: Sequence[float] = (0.1, 0.25, 0.5, 0.75, 1.0),
) -> dict:
    """Fit c with 1 - cap_tail_prob(n, eps) <= c sqrt(n) eps for eps <= 1/sqrt(n).

    For n >= 3 the ratio is largest as eps -> 0 where it equals the density
    of <P, theta> at zero over sqrt(n); including that analytic candidate
    makes the fitted constant valid for every eps, not just grid points.
    """
    from .sphere_stats import ball_volume

    worst = 0.0
    for n in n_values:
        density0 = 2.0 * (n - 1) * ball_volume(n - 1) / (n * ball_volume(n))
        worst = max(worst, density0 / math.sqrt(n))
        for frac in eps_fractions:
            eps = frac / math.sqrt(n)
            band = 1.0 - cap_tail_prob(n, eps)
            worst = max(worst, band / (math.sqrt(n) * eps))
    return {"c": worst, "n_values": list(map(int, n_values))}


def _cells_list(values: dict[tuple[int, int], float]) -> list[list]:
    return [[n, m, v] for (n, m), v in sorted(values.items())]


def run_calibration(
    trials: int = DEFAULT_TRIALS,
    master_seed: int = DEFAULT_MASTER_SEED,
    workers: int = 1,
    output_dir: str | Path | None = None,
) -> dict:
    """Run the pilot campaign and fit every frozen constant.

    Returns the fixture dict (see ``save_fixture``); the campaign's emitted
    CSV/JSONL hashes are recorded so later runs of the identical config can
    assert byte-stable output without re-reading the pilot files.
    """
    psi2 = psi2_sphere_estimates()
    a_hat = 1.05 * max(psi2.values())
    bern = bernstein_tail_table(a_hat)
    band = stirling_moment_band()
    cap_c = small_cap_constant()
    cap_c["c"] *= 1.0 + 1e-9

    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        out = Path(output_dir) if output_dir is not None else Path(tmp)
        config = default_experiment_config(
            output_dir=str(out), trials=trials, master_seed=master_seed, workers=workers
        )
        result = run_experiment(config)
        csv_hash = hashlib.sha256(Path(result.paths["csv"]).read_bytes()).hexdigest()
        jsonl_hash = hashlib.sha256(Path(result.paths["jsonl"]).read_bytes()).hexdigest()

    records = result.records
    lk_max = max(r.l_k for r in records)
    c_star = 1.05 * lk_max
    second = check_second_moment_bound(records)
    c_emp_cells = {(c["n"], c["m"]): c["c_emp"] for c in second["cells"]}
    slice_cells = {
        (n, m): v for (n, m), v in c_emp_cells.items() if 4 <= n <= 8 and m == 3 * n
    }
    inr = check_inradius_bound(records, config.alpha_rule)
    growth = {
        (c["n"], c["m"]): c["growth_stat"] for c in result.summary["cells"]
    }
    fractions = check_isotropy_threshold(records, c_star)

    fixture = {
        "provenance": {
            "package_version": __version__,
            "master_seed": master_seed,
            "trials": trials,
            "grid": [[n, m] for n, m in config.grid],
            "config_content_hash": config.content_hash(),
        },
        "psi2": {
            "dims": list(PSI2_CAL_DIMS),
            "sample_count": PSI2_CAL_SAMPLES,
            "seed": PSI2_CAL_SEED,
            "estimates": {str(k): v for k, v in psi2.items()},
            "a_hat": a_hat,
        },
        "bernstein": {
            "seed": BERNSTEIN_CAL_SEED,
            "rows": bern,
            "max_tail_to_bound": max(
                (row["tail"] / row["bound"] for row in bern), default=0.0
            ),
        },
        "stirling_band": band,
        "small_cap": cap_c,
        "campaign": {
            "l_k_max": lk_max,
            "c_star": c_star,
            "c_emp_cells": _cells_list(c_emp_cells),
            "c_emp_band": {
                "slice": "m = 3n, n in 4..8",
                "cells": _cells_list(slice_cells),
                "lo": min(slice_cells.values()),
                "hi": max(slice_cells.values()),
            },
            "inradius_violations": [
                [c["n"], c["m"], c["violations"]] for c in inr
            ],
            "growth_stat": {
                "cells": _cells_list(growth),
                "min": min(growth.values()),
                "max": max(growth.values()),
            },
            "lk_threshold": {
                "c1": 1.0,
                "c2": 1.0,
                "fractions": [[c["n"], c["m"], c["fraction"]] for c in fractions],
            },
            "records_csv_sha256": csv_hash,
            "records_jsonl_sha256": jsonl_hash,
            "total_failures": len(result.failures),
        },
    }
    return fixture
