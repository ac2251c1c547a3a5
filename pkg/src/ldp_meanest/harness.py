"""Seeded Monte Carlo runner for the private estimators.

Every trial draws a fresh pool of iid Gaussian users. Randomness is indexed
by ``(seed, sweep point, trial)`` rather than by execution order, so results
do not depend on how trials are scheduled across worker processes.
"""

from __future__ import annotations

import csv
import enum
import io
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from .errors import ConfigurationError, EstimationFailure, InsufficientSampleError
from .mean_known import KnownVarConfig, ztest, known_bf
from .mean_unknown import (
    UnknownVarConfig,
    estimate_mean_auto,
    large_var,
    large_var_width_bound,
    unk_var,
)
from .mechanisms import PrivacyParams
from .normal_math import RngStream, std_normal_cdf, std_normal_inv_cdf
from .pool import UserPool
from .quantile import QuantileQuery, bin_rr, iterations_for


class Estimator(str, enum.Enum):
    KNOWN_BF = "KnownBF"
    ZTEST = "ZTest"
    BIN_RR = "BinRR"
    UNK_VAR = "UnkVar"
    LARGE_VAR = "LargeVar"
    AUTO = "Auto"


DEFAULT_PARAMS: dict[Estimator, dict[str, Any]] = {
    Estimator.KNOWN_BF: dict(epsilon=1.0, delta=1e-9, beta=0.01, R=200.0,
                             enforce_sample_bound=True, phase1_cap=None, noise="gaussian"),
    Estimator.ZTEST: dict(epsilon=1.0, delta=1e-9, beta=0.01, R=200.0, mu0=0.0,
                          significance=0.05, enforce_sample_bound=True, phase1_cap=None),
    Estimator.BIN_RR: dict(epsilon=1.0, p_star=0.5, q_min=-10.0, q_max=10.0, lam=0.05,
                           tau=0.05, T=None),
    Estimator.UNK_VAR: dict(epsilon=1.0, delta=1e-9, beta=0.05, R=100.0, sigma_min=0.25,
                            sigma_max=200.0),
    Estimator.LARGE_VAR: dict(epsilon=1.0, beta=0.05, R=100.0),
    Estimator.AUTO: dict(epsilon=1.0, delta=1e-9, beta=0.05, R=100.0, sigma_min=0.25),
}

DATA_KEYS = ("n", "mu", "data_sigma")


@dataclass(frozen=True)
class GaussianSpec:
    mu: float = 0.0
    sigma: float = 1.0


@dataclass
class ExperimentConfig:
    """One experiment: an estimator, a data model and an optional parameter grid.

    ``sweep`` is a list of ``(name, values)`` pairs whose cartesian product
    defines the sweep points. ``name`` is ``n``, ``mu``, ``data_sigma`` or any
    key of ``params``.
    """

    estimator: Estimator
    data: GaussianSpec
    n: int
    trials: int = 100
    seed: int = 0
    params: dict[str, Any] = field(default_factory=dict)
    sweep: list[tuple[str, list]] = field(default_factory=list)
    keep_records: bool = False

    def __post_init__(self):
        self.estimator = Estimator(self.estimator)
        if isinstance(self.data, dict):
            self.data = GaussianSpec(**self.data)
        if self.trials < 1:
            raise ConfigurationError("trials must be at least 1")
        if not self.data.sigma > 0:
            raise ConfigurationError("data sigma must be positive")
        allowed = set(DEFAULT_PARAMS[self.estimator]) | {"sigma"}
        unknown = set(self.params) - allowed
        if unknown:
            raise ConfigurationError(f"unknown parameters for {self.estimator.value}: {sorted(unknown)}")
        self.sweep = [(str(name), list(values)) for name, values in self.sweep]
        for name, values in self.sweep:
            if name not in DATA_KEYS and name not in allowed:
                raise ConfigurationError(f"cannot sweep unknown parameter {name!r}")
            if not values:
                raise ConfigurationError(f"sweep over {name!r} has no values")

    @classmethod
    def from_dict(cls, raw: dict) -> ExperimentConfig:
        raw = dict(raw)
        raw["data"] = GaussianSpec(**raw.get("data", {}))
        raw["sweep"] = [tuple(item) for item in raw.get("sweep", [])]
        return cls(**raw)

    def to_dict(self) -> dict:
        return {
            "estimator": self.estimator.value,
            "data": asdict(self.data),
            "n": self.n,
            "trials": self.trials,
            "seed": self.seed,
            "params": dict(self.params),
            "sweep": [[name, values] for name, values in self.sweep],
        }

    def points(self) -> list[dict[str, Any]]:
        if not self.sweep:
            return [{}]
        names = [name for name, _ in self.sweep]
        return [dict(zip(names, combo)) for combo in itertools.product(*(v for _, v in self.sweep))]


@dataclass(frozen=True)
class _Point:
    index: int
    estimator: Estimator
    n: int
    mu: float
    data_sigma: float
    params: dict
    seed: int


@dataclass
class TrialSummary:
    sweep: dict[str, Any]
    trials: int
    failures: int = 0
    coverage_rate: float | None = None
    coverage_ci: tuple[float, float] | None = None
    mean_width: float | None = None
    width_std: float | None = None
    power: float | None = None
    power_ci: tuple[float, float] | None = None
    mean_p_value: float | None = None
    success_rate: float | None = None
    success_ci: tuple[float, float] | None = None
    method_counts: dict[str, int] = field(default_factory=dict)
    regime_counts: dict[str, int] = field(default_factory=dict)
    error: str | None = None
    per_trial_records: list[dict] | None = None

    def to_dict(self) -> dict:
        out = asdict(self)
        if out["per_trial_records"] is None:
            del out["per_trial_records"]
        return out


def wilson_interval(successes: int, trials: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion (95% by default)."""
    if trials == 0:
        return (0.0, 1.0)
    p = successes / trials
    denom = 1.0 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    # the exact interval ends at 0 (or 1) when there are no failures (or successes)
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == trials else min(1.0, centre + half)
    return (lo, hi)


def _privacy(params: dict) -> PrivacyParams:
    return PrivacyParams(params["epsilon"], params.get("delta", 0.0))


def _interval_record(ci, mu: float) -> dict:
    rec = ci.to_dict()
    rec["width"] = ci.width
    rec["covered"] = mu in ci
    return rec


def _run_trial(point: _Point, trial: int) -> dict:
    rng = RngStream(point.seed, point.index).substream(trial)
    values = rng.substream(0).generator.normal(point.mu, point.data_sigma, size=point.n)
    pool = UserPool(values)
    est_rng = rng.substream(1)
    p = point.params
    rec: dict[str, Any] = {"trial": trial, "error": None}
    try:
        if point.estimator in (Estimator.KNOWN_BF, Estimator.ZTEST):
            cfg = KnownVarConfig(
                sigma=p.get("sigma", point.data_sigma),
                beta=p["beta"],
                privacy=_privacy(p),
                R=p["R"],
                enforce_sample_bound=p["enforce_sample_bound"],
                phase1_cap=p["phase1_cap"],
                noise=p.get("noise", "gaussian"),
            )
            if point.estimator is Estimator.ZTEST:
                res = ztest(pool, cfg, p["mu0"], p["significance"], est_rng)
                rec.update(_interval_record(res.interval, point.mu))
                rec.update(p_value=res.p_value, reject=res.reject, z_score=res.z_score)
            else:
                rec.update(_interval_record(known_bf(pool, cfg, est_rng), point.mu))
        elif point.estimator is Estimator.BIN_RR:
            T = p["T"] or iterations_for(p["q_min"], p["q_max"], p["tau"])
            query = QuantileQuery(p["p_star"], p["q_min"], p["q_max"], p["lam"], T)
            res = bin_rr(pool, query, p["epsilon"], est_rng)
            t_true = point.mu + point.data_sigma * std_normal_inv_cdf(p["p_star"])
            q_err = abs(std_normal_cdf((res.threshold - point.mu) / point.data_sigma) - p["p_star"])
            rec.update(res.to_dict())
            rec.update(
                quantile_error=q_err,
                distance=abs(res.threshold - t_true),
                success=bool(q_err <= p["lam"] or abs(res.threshold - t_true) <= p["tau"]),
            )
        elif point.estimator is Estimator.UNK_VAR:
            cfg = UnknownVarConfig(p["sigma_min"], p["sigma_max"], p["beta"], _privacy(p), p["R"])
            rec.update(_interval_record(unk_var(pool, cfg, est_rng), point.mu))
        elif point.estimator is Estimator.LARGE_VAR:
            ci = large_var(pool, p["epsilon"], p["R"], p["beta"], est_rng)
            rec.update(_interval_record(ci, point.mu))
            bound = large_var_width_bound(point.data_sigma, p["epsilon"], p["beta"], point.n)
            rec.update(width_bound=bound, within_width_bound=bool(ci.width <= bound))
        else:
            ci = estimate_mean_auto(pool, p["sigma_min"], p["beta"], _privacy(p), p["R"], est_rng)
            rec.update(_interval_record(ci, point.mu))
    except InsufficientSampleError as exc:
        rec.update(error=str(exc), precondition=True)
    except EstimationFailure as exc:
        rec.update(error=str(exc), precondition=False, covered=False)
    return rec


def _run_packed(args):
    return _run_trial(*args)


def summarize(sweep: dict, records: list[dict], estimator: Estimator, keep_records: bool = False) -> TrialSummary:
    """Aggregate per-trial records into a :class:`TrialSummary`."""
    trials = len(records)
    summary = TrialSummary(sweep=sweep, trials=trials)
    pre = [r for r in records if r.get("precondition")]
    if pre:
        summary.error = pre[0]["error"]
        summary.failures = trials
        if keep_records:
            summary.per_trial_records = records
        return summary
    failed = [r for r in records if r["error"]]
    summary.failures = len(failed)
    ok = [r for r in records if not r["error"]]

    if estimator is Estimator.BIN_RR:
        wins = sum(bool(r["success"]) for r in ok)
        summary.success_rate = wins / trials
        summary.success_ci = wilson_interval(wins, trials)
    else:
        covered = sum(bool(r["covered"]) for r in ok)
        summary.coverage_rate = covered / trials
        summary.coverage_ci = wilson_interval(covered, trials)
        if ok:
            widths = np.array([r["width"] for r in ok])
            summary.mean_width = float(widths.mean())
            summary.width_std = float(widths.std(ddof=1)) if len(widths) > 1 else 0.0
        for r in ok:
            summary.method_counts[r["method"]] = summary.method_counts.get(r["method"], 0) + 1
            if "regime" in r:
                summary.regime_counts[r["regime"]] = summary.regime_counts.get(r["regime"], 0) + 1
    if estimator is Estimator.ZTEST:
        rejects = sum(bool(r["reject"]) for r in ok)
        summary.power = rejects / trials
        summary.power_ci = wilson_interval(rejects, trials)
        if ok:
            summary.mean_p_value = float(np.mean([r["p_value"] for r in ok]))
    if keep_records:
        summary.per_trial_records = records
    return summary


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> list[TrialSummary]:
    """Run every sweep point of ``cfg``; returns one summary per point."""
    base = dict(DEFAULT_PARAMS[cfg.estimator])
    base.update(cfg.params)
    points = []
    for index, overrides in enumerate(cfg.points()):
        params = dict(base)
        params.update({k: v for k, v in overrides.items() if k not in DATA_KEYS})
        points.append(_Point(
            index=index,
            estimator=cfg.estimator,
            n=int(overrides.get("n", cfg.n)),
            mu=float(overrides.get("mu", cfg.data.mu)),
            data_sigma=float(overrides.get("data_sigma", cfg.data.sigma)),
            params=params,
            seed=cfg.seed,
        ))

    tasks = [(pt, t) for pt in points for t in range(cfg.trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            records = list(ex.map(_run_packed, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        records = [_run_packed(task) for task in tasks]

    out = []
    for i, overrides in enumerate(cfg.points()):
        chunk = records[i * cfg.trials:(i + 1) * cfg.trials]
        out.append(summarize(overrides, chunk, cfg.estimator, cfg.keep_records))
    return out


def sweep_label(sweep: dict) -> str:
    if not sweep:
        return ""
    if len(sweep) == 1:
        return _fmt(next(iter(sweep.values())))
    return ";".join(f"{k}={_fmt(v)}" for k, v in sweep.items())


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def summaries_to_csv(summaries: list[TrialSummary], estimator: Estimator) -> str:
    """CSV text with one row per sweep point."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    estimator = Estimator(estimator)

    def num(x):
        return "" if x is None else repr(float(x))

    if estimator is Estimator.ZTEST:
        w.writerow(["sweep_value", "power", "power_ci_lo", "power_ci_hi", "mean_p"])
        for s in summaries:
            lo, hi = s.power_ci or (None, None)
            w.writerow([sweep_label(s.sweep), num(s.power), num(lo), num(hi), num(s.mean_p_value)])
    elif estimator is Estimator.BIN_RR:
        w.writerow(["sweep_value", "trials", "failures", "success_rate", "success_ci_lo", "success_ci_hi"])
        for s in summaries:
            lo, hi = s.success_ci or (None, None)
            w.writerow([sweep_label(s.sweep), s.trials, s.failures, num(s.success_rate), num(lo), num(hi)])
    else:
        w.writerow(["sweep_value", "trials", "failures", "coverage", "coverage_ci_lo",
                    "coverage_ci_hi", "mean_width", "width_std"])
        for s in summaries:
            lo, hi = s.coverage_ci or (None, None)
            w.writerow([sweep_label(s.sweep), s.trials, s.failures, num(s.coverage_rate), num(lo),
                        num(hi), num(s.mean_width), num(s.width_std)])
    return buf.getvalue()


def summaries_to_json(cfg: ExperimentConfig, summaries: list[TrialSummary]) -> str:
    payload = {"config": cfg.to_dict(), "summaries": [s.to_dict() for s in summaries]}
    return json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n"


def result_to_json(cfg: ExperimentConfig, record: dict) -> str:
    """JSON for a single trial: the estimator's full output plus evaluation fields."""
    payload = {"config": cfg.to_dict(), "result": record}
    return json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, enum.Enum):
        return obj.value
    raise TypeError(f"cannot serialise {type(obj).__name__}")
