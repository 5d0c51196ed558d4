"""Error metrics and the learning-curve experiment (minimax vs. baselines)."""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import baselines, learner
from .loadmodel import solve_fixed_point_batch
from .scenario import ScenarioParams, generate_dataset, generate_scenario, sample_feasible_rates

__all__ = [
    "UndefinedCorrelationError",
    "rmse",
    "pearson",
    "sup_error",
    "count_monotonicity_violations",
    "BenchConfig",
    "BenchRow",
    "BenchReport",
    "run_benchmark",
    "METHODS",
    "REPORT_HEADER",
]

log = logging.getLogger(__name__)

METHODS = ("minimax", "kernel", "knn")
REPORT_HEADER = (
    "seed", "k", "method", "bs", "rmse", "pearson", "sup_error",
    "mono_violations", "fit_s", "predict_s",
)
GROUND_TRUTH_RESIDUAL = 1e-8
MONO_SLACK = 1e-12

# stream tags so training, test and monotonicity draws never share RNG state
_TEST_STREAM = 1
_TRAIN_STREAM = 2
_MONO_STREAM = 3


class UndefinedCorrelationError(ValueError):
    """Correlation requested for a sequence with zero variance."""


def rmse(pred, truth) -> float:
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise ValueError("rmse of an empty sequence")
    return float(np.sqrt(np.mean((pred - truth) ** 2)))


def pearson(pred, truth) -> float:
    pred = np.asarray(pred, dtype=float).ravel()
    truth = np.asarray(truth, dtype=float).ravel()
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.size} vs {truth.size}")
    if pred.size < 2:
        raise ValueError("correlation needs at least two samples")
    dp = pred - pred.mean()
    dt = truth - truth.mean()
    sp = np.sqrt(dp @ dp)
    st = np.sqrt(dt @ dt)
    if sp == 0 or st == 0:
        raise UndefinedCorrelationError("correlation is undefined for a constant sequence")
    return float(np.clip((dp @ dt) / (sp * st), -1.0, 1.0))


def sup_error(pred, truth) -> float:
    """Largest absolute deviation over all samples and components."""
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    return float(np.max(np.abs(pred - truth)))


def count_monotonicity_violations(
    predictor: Callable[[np.ndarray], np.ndarray],
    num_pairs: int,
    seed,
    low: float,
    high: float,
    dim: int,
    per_output: bool = False,
):
    """Count ordered pairs ``x <= y`` where ``predictor(x) > predictor(y)``.

    ``x`` is uniform on ``[low, high]^dim``; ``y`` raises a random subset of
    coordinates of ``x`` by a random fraction of their remaining headroom.
    A pair is a violation when some output drops by more than ``1e-12``.
    With ``per_output`` the count is returned per output component.
    """
    rng = np.random.default_rng(seed)
    x = rng.uniform(low, high, size=(num_pairs, dim))
    mask = rng.random((num_pairs, dim)) < rng.random((num_pairs, 1))
    frac = rng.random((num_pairs, dim)) * rng.random((num_pairs, 1))
    y = np.minimum(x + mask * frac * (high - x), high)
    px = np.atleast_2d(predictor(x))
    py = np.atleast_2d(predictor(y))
    if px.shape[0] != num_pairs:
        px, py = px.T, py.T
    drop = px - py > MONO_SLACK
    if per_output:
        return drop.sum(axis=0)
    return int(drop.any(axis=1).sum())


@dataclass(frozen=True)
class BenchConfig:
    scenario_params: ScenarioParams = field(default_factory=ScenarioParams)
    k_grid: tuple = (25, 50, 100, 200, 400, 600)
    num_test: int = 10_000
    noise_eps: float = 0.05
    num_seeds: int = 10
    methods: tuple = METHODS
    mono_pairs: int = 1000
    record_timings: bool = True
    workers: int = 1

    def __post_init__(self):
        k_grid = tuple(int(k) for k in self.k_grid)
        if not k_grid or list(k_grid) != sorted(set(k_grid)):
            raise ValueError("k_grid must be non-empty and strictly ascending")
        if k_grid[0] < 2:
            raise ValueError("every training size must be at least 2")
        if self.num_test < 1 or self.num_seeds < 1:
            raise ValueError("num_test and num_seeds must be positive")
        methods = tuple(self.methods)
        unknown = set(methods) - set(METHODS)
        if unknown or not methods:
            raise ValueError(f"methods must be a non-empty subset of {METHODS}")
        object.__setattr__(self, "k_grid", k_grid)
        object.__setattr__(self, "methods", methods)

    @classmethod
    def from_dict(cls, doc: dict) -> "BenchConfig":
        doc = dict(doc)
        params = doc.pop("scenario_params", {})
        if not isinstance(params, ScenarioParams):
            params = ScenarioParams.from_dict(params)
        return cls(scenario_params=params, **doc)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["k_grid"] = list(self.k_grid)
        doc["methods"] = list(self.methods)
        return doc


class BenchRow(NamedTuple):
    seed: int
    k: int
    method: str
    bs: int
    rmse: float
    pearson: float
    sup_error: float
    mono_violations: int
    fit_s: float
    predict_s: float


def _fmt(value) -> str:
    if isinstance(value, float):
        return "nan" if math.isnan(value) else repr(value)
    return str(value)


@dataclass
class BenchReport:
    rows: list

    def __post_init__(self):
        self.rows = sorted(self.rows, key=lambda r: (r.seed, r.k, METHODS.index(r.method), r.bs))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_HEADER)
        for row in self.rows:
            writer.writerow([_fmt(v) for v in row])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "BenchReport":
        if isinstance(source, Path) or "\n" not in str(source):
            source = Path(source).read_text()
        reader = csv.reader(io.StringIO(source))
        header = tuple(next(reader))
        if header != REPORT_HEADER:
            raise ValueError(f"unexpected report header {header}")
        rows = []
        for rec in reader:
            if not rec:
                continue
            rows.append(BenchRow(int(rec[0]), int(rec[1]), rec[2], int(rec[3]),
                                 float(rec[4]), float(rec[5]), float(rec[6]),
                                 int(rec[7]), float(rec[8]), float(rec[9])))
        return cls(rows)

    def seed_means(self, metric: str = "rmse") -> dict:
        """Metric averaged over BSs (failed cells skipped): ``{(seed, k, method): value}``."""
        groups = {}
        for row in self.rows:
            value = getattr(row, metric)
            if metric == "mono_violations" and value < 0:
                value = math.nan
            groups.setdefault((row.seed, row.k, row.method), []).append(value)
        return {key: _nanmean(vals) for key, vals in groups.items()}

    def summary(self, metric: str = "rmse") -> dict:
        """Mean and standard deviation over seeds of the BS-averaged metric."""
        per_seed = {}
        for (seed, k, method), value in self.seed_means(metric).items():
            per_seed.setdefault((k, method), []).append(value)
        out = {}
        for key, vals in per_seed.items():
            arr = np.asarray(vals, dtype=float)
            arr = arr[~np.isnan(arr)]
            if arr.size:
                out[key] = (float(arr.mean()), float(arr.std()))
            else:
                out[key] = (math.nan, math.nan)
        return out

    def summary_csv(self, path=None) -> str:
        metrics = ("rmse", "pearson", "sup_error", "mono_violations")
        tables = {m: self.summary(m) for m in metrics}
        keys = sorted(tables["rmse"], key=lambda km: (km[0], METHODS.index(km[1])))
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["k", "method"] + [f"{m}_{s}" for m in metrics for s in ("mean", "std")])
        for k, method in keys:
            vals = [v for m in metrics for v in tables[m][(k, method)]]
            writer.writerow([k, method] + [_fmt(float(v)) for v in vals])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def _nanmean(values) -> float:
    arr = np.asarray(values, dtype=float)
    arr = arr[~np.isnan(arr)]
    return float(arr.mean()) if arr.size else math.nan


def _fit(method: str, dataset, eps: float):
    if method == "minimax":
        model = learner.fit(dataset, eps)
        return model, lambda x: learner.predict(model, x)
    if method == "kernel":
        model = baselines.kernel_fit(dataset)
        return model, lambda x: baselines.kernel_predict(model, x)
    if method == "knn":
        model = baselines.knn_fit(dataset)
        return model, lambda x: baselines.knn_predict(model, x)
    raise ValueError(f"unknown method {method!r}")


def _error_rows(seed, k, method, num_bs):
    nan = math.nan
    return [BenchRow(seed, k, method, i, nan, nan, nan, -1, nan, nan) for i in range(num_bs)]


def _run_seed(config: BenchConfig, seed: int) -> list:
    params = config.scenario_params.replace(seed=config.scenario_params.seed + seed)
    scenario = generate_scenario(params)
    test_rng = np.random.default_rng([params.seed, _TEST_STREAM])
    test_x = sample_feasible_rates(scenario, params, config.num_test, test_rng)
    truth, residual, _, converged, _ = solve_fixed_point_batch(scenario, test_x)
    if not (converged.all() and residual.max() <= GROUND_TRUTH_RESIDUAL):
        raise RuntimeError("ground-truth fixed points did not converge")

    rows = []
    for k in config.k_grid:
        try:
            data = generate_dataset(scenario, params, k, config.noise_eps,
                                    seed=[params.seed, _TRAIN_STREAM, k])
        except Exception:
            log.exception("seed %d, K=%d: training data generation failed", seed, k)
            for method in config.methods:
                rows.extend(_error_rows(seed, k, method, scenario.num_bs))
            continue
        for method in config.methods:
            try:
                t0 = time.perf_counter()
                _, predictor = _fit(method, data, config.noise_eps)
                t1 = time.perf_counter()
                pred = predictor(test_x)
                t2 = time.perf_counter()
                mono = count_monotonicity_violations(
                    predictor, config.mono_pairs, [params.seed, _MONO_STREAM, k],
                    params.rate_min, params.rate_max, scenario.num_tp, per_output=True,
                )
            except Exception:
                log.exception("seed %d, K=%d, %s failed", seed, k, method)
                rows.extend(_error_rows(seed, k, method, scenario.num_bs))
                continue
            fit_s, predict_s = (t1 - t0, t2 - t1) if config.record_timings else (0.0, 0.0)
            for i in range(scenario.num_bs):
                try:
                    corr = pearson(pred[:, i], truth[:, i])
                except UndefinedCorrelationError:
                    corr = math.nan
                rows.append(BenchRow(
                    seed, k, method, i,
                    rmse(pred[:, i], truth[:, i]), corr,
                    sup_error(pred[:, i], truth[:, i]),
                    int(mono[i]), fit_s, predict_s,
                ))
        log.info("seed %d, K=%d done", seed, k)
    return rows


def run_benchmark(config: BenchConfig, seeds: Sequence[int] | None = None) -> BenchReport:
    """Run every (seed, K, method) cell and collect one row per BS.

    Seed ``s`` uses scenario seed ``scenario_params.seed + s``.  Rows are
    sorted, so the report does not depend on ``workers``.
    """
    seeds = list(range(config.num_seeds)) if seeds is None else list(seeds)
    if config.workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            chunks = list(pool.map(_run_seed, [config] * len(seeds), seeds))
    else:
        chunks = [_run_seed(config, s) for s in seeds]
    return BenchReport([row for chunk in chunks for row in chunk])
