"""Random urban-macro deployments and noisy load training sets."""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.constants import Boltzmann

from .loadmodel import (
    DEFAULT_TOL,
    FEASIBILITY_TOL,
    NetworkScenario,
    solve_conditional_eigen_batch,
    solve_fixed_point_batch,
)

__all__ = [
    "ScenarioParams",
    "TrainingSet",
    "InfeasibleRangeError",
    "pathloss_db",
    "generate_scenario",
    "sample_feasible_rates",
    "generate_dataset",
]

# rejection sampling gives up after this many draws if almost all are rejected
_REJECTION_BUDGET = 100_000
_MAX_REJECTION_RATE = 0.99


class InfeasibleRangeError(RuntimeError):
    """The configured rate range yields (almost) no feasible demand vectors."""


@dataclass(frozen=True)
class ScenarioParams:
    num_bs: int = 10
    num_tp: int = 50
    area_side: float = 1000.0
    min_bs_tp_distance: float = 35.0
    power_w: float = 1.0
    resources_hz: float = 2e7
    temperature_k: float = 300.0
    rate_min: float = 1e6
    rate_max: float = 4e6
    seed: int = 0

    def __post_init__(self):
        if self.num_bs < 1 or self.num_tp < 1:
            raise ValueError("num_bs and num_tp must be positive")
        if not self.area_side > 0:
            raise ValueError("area_side must be positive")
        if not 0 < self.rate_min < self.rate_max:
            raise ValueError("need 0 < rate_min < rate_max")
        if not (self.power_w > 0 and self.resources_hz > 0 and self.temperature_k > 0):
            raise ValueError("power, resources and temperature must be positive")

    @property
    def noise_power(self) -> float:
        """Thermal noise ``k_B * T * bandwidth`` in watts."""
        return Boltzmann * self.temperature_k * self.resources_hz

    def replace(self, **changes) -> "ScenarioParams":
        return ScenarioParams(**{**asdict(self), **changes})

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioParams":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown scenario parameters: {sorted(unknown)}")
        return cls(**doc)


@dataclass(frozen=True, eq=False)
class TrainingSet:
    """``K`` rate vectors with their (possibly noisy) load observations."""

    inputs: np.ndarray
    outputs: np.ndarray
    noise_bound: float = 0.0
    smoothed: bool = False
    lipschitz: np.ndarray | None = field(default=None)

    def __post_init__(self):
        inputs = np.array(self.inputs, dtype=float, ndmin=2)
        outputs = np.array(self.outputs, dtype=float)
        if outputs.ndim == 1:
            outputs = outputs[:, None]
        if inputs.shape[0] < 1:
            raise ValueError("a training set needs at least one sample")
        if outputs.shape[0] != inputs.shape[0]:
            raise ValueError(
                f"{inputs.shape[0]} inputs but {outputs.shape[0]} output rows"
            )
        if self.noise_bound < 0:
            raise ValueError("noise_bound must be non-negative")
        inputs.setflags(write=False)
        outputs.setflags(write=False)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "outputs", outputs)
        if self.lipschitz is not None:
            lip = np.array(self.lipschitz, dtype=float)
            lip.setflags(write=False)
            object.__setattr__(self, "lipschitz", lip)

    @property
    def num_samples(self) -> int:
        return self.inputs.shape[0]

    @property
    def num_tp(self) -> int:
        return self.inputs.shape[1]

    @property
    def num_bs(self) -> int:
        return self.outputs.shape[1]

    def __len__(self):
        return self.num_samples

    def __eq__(self, other):
        if not isinstance(other, TrainingSet):
            return NotImplemented
        return (
            np.array_equal(self.inputs, other.inputs)
            and np.array_equal(self.outputs, other.outputs)
            and self.noise_bound == other.noise_bound
            and self.smoothed == other.smoothed
        )

    def column(self, bs: int) -> "TrainingSet":
        """Single-BS view of the data."""
        lip = None if self.lipschitz is None else self.lipschitz[[bs]]
        return TrainingSet(self.inputs, self.outputs[:, [bs]], self.noise_bound,
                           self.smoothed, lip)

    def to_csv(self, path=None) -> str:
        """Header ``r_1..r_N,y_1..y_M``, one row per sample."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([f"r_{j + 1}" for j in range(self.num_tp)]
                        + [f"y_{i + 1}" for i in range(self.num_bs)])
        for r, y in zip(self.inputs, self.outputs):
            writer.writerow([repr(float(v)) for v in r] + [repr(float(v)) for v in y])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source, noise_bound: float = 0.0) -> "TrainingSet":
        """Parse CSV text or a path; columns are split on the ``r_``/``y_`` prefixes."""
        if isinstance(source, Path) or "\n" not in str(source):
            source = Path(source).read_text()
        rows = list(csv.reader(io.StringIO(source)))
        if not rows:
            raise ValueError("empty dataset file")
        header = [h.strip() for h in rows[0]]
        r_cols = [k for k, h in enumerate(header) if h.startswith("r_")]
        y_cols = [k for k, h in enumerate(header) if h.startswith("y_")]
        if not r_cols or not y_cols or len(r_cols) + len(y_cols) != len(header):
            raise ValueError("dataset header must be r_1..r_N followed by y_1..y_M")
        data = np.array([[float(v) for v in row] for row in rows[1:] if row], dtype=float)
        if data.ndim != 2 or data.shape[1] != len(header):
            raise ValueError("dataset rows do not match the header width")
        return cls(data[:, r_cols], data[:, y_cols], noise_bound=noise_bound)


def pathloss_db(distance, min_distance: float = 35.0):
    """Urban-macro pathloss ``128.1 + 37.6 log10(d / 1 km)`` in dB.

    Distances below ``min_distance`` metres are clamped to it.
    """
    d = np.maximum(np.asarray(distance, dtype=float), min_distance)
    out = 128.1 + 37.6 * np.log10(d / 1000.0)
    return float(out) if out.ndim == 0 else out


def generate_scenario(params: ScenarioParams) -> NetworkScenario:
    """Drop BSs and TPs uniformly on a square and attach each TP to its best BS.

    The TP is attached to the BS with the largest received power; ties go
    to the lowest BS index (``argmax`` semantics).
    """
    rng = np.random.default_rng(params.seed)
    bs_pos = rng.uniform(0.0, params.area_side, size=(params.num_bs, 2))
    tp_pos = rng.uniform(0.0, params.area_side, size=(params.num_tp, 2))
    dist = np.linalg.norm(bs_pos[:, None, :] - tp_pos[None, :, :], axis=-1)
    gain = 10.0 ** (-pathloss_db(dist, params.min_bs_tp_distance) / 10.0)
    power = np.full(params.num_bs, params.power_w)
    assignment = np.argmax(power[:, None] * gain, axis=0)
    return NetworkScenario(
        power=power,
        gain=gain,
        assignment=assignment,
        resources_hz=params.resources_hz,
        noise_power=params.noise_power,
    )


def sample_feasible_rates(
    scenario: NetworkScenario,
    params: ScenarioParams,
    count: int,
    rng: np.random.Generator,
    batch_size: int = 512,
) -> np.ndarray:
    """Draw ``count`` rate vectors uniformly from the box, keeping feasible ones.

    Feasibility is decided by the conditional eigenvalue; draws are made in
    fixed-size batches so the RNG stream does not depend on acceptance.
    """
    kept = []
    total = 0
    drawn = 0
    while total < count:
        rates = rng.uniform(params.rate_min, params.rate_max,
                            size=(batch_size, scenario.num_tp))
        _, eigval, _, converged = solve_conditional_eigen_batch(scenario, rates)
        ok = converged & (eigval <= 1.0 + FEASIBILITY_TOL)
        kept.append(rates[ok])
        total += int(ok.sum())
        drawn += batch_size
        if drawn >= _REJECTION_BUDGET and total < (1.0 - _MAX_REJECTION_RATE) * drawn:
            raise InfeasibleRangeError(
                f"only {total} of {drawn} demand draws in "
                f"[{params.rate_min:g}, {params.rate_max:g}] bit/s are feasible"
            )
    return np.concatenate(kept)[:count]


def generate_dataset(
    scenario: NetworkScenario,
    params: ScenarioParams,
    num_samples: int,
    noise_eps: float,
    seed: int,
) -> TrainingSet:
    """Feasible demand samples labelled with noisy fixed-point loads.

    The noise is Gaussian with standard deviation ``noise_eps`` clipped to
    ``[-noise_eps, noise_eps]`` so that ``noise_eps`` bounds the error; the
    noisy loads are then clipped to ``[0, 1]``.
    """
    if num_samples < 1:
        raise ValueError("num_samples must be at least 1")
    if noise_eps < 0:
        raise ValueError("noise_eps must be non-negative")
    rng = np.random.default_rng(seed)
    rates = sample_feasible_rates(scenario, params, num_samples, rng)
    load, _, _, converged, _ = solve_fixed_point_batch(scenario, rates, tol=DEFAULT_TOL)
    if not np.all(converged):
        raise RuntimeError("fixed-point solver failed on a feasible demand")
    noise = np.clip(rng.normal(0.0, noise_eps, size=load.shape), -noise_eps, noise_eps)
    observed = np.clip(load + noise, 0.0, 1.0)
    return TrainingSet(rates, observed, noise_bound=noise_eps, smoothed=False)
