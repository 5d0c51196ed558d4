"""Load-coupled interference model of an OFDMA-like downlink.

Each base station (BS) ``i`` serves a fixed set of test points (TPs).  The
fraction of resource blocks BS ``i`` needs to carry the demand of its TPs
depends on the SINR of every served link, which in turn depends on the loads
of all interfering BSs.  The loads therefore solve the nonlinear system
``rho = q(rho, r)``.

All solvers work on a leading batch axis so that thousands of rate vectors
can be pushed through the mapping at once; the scalar helpers are thin
wrappers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "NetworkScenario",
    "FixedPointResult",
    "EigenSolution",
    "FeasibilityVerdict",
    "InvalidLinkError",
    "IndeterminateFeasibilityError",
    "sinr",
    "load_map",
    "solve_fixed_point",
    "solve_fixed_point_batch",
    "solve_conditional_eigen",
    "solve_conditional_eigen_batch",
    "is_feasible",
    "DEFAULT_TOL",
    "DEFAULT_MAX_ITER",
    "DIVERGENCE_CEILING",
    "FEASIBILITY_TOL",
]

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10_000
DIVERGENCE_CEILING = 1e3
FEASIBILITY_TOL = 1e-9


class InvalidLinkError(ValueError):
    """Raised when a SINR is requested on a link with zero channel gain."""


class IndeterminateFeasibilityError(RuntimeError):
    """Raised when the eigenvalue iteration stops before converging."""


@dataclass(frozen=True, eq=False)
class NetworkScenario:
    """Fixed network state: powers, gains, serving BS per TP and resources.

    Parameters
    ----------
    power : array_like, shape (M,)
        Transmit power of every BS in watts.
    gain : array_like, shape (M, N)
        Linear channel gain between BS ``k`` (row) and TP ``j`` (column).
    assignment : array_like of int, shape (N,)
        Zero-based index of the serving BS of every TP.
    resources_hz : float
        Product of the number of resource blocks and their bandwidth.
    noise_power : float
        Receiver noise power in watts.
    """

    power: np.ndarray
    gain: np.ndarray
    assignment: np.ndarray
    resources_hz: float
    noise_power: float

    def __post_init__(self):
        power = np.array(self.power, dtype=float)
        gain = np.array(self.gain, dtype=float)
        assignment = np.array(self.assignment)
        if power.ndim != 1 or gain.ndim != 2:
            raise ValueError("power must be 1-D and gain 2-D")
        num_bs, num_tp = gain.shape
        if power.shape[0] != num_bs:
            raise ValueError(
                f"power has {power.shape[0]} entries but gain has {num_bs} rows"
            )
        if assignment.shape != (num_tp,):
            raise ValueError(f"assignment must have one entry per TP ({num_tp})")
        if not np.issubdtype(assignment.dtype, np.integer):
            if not np.all(np.mod(assignment, 1) == 0):
                raise ValueError("assignment entries must be integers")
        assignment = assignment.astype(np.intp)
        if np.any(assignment < 0) or np.any(assignment >= num_bs):
            raise ValueError("assignment refers to a BS index out of range")
        if not np.all(power > 0):
            raise ValueError("power must be strictly positive")
        if not np.all(gain >= 0):
            raise ValueError("gain entries must be non-negative")
        if not np.all(gain[assignment, np.arange(num_tp)] > 0):
            bad = np.flatnonzero(gain[assignment, np.arange(num_tp)] <= 0)
            raise InvalidLinkError(f"TPs {bad.tolist()} have zero gain to their serving BS")
        if not self.resources_hz > 0:
            raise ValueError("resources_hz must be positive")
        if not self.noise_power > 0:
            raise ValueError("noise_power must be positive")
        for arr in (power, gain, assignment):
            arr.setflags(write=False)
        object.__setattr__(self, "power", power)
        object.__setattr__(self, "gain", gain)
        object.__setattr__(self, "assignment", assignment)
        object.__setattr__(self, "resources_hz", float(self.resources_hz))
        object.__setattr__(self, "noise_power", float(self.noise_power))

    @property
    def num_bs(self) -> int:
        return self.gain.shape[0]

    @property
    def num_tp(self) -> int:
        return self.gain.shape[1]

    @property
    def received_power(self) -> np.ndarray:
        """``p_k * G[k, j]`` for every BS/TP pair, shape (M, N)."""
        return self.power[:, None] * self.gain

    @property
    def membership(self) -> np.ndarray:
        """One-hot TP-to-BS matrix, shape (N, M)."""
        return np.eye(self.num_bs)[self.assignment]

    def served_by(self, bs: int) -> np.ndarray:
        """Indices of the TPs served by ``bs``."""
        return np.flatnonzero(self.assignment == bs)

    def __eq__(self, other):
        if not isinstance(other, NetworkScenario):
            return NotImplemented
        return (
            np.array_equal(self.power, other.power)
            and np.array_equal(self.gain, other.gain)
            and np.array_equal(self.assignment, other.assignment)
            and self.resources_hz == other.resources_hz
            and self.noise_power == other.noise_power
        )

    def to_dict(self) -> dict:
        return {
            "num_bs": self.num_bs,
            "num_tp": self.num_tp,
            "power": self.power.tolist(),
            "gain": self.gain.tolist(),
            "assignment": self.assignment.tolist(),
            "resources_hz": self.resources_hz,
            "noise_power_w": self.noise_power,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "NetworkScenario":
        missing = {"power", "gain", "assignment", "resources_hz", "noise_power_w"} - set(doc)
        if missing:
            raise ValueError(f"scenario document lacks fields: {sorted(missing)}")
        scenario = cls(
            power=doc["power"],
            gain=doc["gain"],
            assignment=doc["assignment"],
            resources_hz=doc["resources_hz"],
            noise_power=doc["noise_power_w"],
        )
        if "num_bs" in doc and doc["num_bs"] != scenario.num_bs:
            raise ValueError("num_bs does not match the gain matrix")
        if "num_tp" in doc and doc["num_tp"] != scenario.num_tp:
            raise ValueError("num_tp does not match the gain matrix")
        return scenario

    def to_json(self, path=None) -> str:
        # repr-based float formatting in json is the shortest round-trip form
        text = json.dumps(self.to_dict(), indent=1)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    @classmethod
    def from_json(cls, source) -> "NetworkScenario":
        """Load from a JSON string or a path to a JSON file."""
        if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
            source = Path(source).read_text()
        return cls.from_dict(json.loads(source))


@dataclass(frozen=True)
class FixedPointResult:
    load: np.ndarray
    residual: float
    iterations: int
    converged: bool
    feasible: bool


@dataclass(frozen=True)
class EigenSolution:
    eigvec: np.ndarray
    eigval: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class FeasibilityVerdict:
    feasible: bool
    eigval: float

    def __bool__(self):
        return self.feasible


def sinr(scenario: NetworkScenario, load, bs: int, tp: int) -> float:
    """SINR of the link from ``bs`` to ``tp`` under the given cell loads.

    Interference from BS ``k`` is scaled by its load ``rho_k``; the serving
    BS never interferes with itself.
    """
    load = np.asarray(load, dtype=float)
    signal = scenario.power[bs] * scenario.gain[bs, tp]
    if signal <= 0:
        raise InvalidLinkError(f"BS {bs} has zero gain to TP {tp}")
    interference = scenario.power * scenario.gain[:, tp] * load
    total = interference.sum() - interference[bs]
    return float(signal / (total + scenario.noise_power))


def _serving_sinr(scenario: NetworkScenario, load: np.ndarray) -> np.ndarray:
    # load: (B, M) -> SINR on each TP's serving link, (B, N)
    rx = scenario.received_power
    cols = np.arange(scenario.num_tp)
    own = rx[scenario.assignment, cols]
    # zero the serving link so a BS never contributes to its own interference
    cross = rx.copy()
    cross[scenario.assignment, cols] = 0.0
    interference = load @ cross
    return own / (interference + scenario.noise_power)


def _load_map_batch(scenario: NetworkScenario, load: np.ndarray, rates: np.ndarray) -> np.ndarray:
    spectral_eff = np.log2(1.0 + _serving_sinr(scenario, load))
    per_tp = rates / spectral_eff
    return (per_tp @ scenario.membership) / scenario.resources_hz


def load_map(scenario: NetworkScenario, load, rates) -> np.ndarray:
    """Evaluate the load mapping ``q(rho, r)``.

    Accepts a single load/rate pair (1-D) or batches with a leading axis;
    a 1-D load is broadcast against a batch of rates and vice versa.
    """
    load = np.asarray(load, dtype=float)
    rates = np.asarray(rates, dtype=float)
    single = load.ndim == 1 and rates.ndim == 1
    load2 = np.atleast_2d(load)
    rates2 = np.atleast_2d(rates)
    batch = max(load2.shape[0], rates2.shape[0])
    load2 = np.broadcast_to(load2, (batch, scenario.num_bs))
    rates2 = np.broadcast_to(rates2, (batch, scenario.num_tp))
    out = _load_map_batch(scenario, load2, rates2)
    return out[0] if single else out


def solve_fixed_point_batch(
    scenario: NetworkScenario,
    rates,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
):
    """Fixed-point iteration from zero load for a batch of rate vectors.

    Returns
    -------
    load : ndarray, shape (B, M)
    residual : ndarray, shape (B,)
        ``||rho - q(rho, r)||_inf`` at the returned ``rho``.
    iterations : ndarray of int, shape (B,)
    converged, feasible : ndarray of bool, shape (B,)
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    rates = np.atleast_2d(np.asarray(rates, dtype=float))
    batch = rates.shape[0]
    load = np.zeros((batch, scenario.num_bs))
    residual = np.full(batch, np.inf)
    iterations = np.zeros(batch, dtype=int)
    converged = np.zeros(batch, dtype=bool)
    active = np.ones(batch, dtype=bool)

    for n in range(1, max_iter + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        cur = load[idx]
        nxt = _load_map_batch(scenario, cur, rates[idx])
        step = np.max(np.abs(nxt - cur), axis=1)
        residual[idx] = step
        iterations[idx] = n
        done = step <= tol
        # keep the iterate whose residual was just measured
        converged[idx[done]] = True
        blown = ~done & (np.max(nxt, axis=1) > DIVERGENCE_CEILING)
        load[idx[~done]] = nxt[~done]
        active[idx[done | blown]] = False

    feasible = converged & (np.max(load, axis=1) <= 1.0 + FEASIBILITY_TOL)
    return load, residual, iterations, converged, feasible


def solve_fixed_point(
    scenario: NetworkScenario,
    rates,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> FixedPointResult:
    """Solve ``rho = q(rho, r)`` by plain iteration started at zero load.

    Starting from zero the iterates increase monotonically.  Divergence
    (an iterate above ``DIVERGENCE_CEILING``) and iteration exhaustion are
    reported through ``converged=False``, never raised.
    """
    rates = np.asarray(rates, dtype=float)
    if rates.shape != (scenario.num_tp,):
        raise ValueError(f"expected {scenario.num_tp} rates, got shape {rates.shape}")
    load, residual, iterations, converged, feasible = solve_fixed_point_batch(
        scenario, rates[None, :], tol=tol, max_iter=max_iter
    )
    return FixedPointResult(
        load=load[0],
        residual=float(residual[0]),
        iterations=int(iterations[0]),
        converged=bool(converged[0]),
        feasible=bool(feasible[0]),
    )


def solve_conditional_eigen_batch(
    scenario: NetworkScenario,
    rates,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
):
    """Normalized iteration ``rho <- q(rho, r) / ||q(rho, r)||_inf`` per batch row.

    Returns ``(eigvec, eigval, iterations, converged)`` arrays.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    rates = np.atleast_2d(np.asarray(rates, dtype=float))
    batch = rates.shape[0]
    vec = np.ones((batch, scenario.num_bs))
    val = np.zeros(batch)
    iterations = np.zeros(batch, dtype=int)
    converged = np.zeros(batch, dtype=bool)
    active = np.ones(batch, dtype=bool)

    for n in range(1, max_iter + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        cur = vec[idx]
        mapped = _load_map_batch(scenario, cur, rates[idx])
        scale = np.max(mapped, axis=1)
        nxt = mapped / scale[:, None]
        step = np.max(np.abs(nxt - cur), axis=1)
        vec[idx] = nxt
        val[idx] = scale
        iterations[idx] = n
        done = step <= tol
        converged[idx[done]] = True
        active[idx[done]] = False

    # eigenvalue measured at the final normalized vector
    val = np.max(_load_map_batch(scenario, vec, rates), axis=1)
    return vec, val, iterations, converged


def solve_conditional_eigen(
    scenario: NetworkScenario,
    rates,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> EigenSolution:
    """Find ``(rho*, lambda*)`` with ``q(rho*, r) = lambda* rho*`` and ``||rho*||_inf = 1``."""
    rates = np.asarray(rates, dtype=float)
    if rates.shape != (scenario.num_tp,):
        raise ValueError(f"expected {scenario.num_tp} rates, got shape {rates.shape}")
    vec, val, iterations, converged = solve_conditional_eigen_batch(
        scenario, rates[None, :], tol=tol, max_iter=max_iter
    )
    return EigenSolution(
        eigvec=vec[0], eigval=float(val[0]), iterations=int(iterations[0]),
        converged=bool(converged[0]),
    )


def is_feasible(
    scenario: NetworkScenario,
    rates,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> FeasibilityVerdict:
    """Decide feasibility of a rate vector from its conditional eigenvalue.

    The demand is feasible exactly when ``lambda* <= 1`` (up to
    ``FEASIBILITY_TOL``).
    """
    rates = np.asarray(rates, dtype=float)
    if not np.all(rates > 0):
        raise ValueError("rates must be strictly positive")
    sol = solve_conditional_eigen(scenario, rates, tol=tol, max_iter=max_iter)
    if not sol.converged:
        raise IndeterminateFeasibilityError(
            f"eigenvalue iteration did not converge in {sol.iterations} steps"
        )
    return FeasibilityVerdict(sol.eigval <= 1.0 + FEASIBILITY_TOL, sol.eigval)
