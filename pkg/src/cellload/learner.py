"""Minimax-optimal monotone Lipschitz interpolation of per-BS loads.

For every BS the unknown load function is assumed monotone and Lipschitz
(constant ``L_i``) in the rate vector.  Given compatible samples
``(r^k, rho^k)`` the set of functions in that class agreeing with the data
is bracketed pointwise by

    lower(x) = max_k rho^k - L * ||(r^k - x)_+||
    upper(x) = min_k rho^k + L * ||(x - r^k)_+||

and the midpoint of the bracket has the smallest worst-case error.  Noisy
observations are first made compatible by a small linear program.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.optimize import linprog
from scipy.spatial.distance import pdist, squareform

from .scenario import TrainingSet

__all__ = [
    "LearnerModel",
    "Envelope",
    "DuplicateAnchorError",
    "SmoothingError",
    "cone_distance",
    "cone_distance_matrix",
    "estimate_lipschitz",
    "smooth_monotone",
    "fit",
    "envelope",
    "predict",
    "COMPAT_TOL",
]

COMPAT_TOL = 1e-9

_CHUNK_ELEMENTS = 4_000_000
_LP_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
}


class DuplicateAnchorError(ValueError):
    """Two training inputs coincide, so no finite Lipschitz constant exists."""


class SmoothingError(RuntimeError):
    """The monotone-smoothing LP could not be solved."""


def cone_distance(x, anchor) -> float:
    """Euclidean norm of the positive part of ``x - anchor``."""
    diff = np.asarray(x, dtype=float) - np.asarray(anchor, dtype=float)
    return float(np.linalg.norm(np.maximum(diff, 0.0)))


def _cone_distances(queries: np.ndarray, anchors: np.ndarray):
    """Both one-sided distances for every (query, anchor) pair.

    Returns ``up[q, k] = ||(x_q - a_k)_+||`` and ``down[q, k] = ||(a_k - x_q)_+||``.
    """
    nq, dim = queries.shape
    nk = anchors.shape[0]
    up = np.empty((nq, nk))
    down = np.empty((nq, nk))
    step = max(1, _CHUNK_ELEMENTS // max(1, nk * dim))
    for start in range(0, nq, step):
        stop = min(nq, start + step)
        diff = queries[start:stop, None, :] - anchors[None, :, :]
        pos = np.maximum(diff, 0.0)
        neg = np.minimum(diff, 0.0)
        up[start:stop] = np.sqrt(np.einsum("qkn,qkn->qk", pos, pos))
        down[start:stop] = np.sqrt(np.einsum("qkn,qkn->qk", neg, neg))
    return up, down


def cone_distance_matrix(points) -> np.ndarray:
    """``D[k, j] = ||(points[k] - points[j])_+||`` for all ordered pairs."""
    points = np.asarray(points, dtype=float)
    up, _ = _cone_distances(points, points)
    return up


def _check_distinct(inputs: np.ndarray) -> np.ndarray:
    dist = pdist(inputs)
    if np.any(dist == 0):
        k, j = np.argwhere(np.triu(squareform(dist) == 0, 1))[0]
        raise DuplicateAnchorError(f"training inputs {k} and {j} are identical")
    return dist


def estimate_lipschitz(dataset: TrainingSet, eps: float) -> np.ndarray:
    """Per-BS Lipschitz estimate ``max_{k != j} (|y^k - y^j| - 2 eps) / ||r^k - r^j||``.

    Clamped below at zero.
    """
    if dataset.num_samples < 2:
        raise ValueError("estimating a Lipschitz constant needs at least two samples")
    dist = _check_distinct(dataset.inputs)
    lip = np.empty(dataset.num_bs)
    for i in range(dataset.num_bs):
        spread = pdist(dataset.outputs[:, [i]], "cityblock")
        lip[i] = np.max((spread - 2.0 * eps) / dist)
    return np.maximum(lip, 0.0)


def _lp_shift(slack: np.ndarray, method: str, max_rounds: int):
    """Solve ``min sum |q|`` s.t. ``q_k - q_j <= slack[k, j]`` by constraint generation.

    Only constraints violated by the current iterate are handed to the LP;
    the set grows until the full system holds, at which point the relaxed
    optimum is optimal for the complete program.  Returns ``q`` and the
    dense matrix of constraint multipliers (zero for never-added rows).
    """
    K = slack.shape[0]
    q = np.zeros(K)
    duals = np.zeros((K, K))
    active = np.zeros((K, K), dtype=bool)
    for _ in range(max_rounds):
        violated = (q[:, None] - q[None, :] > slack + 1e-12) & ~active
        if not violated.any():
            return q, duals
        active |= violated
        rows, cols = np.nonzero(active)
        n_con = rows.size
        ones = np.ones(n_con)
        idx = np.arange(n_con)
        # x = [q_plus, q_minus]; q_k - q_j = qp_k - qm_k - qp_j + qm_j
        A = sparse.coo_matrix(
            (np.concatenate([ones, -ones, -ones, ones]),
             (np.tile(idx, 4), np.concatenate([rows, rows + K, cols, cols + K]))),
            shape=(n_con, 2 * K),
        ).tocsr()
        res = linprog(
            np.ones(2 * K), A_ub=A, b_ub=slack[rows, cols],
            bounds=(0, None), method=method, options=_LP_OPTIONS,
        )
        if res.status != 0:
            raise SmoothingError(f"smoothing LP failed: {res.message}")
        q = res.x[:K] - res.x[K:]
        duals = np.zeros((K, K))
        duals[rows, cols] = -res.ineqlin.marginals
    raise SmoothingError(f"constraint generation did not settle in {max_rounds} rounds")


def _shortest_from(weights: np.ndarray, source: int) -> np.ndarray | None:
    """Bellman-Ford on a dense weight matrix; ``None`` on a negative cycle."""
    n = weights.shape[0]
    dist = np.full(n, np.inf)
    dist[source] = 0.0
    for _ in range(n + 1):
        relaxed = np.minimum(dist, np.min(dist[:, None] + weights, axis=0))
        if np.array_equal(relaxed, dist):
            return dist
        dist = relaxed
    return None


def _central_optimum(slack: np.ndarray, q: np.ndarray, duals: np.ndarray,
                     tie_tol: float = 1e-9) -> np.ndarray | None:
    """Midpoint of the componentwise smallest and largest optimal shifts.

    The optimal set of a separable convex objective under difference
    constraints is a lattice; complementary slackness against one dual
    optimum describes it by further difference constraints, so its extreme
    points are shortest-path distances from an extra zero node.
    """
    K = q.shape[0]
    origin = K
    # W[a, b] bounds x_b - x_a; node K is pinned at zero
    W = np.full((K + 1, K + 1), np.inf)
    W[:K, :K] = slack.T
    tight = duals > tie_tol
    kk, jj = np.nonzero(tight)
    W[kk, jj] = np.minimum(W[kk, jj], -slack[kk, jj] + 1e-12)
    net = duals.sum(axis=1) - duals.sum(axis=0)
    W[origin, :K] = np.where(net > -1 + tie_tol, 0.0, np.inf)   # q_k <= 0
    W[:K, origin] = np.where(net < 1 - tie_tol, 0.0, np.inf)    # q_k >= 0
    np.fill_diagonal(W, 0.0)
    upper = _shortest_from(W, origin)
    lower = _shortest_from(W.T, origin)
    if upper is None or lower is None:
        return None
    hi, lo = upper[:K], -lower[:K]
    if not (np.all(np.isfinite(hi)) and np.all(np.isfinite(lo))):
        return None
    return 0.5 * (lo + hi)


def _smooth_column(y: np.ndarray, bound: np.ndarray, method: str = "highs-ipm",
                   max_rounds: int = 100) -> np.ndarray:
    """Minimal L1 shift ``q`` with ``q_k - q_j <= y_j - y_k + bound[k, j]``.

    Ties between optimal shifts are broken towards the centre of the
    optimal set, so the result does not depend on the LP solver path.
    """
    slack = y[None, :] - y[:, None] + bound
    np.fill_diagonal(slack, np.inf)
    q, duals = _lp_shift(slack, method, max_rounds)
    best = np.abs(q).sum()
    centre = _central_optimum(slack, q, duals)
    if centre is not None:
        feasible = np.all(centre[:, None] - centre[None, :] <= slack + 1e-10)
        if feasible and np.abs(centre).sum() <= best + 1e-9:
            return centre
    return q


def smooth_monotone(dataset: TrainingSet, lipschitz, eps: float | None = None) -> TrainingSet:
    """Shift observations minimally (L1) so they admit a monotone Lipschitz fit.

    Each BS column is handled independently.  The shifted values are pulled
    exactly onto the compatible set (removing LP round-off) and clamped to
    ``[0, 1]``; both steps preserve compatibility.
    """
    lipschitz = np.asarray(lipschitz, dtype=float).reshape(-1)
    if lipschitz.shape != (dataset.num_bs,):
        raise ValueError(f"need one Lipschitz constant per BS ({dataset.num_bs})")
    if np.any(lipschitz < 0):
        raise ValueError("Lipschitz constants must be non-negative")
    cone = cone_distance_matrix(dataset.inputs)
    smoothed = np.empty_like(dataset.outputs)
    for i in range(dataset.num_bs):
        y = dataset.outputs[:, i]
        bound = lipschitz[i] * cone
        q = _smooth_column(y, bound)
        rho = y + q
        # rho_k <- min_j rho_j + L d(k, j) equals rho up to solver tolerance
        rho = np.min(rho[None, :] + bound, axis=1)
        smoothed[:, i] = np.clip(rho, 0.0, 1.0)
    noise = dataset.noise_bound if eps is None else eps
    return TrainingSet(dataset.inputs, smoothed, noise_bound=noise, smoothed=True,
                       lipschitz=lipschitz)


@dataclass(frozen=True, eq=False)
class LearnerModel:
    """Everything the online predictor needs: anchors, values and ``L`` per BS."""

    lipschitz: np.ndarray
    anchors: np.ndarray
    values: np.ndarray
    eps: float = 0.0

    def __post_init__(self):
        lip = np.array(self.lipschitz, dtype=float).reshape(-1)
        anchors = np.array(self.anchors, dtype=float, ndmin=2)
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.shape != (anchors.shape[0], lip.shape[0]):
            raise ValueError(
                f"values shape {values.shape} does not match "
                f"{anchors.shape[0]} anchors x {lip.shape[0]} BSs"
            )
        if np.any(lip < 0):
            raise ValueError("Lipschitz constants must be non-negative")
        for arr in (lip, anchors, values):
            arr.setflags(write=False)
        object.__setattr__(self, "lipschitz", lip)
        object.__setattr__(self, "anchors", anchors)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "eps", float(self.eps))

    @property
    def num_bs(self) -> int:
        return self.lipschitz.shape[0]

    @property
    def num_tp(self) -> int:
        return self.anchors.shape[1]

    @property
    def num_anchors(self) -> int:
        return self.anchors.shape[0]

    def __eq__(self, other):
        if not isinstance(other, LearnerModel):
            return NotImplemented
        return (
            np.array_equal(self.lipschitz, other.lipschitz)
            and np.array_equal(self.anchors, other.anchors)
            and np.array_equal(self.values, other.values)
            and self.eps == other.eps
        )

    def compatibility_gap(self) -> np.ndarray:
        """Worst ``rho_i^k - rho_i^j - L_i ||(r^k - r^j)_+||`` per BS (<= 0 when compatible)."""
        cone = cone_distance_matrix(self.anchors)
        gaps = np.empty(self.num_bs)
        for i in range(self.num_bs):
            v = self.values[:, i]
            gaps[i] = np.max(v[:, None] - v[None, :] - self.lipschitz[i] * cone)
        return gaps

    def is_compatible(self, tol: float = COMPAT_TOL) -> bool:
        return bool(np.all(self.compatibility_gap() <= tol))

    def predict(self, x) -> np.ndarray:
        return predict(self, x)

    def to_dict(self) -> dict:
        return {
            "type": "minimax",
            "lipschitz": self.lipschitz.tolist(),
            "eps": self.eps,
            "anchors": self.anchors.tolist(),
            "values": self.values.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "LearnerModel":
        if doc.get("type", "minimax") != "minimax":
            raise ValueError(f"not a minimax model: type={doc.get('type')!r}")
        return cls(doc["lipschitz"], doc["anchors"], doc["values"], doc.get("eps", 0.0))

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict())
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    @classmethod
    def from_json(cls, source) -> "LearnerModel":
        if isinstance(source, Path) or not str(source).lstrip().startswith("{"):
            source = Path(source).read_text()
        return cls.from_dict(json.loads(source))


@dataclass(frozen=True)
class Envelope:
    lower: np.ndarray
    upper: np.ndarray

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower


def fit(dataset: TrainingSet, eps: float) -> LearnerModel:
    """Estimate ``L`` per BS, smooth the observations and package the model.

    A single sample carries no slope information; ``L`` is then zero.
    """
    _check_distinct(dataset.inputs)
    if dataset.num_samples >= 2:
        lip = estimate_lipschitz(dataset, eps)
    else:
        lip = np.zeros(dataset.num_bs)
    smoothed = smooth_monotone(dataset, lip, eps)
    return LearnerModel(lip, dataset.inputs, smoothed.outputs, eps)


def _bounds(model: LearnerModel, queries: np.ndarray):
    if queries.shape[1] != model.num_tp:
        raise ValueError(
            f"query has {queries.shape[1]} rates but the model expects {model.num_tp}"
        )
    up, down = _cone_distances(queries, model.anchors)
    lower = np.empty((queries.shape[0], model.num_bs))
    upper = np.empty_like(lower)
    for i in range(model.num_bs):
        v = model.values[:, i]
        L = model.lipschitz[i]
        lower[:, i] = np.max(v[None, :] - L * down, axis=1)
        upper[:, i] = np.min(v[None, :] + L * up, axis=1)
    return np.maximum(lower, 0.0), np.minimum(upper, 1.0)


def envelope(model: LearnerModel, x) -> Envelope:
    """Tightest lower/upper load bounds consistent with the model, in ``[0, 1]``.

    ``x`` may be one rate vector or a 2-D batch (one query per row).
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    lower, upper = _bounds(model, np.atleast_2d(x))
    if single:
        return Envelope(lower[0], upper[0])
    return Envelope(lower, upper)


def predict(model: LearnerModel, x) -> np.ndarray:
    """Midpoint of the envelope; ``O(K)`` work per BS and query."""
    return envelope(model, x).midpoint
