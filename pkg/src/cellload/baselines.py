"""Reference regressors: Nadaraya-Watson with a Gaussian kernel and k-NN averaging.

Neither is shape preserving; they exist to be compared against the
minimax learner.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .scenario import TrainingSet

__all__ = [
    "KernelModel",
    "KnnModel",
    "kernel_fit",
    "kernel_predict",
    "knn_fit",
    "knn_predict",
    "model_from_json",
]


def _frozen(arr, ndmin=2):
    out = np.array(arr, dtype=float, ndmin=ndmin)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class KernelModel:
    anchors: np.ndarray
    values: np.ndarray
    bandwidth: float

    def __post_init__(self):
        anchors = _frozen(self.anchors)
        values = _frozen(self.values)
        if values.shape[0] != anchors.shape[0]:
            raise ValueError("anchors and values disagree on the sample count")
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        object.__setattr__(self, "anchors", anchors)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "bandwidth", float(self.bandwidth))

    def predict(self, x):
        return kernel_predict(self, x)

    def to_dict(self):
        return {"type": "kernel", "bandwidth": self.bandwidth,
                "anchors": self.anchors.tolist(), "values": self.values.tolist()}


@dataclass(frozen=True, eq=False)
class KnnModel:
    anchors: np.ndarray
    values: np.ndarray
    k_neighbors: int = 2

    def __post_init__(self):
        anchors = _frozen(self.anchors)
        values = _frozen(self.values)
        if values.shape[0] != anchors.shape[0]:
            raise ValueError("anchors and values disagree on the sample count")
        if not 1 <= self.k_neighbors <= anchors.shape[0]:
            raise ValueError(
                f"k_neighbors={self.k_neighbors} outside [1, {anchors.shape[0]}]"
            )
        object.__setattr__(self, "anchors", anchors)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "k_neighbors", int(self.k_neighbors))

    def predict(self, x):
        return knn_predict(self, x)

    def to_dict(self):
        return {"type": "knn", "k_neighbors": self.k_neighbors,
                "anchors": self.anchors.tolist(), "values": self.values.tolist()}


def kernel_fit(dataset: TrainingSet) -> KernelModel:
    """Store the data; bandwidth is the median pairwise input distance."""
    if dataset.num_samples < 2:
        raise ValueError("kernel regression needs at least two samples")
    bandwidth = float(np.median(pdist(dataset.inputs)))
    if bandwidth <= 0:
        raise ValueError("median pairwise distance is zero; inputs are degenerate")
    return KernelModel(dataset.inputs, dataset.outputs, bandwidth)


def kernel_predict(model: KernelModel, x) -> np.ndarray:
    """Gaussian-weighted average of the training loads.

    Falls back to the nearest anchor when every weight underflows.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    sq = cdist(np.atleast_2d(x), model.anchors, "sqeuclidean")
    w = np.exp(-sq / (2.0 * model.bandwidth ** 2))
    total = w.sum(axis=1)
    out = np.empty((sq.shape[0], model.values.shape[1]))
    ok = total > 0
    out[ok] = (w[ok] @ model.values) / total[ok, None]
    if not ok.all():
        out[~ok] = model.values[np.argmin(sq[~ok], axis=1)]
    return out[0] if single else out


def knn_fit(dataset: TrainingSet, k_neighbors: int = 2) -> KnnModel:
    return KnnModel(dataset.inputs, dataset.outputs, k_neighbors)


def knn_predict(model: KnnModel, x) -> np.ndarray:
    """Unweighted mean over the ``k`` nearest anchors (ties go to the lower index)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    dist = cdist(np.atleast_2d(x), model.anchors)
    # stable sort keeps the lower anchor index first among equal distances
    nearest = np.argsort(dist, axis=1, kind="stable")[:, : model.k_neighbors]
    out = model.values[nearest].mean(axis=1)
    return out[0] if single else out


def model_from_json(source):
    """Load any model (minimax, kernel or knn) from JSON text or a path."""
    from .learner import LearnerModel

    if isinstance(source, Path) or not str(source).lstrip().startswith("{"):
        source = Path(source).read_text()
    doc = json.loads(source)
    kind = doc.get("type", "minimax")
    if kind == "minimax":
        return LearnerModel.from_dict(doc)
    if kind == "kernel":
        return KernelModel(doc["anchors"], doc["values"], doc["bandwidth"])
    if kind == "knn":
        return KnnModel(doc["anchors"], doc["values"], doc.get("k_neighbors", 2))
    raise ValueError(f"unknown model type {kind!r}")
