"""Exact k-nearest-neighbour classification.

Distances are Minkowski of any order >= 1, or Chebyshev. The search is exact
brute force over a contiguous training matrix: each block of queries gets a
cheap approximate distance matrix (Gram expansion for euclidean, a
per-feature accumulation otherwise), everything within a rounding slack of
the k-th approximate distance is kept as a candidate, and candidates are
re-scored with the same routine that ``minkowski_distance`` uses. Neighbour
lists are ordered by (distance, training index).
"""
from __future__ import annotations

import io
import json
import zipfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .preprocess import FeatureSchema, ScalingParams

UNIFORM = "uniform"
INVERSE_DISTANCE = "inverse_distance"
WEIGHTINGS = (UNIFORM, INVERSE_DISTANCE)

# elements in one block's approximate distance matrix
_BLOCK_ELEMENTS = 1 << 22


@dataclass(frozen=True)
class DistanceMetric:
    kind: str = "minkowski"
    order: float = 2.0

    def __post_init__(self):
        if self.kind not in ("minkowski", "chebyshev"):
            raise ValueError(f"unknown metric {self.kind!r}")
        if self.kind == "minkowski" and not self.order >= 1:
            raise ValueError("Minkowski order must be >= 1")

    @classmethod
    def euclidean(cls):
        return cls("minkowski", 2.0)

    @classmethod
    def manhattan(cls):
        return cls("minkowski", 1.0)

    @classmethod
    def chebyshev(cls):
        return cls("chebyshev", float("inf"))

    def to_dict(self):
        return {"kind": self.kind, "order": None if self.kind == "chebyshev" else float(self.order)}

    @classmethod
    def from_dict(cls, data):
        if data["kind"] == "chebyshev":
            return cls.chebyshev()
        return cls("minkowski", float(data["order"]))


def _reduce(absdiff, metric, axis=-1):
    # shared by the scalar distances and the candidate re-scoring so both
    # produce bit-identical values
    if metric.kind == "chebyshev":
        return np.max(absdiff, axis=axis, initial=0.0)
    p = metric.order
    if p == 1:
        return np.sum(absdiff, axis=axis)
    if p == 2:
        return np.sqrt(np.sum(absdiff * absdiff, axis=axis))
    return np.sum(absdiff**p, axis=axis) ** (1.0 / p)


def _as_pair(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"vectors must be 1-D and of equal length, got {x.shape} and {y.shape}")
    return x, y


def minkowski_distance(x, y, order: float = 2.0) -> float:
    """(sum |x_i - y_i|^order)^(1/order); order 1 is Manhattan, 2 Euclidean."""
    metric = DistanceMetric("minkowski", order)
    x, y = _as_pair(x, y)
    return float(_reduce(np.abs(x - y), metric))


def chebyshev_distance(x, y) -> float:
    x, y = _as_pair(x, y)
    return float(_reduce(np.abs(x - y), DistanceMetric.chebyshev()))


def distance(x, y, metric: DistanceMetric) -> float:
    x, y = _as_pair(x, y)
    return float(_reduce(np.abs(x - y), metric))


@dataclass(frozen=True, eq=False)
class KnnModel:
    """A stored training set plus the voting rule.

    ``schema`` and ``scaling`` are carried along so a saved model can encode
    raw policies the same way its training matrix was encoded.
    """

    train_matrix: np.ndarray
    train_labels: np.ndarray
    k: int = 20
    metric: DistanceMetric = DistanceMetric()
    weighting: str = INVERSE_DISTANCE
    schema: FeatureSchema | None = None
    scaling: ScalingParams | None = None

    def __post_init__(self):
        X = np.ascontiguousarray(self.train_matrix, dtype=np.float64)
        y = np.asarray(self.train_labels, dtype=np.int64)
        object.__setattr__(self, "train_matrix", X)
        object.__setattr__(self, "train_labels", y)
        if X.ndim != 2 or len(X) != len(y):
            raise ValueError("training matrix must be 2-D with one label per row")
        if not np.isin(y, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        if not 1 <= self.k <= len(X):
            raise ValueError(f"k={self.k} must lie in [1, {len(X)}]")
        if self.weighting not in WEIGHTINGS:
            raise ValueError(f"weighting must be one of {WEIGHTINGS}")
        if self.schema is not None and len(self.schema) != X.shape[1]:
            raise ValueError("schema does not match the training matrix")

    @property
    def dimension(self) -> int:
        return self.train_matrix.shape[1]

    def with_k(self, k: int) -> "KnnModel":
        return KnnModel(self.train_matrix, self.train_labels, k, self.metric, self.weighting, self.schema, self.scaling)


def fit(X, y, k: int = 20, metric: DistanceMetric | None = None, weighting: str = INVERSE_DISTANCE, schema=None, scaling=None) -> KnnModel:
    return KnnModel(X, y, k, metric or DistanceMetric.euclidean(), weighting, schema, scaling)


def _check_queries(queries, model):
    Q = np.ascontiguousarray(queries, dtype=np.float64)
    if Q.ndim == 1:
        Q = Q.reshape(1, -1) if Q.size else Q.reshape(0, model.dimension)
    if Q.ndim != 2 or Q.shape[1] != model.dimension:
        raise ValueError(f"queries have dimension {Q.shape[-1]}, model expects {model.dimension}")
    return Q


def _approximate(Q, X, metric, x_sq):
    """Approximate distances (squared for euclidean, p-th power for other
    Minkowski orders) and the absolute slack that bounds their rounding error."""
    if metric.kind == "minkowski" and metric.order == 2:
        q_sq = np.einsum("ij,ij->i", Q, Q)
        approx = q_sq[:, None] + x_sq[None, :] - 2.0 * (Q @ X.T)
        slack = 1e-9 * (q_sq[:, None] + x_sq.max()) + 1e-300
        return approx, slack
    approx = np.zeros((len(Q), len(X)))
    for j in range(X.shape[1]):
        diff = np.abs(Q[:, j, None] - X[None, :, j])
        if metric.kind == "chebyshev":
            np.maximum(approx, diff, out=approx)
        elif metric.order == 1:
            approx += diff
        else:
            approx += diff**metric.order
    return approx, None


def _block_neighbours(Q, X, metric, k, x_sq):
    approx, slack = _approximate(Q, X, metric, x_sq)
    kth = np.partition(approx, k - 1, axis=1)[:, k - 1]
    if slack is None:
        slack = 1e-9 * np.abs(kth) + 1e-300
        bound = (kth + slack)[:, None]
    else:
        bound = kth[:, None] + 2.0 * slack
    mask = approx <= bound
    indices = np.empty((len(Q), k), dtype=np.int64)
    distances = np.empty((len(Q), k))
    for i in range(len(Q)):
        cand = np.flatnonzero(mask[i])
        exact = _reduce(np.abs(X[cand] - Q[i]), metric, axis=1)
        order = np.lexsort((cand, exact))[:k]
        indices[i] = cand[order]
        distances[i] = exact[order]
    return indices, distances


def kneighbors(queries, model: KnnModel, k: int | None = None, threads: int = 1):
    """Indices and distances of the k nearest training rows for each query.

    Returns two ``(m, k)`` arrays sorted by distance, ties broken by the lower
    training index. Query blocks are independent, so ``threads > 1`` gives
    exactly the same result as a sequential run.
    """
    k = model.k if k is None else k
    X = model.train_matrix
    if not 1 <= k <= len(X):
        raise ValueError(f"k={k} must lie in [1, {len(X)}]")
    Q = _check_queries(queries, model)
    if len(Q) == 0:
        return np.empty((0, k), dtype=np.int64), np.empty((0, k))
    x_sq = np.einsum("ij,ij->i", X, X)
    block = max(1, _BLOCK_ELEMENTS // max(1, len(X)))
    starts = range(0, len(Q), block)

    def run(start):
        return _block_neighbours(Q[start : start + block], X, model.metric, k, x_sq)

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(s) for s in starts]
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def find_k_nearest(query, model: KnnModel) -> list[tuple[int, float]]:
    query = np.asarray(query, dtype=np.float64)
    if query.ndim != 1:
        raise ValueError("query must be a single vector")
    idx, dist = kneighbors(query[None, :], model)
    return [(int(i), float(d)) for i, d in zip(idx[0], dist[0])]


class Vote(NamedTuple):
    label: int
    score: float
    tie: bool


def _sequential_sum(a):
    if a.shape[1] == 0:
        return np.zeros(len(a))
    return np.cumsum(a, axis=1)[:, -1]


def _votes(neighbour_labels, distances, weighting):
    """Weighted vote per row. Ties go to label 0.

    Under inverse-distance weighting a row with any zero-distance neighbour
    lets only those neighbours vote, each with weight one.
    """
    ones = neighbour_labels == 1
    if weighting == UNIFORM:
        weights = np.ones_like(distances)
    else:
        zero = distances == 0.0
        exact_hit = zero.any(axis=1, keepdims=True)
        with np.errstate(divide="ignore"):
            inverse = 1.0 / distances
        weights = np.where(exact_hit, zero.astype(np.float64), inverse)
    # left-to-right sums in neighbour order, so results do not depend on
    # numpy's pairwise summation strategy
    mass1 = _sequential_sum(np.where(ones, weights, 0.0))
    mass0 = _sequential_sum(np.where(ones, 0.0, weights))
    labels = (mass1 > mass0).astype(np.int64)
    tie = mass1 == mass0
    score = np.maximum(mass1, mass0) / (mass1 + mass0)
    return labels, score, tie


def predict_votes(queries, model: KnnModel, threads: int = 1):
    """Labels, winning weight shares and tie flags for every query row."""
    idx, dist = kneighbors(queries, model, threads=threads)
    if len(idx) == 0:
        return np.empty(0, dtype=np.int64), np.empty(0), np.empty(0, dtype=bool)
    return _votes(model.train_labels[idx], dist, model.weighting)


def predict_one(query, model: KnnModel) -> Vote:
    query = np.asarray(query, dtype=np.float64)
    if query.ndim != 1:
        raise ValueError("query must be a single vector")
    labels, score, tie = predict_votes(query[None, :], model)
    return Vote(int(labels[0]), float(score[0]), bool(tie[0]))


def predict(queries, model: KnnModel, threads: int = 1) -> np.ndarray:
    return predict_votes(queries, model, threads)[0]


class SweepRow(NamedTuple):
    k: int
    train_accuracy: float
    test_accuracy: float


def accuracy_vs_k_sweep(train, test, k_values, metric: DistanceMetric | None = None, weighting: str = INVERSE_DISTANCE, threads: int = 1) -> list[SweepRow]:
    """Train and test accuracy for each k.

    ``train`` and ``test`` are ``(X, y)`` pairs. Neighbours are searched once
    at the largest k; the (distance, index) ordering makes every smaller
    neighbour list a prefix of it.
    """
    k_values = [int(k) for k in k_values]
    if not k_values:
        raise ValueError("k_values is empty")
    X_train, y_train = train
    X_test, y_test = test
    y_train = np.asarray(y_train)
    y_test = np.asarray(y_test)
    if max(k_values) > len(X_train) or min(k_values) < 1:
        raise ValueError(f"every k must lie in [1, {len(X_train)}]")
    model = fit(X_train, y_train, max(k_values), metric, weighting)
    tr_idx, tr_dist = kneighbors(X_train, model, threads=threads)
    te_idx, te_dist = kneighbors(X_test, model, threads=threads)
    rows = []
    for k in k_values:
        tr_pred = _votes(y_train[tr_idx[:, :k]], tr_dist[:, :k], weighting)[0]
        te_pred = _votes(y_train[te_idx[:, :k]], te_dist[:, :k], weighting)[0]
        rows.append(SweepRow(k, float(np.mean(tr_pred == y_train)), float(np.mean(te_pred == y_test))))
    return rows


# --- persistence ----------------------------------------------------------
#
# A zip archive holding meta.json plus .npy members, written with fixed
# timestamps so the same model always serialises to the same bytes.

_EPOCH = (1980, 1, 1, 0, 0, 0)


def _write_member(archive, name, payload):
    info = zipfile.ZipInfo(name, date_time=_EPOCH)
    info.compress_type = zipfile.ZIP_DEFLATED
    info.external_attr = 0o644 << 16
    archive.writestr(info, payload)


def _npy_bytes(array):
    buffer = io.BytesIO()
    np.lib.format.write_array(buffer, np.ascontiguousarray(array), allow_pickle=False)
    return buffer.getvalue()


def save_model(model: KnnModel, path, extra: dict | None = None) -> None:
    meta = {
        "format": "claimclass.knn/1",
        "k": model.k,
        "metric": model.metric.to_dict(),
        "weighting": model.weighting,
        "schema": None if model.schema is None else model.schema.to_dict(),
        "scaling": None if model.scaling is None else model.scaling.to_dict(),
        "extra": extra or {},
    }
    with zipfile.ZipFile(path, "w") as archive:
        _write_member(archive, "meta.json", json.dumps(meta, sort_keys=True, indent=1))
        _write_member(archive, "train_matrix.npy", _npy_bytes(model.train_matrix))
        _write_member(archive, "train_labels.npy", _npy_bytes(model.train_labels))


def load_model(path) -> tuple[KnnModel, dict]:
    """Return the model and the ``extra`` metadata stored with it."""
    with zipfile.ZipFile(path) as archive:
        meta = json.loads(archive.read("meta.json"))
        if meta.get("format") != "claimclass.knn/1":
            raise ValueError(f"{path} is not a KNN model file")
        X = np.lib.format.read_array(io.BytesIO(archive.read("train_matrix.npy")))
        y = np.lib.format.read_array(io.BytesIO(archive.read("train_labels.npy")))
    schema = None if meta["schema"] is None else FeatureSchema.from_dict(meta["schema"])
    scaling = None if meta["scaling"] is None else ScalingParams.from_dict(meta["scaling"])
    model = KnnModel(X, y, meta["k"], DistanceMetric.from_dict(meta["metric"]), meta["weighting"], schema, scaling)
    return model, meta["extra"]
