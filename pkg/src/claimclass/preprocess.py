"""Design matrix construction: dummy encoding, scaling and a portable split."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .ingest import CATEGORIES, BOOLEAN_COLUMNS, POLICY_COLUMNS

# categorical features expanded into dummy columns by default
DEFAULT_CATEGORICAL = [
    "pol_coverage",
    "pol_pay_freq",
    "pol_payd",
    "pol_usage",
    "drv_drv2",
    "drv_sex1",
    "vh_fuel",
    "vh_type",
]

DEFAULT_NUMERIC = [
    "pol_bonus",
    "pol_duration",
    "pol_sit_duration",
    "drv_age1",
    "drv_age2",
    "drv_age_lic1",
    "drv_age_lic2",
    "vh_age",
    "vh_cyl",
    "vh_din",
    "vh_sale_begin",
    "vh_sale_end",
    "vh_speed",
    "vh_value",
    "vh_weight",
]

CATEGORICAL_FEATURES = set(CATEGORIES) | set(BOOLEAN_COLUMNS)


class SchemaMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class Column:
    name: str
    source: str
    kind: str  # "numeric" or "dummy"
    category: str | None = None


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered description of design-matrix columns and where they came from."""

    columns: tuple[Column, ...]

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise ValueError("duplicate column names in schema")
        for c in self.columns:
            if c.kind == "dummy" and c.category is None:
                raise ValueError(f"dummy column {c.name!r} lacks a category")

    def __len__(self):
        return len(self.columns)

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    @property
    def numeric(self) -> list[str]:
        return [c.source for c in self.columns if c.kind == "numeric"]

    def categories(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {}
        for c in self.columns:
            if c.kind == "dummy":
                out.setdefault(c.source, []).append(c.category)
        return out

    def to_dict(self) -> dict:
        return {"columns": [[c.name, c.source, c.kind, c.category] for c in self.columns]}

    @classmethod
    def from_dict(cls, data: dict) -> "FeatureSchema":
        return cls(tuple(Column(*entry) for entry in data["columns"]))

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class EncodedMatrix:
    values: np.ndarray
    schema: FeatureSchema
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[1] != len(self.schema):
            raise ValueError(f"matrix has shape {self.values.shape}, schema has {len(self.schema)} columns")
        if np.isnan(self.values).any():
            raise ValueError("encoded matrix contains missing entries")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if len(self.labels) != len(self.values):
                raise ValueError("label count does not match row count")

    def __len__(self):
        return len(self.values)

    def take(self, rows) -> "EncodedMatrix":
        rows = np.asarray(rows)
        labels = None if self.labels is None else self.labels[rows]
        return EncodedMatrix(self.values[rows], self.schema, labels)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.values, columns=self.schema.names)
        if self.labels is not None:
            frame["label"] = self.labels
        return frame


def _token(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "Yes" if value else "No"
    return str(value)


def build_schema(dataset: pd.DataFrame, categorical=None, numeric=None) -> FeatureSchema:
    """Numeric columns in feature-table order, then dummies per source feature
    with categories sorted lexically."""
    categorical = list(DEFAULT_CATEGORICAL if categorical is None else categorical)
    numeric = list(DEFAULT_NUMERIC if numeric is None else numeric)
    for feature in categorical:
        if feature not in CATEGORICAL_FEATURES:
            raise ValueError(f"{feature!r} is not a categorical feature")
        if feature not in dataset.columns:
            raise KeyError(f"{feature!r} not in dataset")
    for feature in numeric:
        if feature in CATEGORICAL_FEATURES:
            raise ValueError(f"{feature!r} is categorical, it cannot be used as a numeric column")
        if feature not in dataset.columns:
            raise KeyError(f"{feature!r} not in dataset")
    order = {name: i for i, name in enumerate(POLICY_COLUMNS)}
    numeric = sorted(numeric, key=lambda f: order.get(f, len(order)))
    columns = [Column(f, f, "numeric") for f in numeric]
    for feature in categorical:
        tokens = sorted({_token(v) for v in dataset[feature]})
        columns += [Column(f"{feature}_{t}", feature, "dummy", t) for t in tokens]
    return FeatureSchema(tuple(columns))


def one_hot_encode(dataset: pd.DataFrame, categorical=None, numeric=None, schema: FeatureSchema | None = None) -> EncodedMatrix:
    """Expand each categorical feature into one indicator column per category.

    An n-category feature gives n columns (no reference level is dropped).
    With ``schema`` given, the frozen layout is applied instead of being
    derived from the data and a category the schema has not seen raises
    SchemaMismatchError.
    """
    if schema is None:
        schema = build_schema(dataset, categorical, numeric)
    n = len(dataset)
    values = np.empty((n, len(schema)), dtype=np.float64)
    categories = schema.categories()
    tokens = {f: np.array([_token(v) for v in dataset[f]], dtype=object) for f in categories}
    for f, known in categories.items():
        unseen = set(tokens[f]) - set(known)
        if unseen:
            raise SchemaMismatchError(f"unseen categories for {f!r}: {sorted(unseen)}")
    for j, col in enumerate(schema.columns):
        if col.kind == "numeric":
            column = dataset[col.source]
            if column.isna().any():
                raise ValueError(f"column {col.source!r} has missing values; impute first")
            values[:, j] = column.to_numpy(dtype=np.float64)
        else:
            values[:, j] = tokens[col.source] == col.category
    labels = dataset["label"].to_numpy() if "label" in dataset.columns else None
    return EncodedMatrix(values, schema, labels)


@dataclass
class ScalingParams:
    """Per-column centre and scale.

    For ``zscore`` the centre is the mean and the scale the population
    standard deviation; for ``minmax`` they are the minimum and the range.
    Constant columns are flagged and left untouched by apply/invert.
    """

    kind: str
    names: list[str]
    center: np.ndarray
    scale: np.ndarray
    constant: np.ndarray = field(default=None)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "names": list(self.names),
            "center": self.center.tolist(),
            "scale": self.scale.tolist(),
            "constant": self.constant.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScalingParams":
        return cls(
            data["kind"],
            list(data["names"]),
            np.asarray(data["center"], dtype=np.float64),
            np.asarray(data["scale"], dtype=np.float64),
            np.asarray(data["constant"], dtype=bool),
        )


def fit_scaling(matrix: EncodedMatrix, kind: str = "zscore") -> ScalingParams:
    X = matrix.values
    if len(X) < 2:
        raise ValueError("need at least two rows to fit scaling")
    constant = X.max(axis=0) == X.min(axis=0)
    if kind == "zscore":
        center = X.mean(axis=0)
        scale = X.std(axis=0, ddof=0)
    elif kind == "minmax":
        center = X.min(axis=0)
        scale = X.max(axis=0) - center
    else:
        raise ValueError(f"unknown scaling kind {kind!r}")
    scale = np.where(constant, 1.0, scale)
    return ScalingParams(kind, matrix.schema.names, center, scale, constant)


def _check_params(matrix, params):
    if matrix.schema.names != list(params.names):
        raise SchemaMismatchError("scaling parameters were fit on a different column layout")


def apply_scaling(matrix: EncodedMatrix, params: ScalingParams) -> EncodedMatrix:
    _check_params(matrix, params)
    scaled = (matrix.values - params.center) / params.scale
    scaled[:, params.constant] = matrix.values[:, params.constant]
    return EncodedMatrix(scaled, matrix.schema, matrix.labels)


def invert_scaling(matrix: EncodedMatrix, params: ScalingParams) -> EncodedMatrix:
    _check_params(matrix, params)
    raw = matrix.values * params.scale + params.center
    raw[:, params.constant] = matrix.values[:, params.constant]
    return EncodedMatrix(raw, matrix.schema, matrix.labels)


# --- seeded split ---------------------------------------------------------
#
# SplitMix64 feeding a Fisher-Yates shuffle with rejection sampling for the
# bounded draws. Both are fully specified integer algorithms, so the same
# (n, test_fraction, seed) gives the same partition on any platform.

_MASK64 = (1 << 64) - 1


def splitmix64(seed: int):
    state = seed & _MASK64
    while True:
        state = (state + 0x9E3779B97F4A7C15) & _MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        yield z ^ (z >> 31)


def _bounded(stream, bound):
    limit = ((1 << 64) // bound) * bound
    while True:
        x = next(stream)
        if x < limit:
            return x % bound


def permutation(n: int, seed: int) -> np.ndarray:
    stream = splitmix64(seed)
    perm = list(range(n))
    for i in range(n - 1, 0, -1):
        j = _bounded(stream, i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    return np.asarray(perm, dtype=np.int64)


@dataclass(frozen=True)
class SplitIndices:
    train: np.ndarray
    test: np.ndarray
    seed: int
    test_fraction: float


def n_test_rows(n: int, test_fraction: float) -> int:
    """round(n * test_fraction) with halves rounded up."""
    return int(math.floor(n * test_fraction + 0.5))


def train_test_split(n: int, test_fraction: float = 0.25, seed: int = 0) -> SplitIndices:
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    if n < 2:
        raise ValueError("need at least two rows to split")
    n_test = n_test_rows(n, test_fraction)
    if n_test == 0 or n_test == n:
        raise ValueError(f"n={n} with test_fraction={test_fraction} leaves an empty partition")
    perm = permutation(n, seed)
    return SplitIndices(np.sort(perm[n_test:]), np.sort(perm[:n_test]), seed, test_fraction)


def subsample(indices: np.ndarray, size: int, seed: int) -> np.ndarray:
    """Seeded subset of ``indices`` of at most ``size`` elements, kept in order."""
    if size >= len(indices):
        return indices
    perm = permutation(len(indices), seed ^ 0x5BD1E995)
    return np.sort(indices[perm[:size]])


def export_encoded(matrix: EncodedMatrix, csv_path, json_path, scaling: ScalingParams | None = None) -> None:
    """CSV of the matrix plus a JSON sidecar with schema (and scaling)."""
    matrix.to_frame().to_csv(csv_path, index=False, float_format="%.17g")
    sidecar = {"schema": matrix.schema.to_dict(), "schema_digest": matrix.schema.digest()}
    if scaling is not None:
        sidecar["scaling"] = scaling.to_dict()
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2)
