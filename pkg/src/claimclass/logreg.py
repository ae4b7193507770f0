"""Binary logistic regression fitted by full-batch gradient descent.

The data term is the Bernoulli negative log-likelihood summed over rows. The
penalty acts on the slope coefficients only (never the intercept):

    none         0
    lasso        (lam / 2) * sum |w_j|
    ridge        (lam / 2) * sum w_j**2
    elastic_net  lam * (mix * sum |w_j| + (1 - mix) / 2 * sum w_j**2)

C is the inverse strength, ``lam = 1 / C``.

The literal half sum of squared errors between sigmoid probabilities and
labels is available as ``loss="squared"`` in ``objective`` and ``gradient``;
``fit`` always uses the likelihood, which keeps the problem convex.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .preprocess import FeatureSchema, ScalingParams

PENALTIES = ("none", "lasso", "ridge", "elastic_net")
_ALIASES = {"l1": "lasso", "l2": "ridge", "elasticnet": "elastic_net", None: "none"}

SNAP_TO_ZERO = 1e-6


def canonical_penalty(penalty) -> str:
    penalty = _ALIASES.get(penalty, penalty)
    if penalty not in PENALTIES:
        raise ValueError(f"penalty must be one of {PENALTIES}, got {penalty!r}")
    return penalty


def sigmoid(z):
    """Logistic function, evaluated without overflow for any finite input."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out if out.ndim else float(out)


def _split_penalty(penalty, lam, mix):
    """Coefficients (l1, l2) such that the penalty is l1*|w|_1 + l2/2*|w|_2^2."""
    penalty = canonical_penalty(penalty)
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if penalty == "none":
        return 0.0, 0.0
    if penalty == "lasso":
        return lam / 2.0, 0.0
    if penalty == "ridge":
        return 0.0, lam
    if not 0.0 <= mix <= 1.0:
        raise ValueError("elastic-net mix must lie in [0, 1]")
    return lam * mix, lam * (1.0 - mix)


def penalty_value(weights, penalty="none", lam=0.0, mix=0.5) -> float:
    l1, l2 = _split_penalty(penalty, lam, mix)
    w = np.asarray(weights, dtype=np.float64)
    return float(l1 * np.sum(np.abs(w)) + 0.5 * l2 * np.dot(w, w))


def _check(weights, X, y):
    w = np.asarray(weights, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != len(w) or len(y) != len(X):
        raise ValueError(f"shape mismatch: X {X.shape}, weights {w.shape}, y {y.shape}")
    return w, X, y


def _data_loss(z, y, loss):
    if loss == "log":
        # log(1 + e^z) - y z
        return float(np.sum(np.logaddexp(0.0, z) - y * z))
    if loss == "squared":
        return float(0.5 * np.sum((sigmoid(z) - y) ** 2))
    raise ValueError(f"unknown loss {loss!r}")


def _data_grad(z, y, loss):
    p = sigmoid(z)
    if loss == "log":
        return p - y
    if loss == "squared":
        return (p - y) * p * (1.0 - p)
    raise ValueError(f"unknown loss {loss!r}")


def objective(weights, intercept, X, y, penalty="none", lam=0.0, mix=0.5, loss="log") -> float:
    w, X, y = _check(weights, X, y)
    z = X @ w + intercept
    return _data_loss(z, y, loss) + penalty_value(w, penalty, lam, mix)


def gradient(weights, intercept, X, y, penalty="none", lam=0.0, mix=0.5, loss="log"):
    """Gradient of ``objective`` as ``(d/dw, d/dintercept)``.

    The L1 part contributes ``l1 * sign(w_j)`` with sign(0) = 0.
    """
    w, X, y = _check(weights, X, y)
    l1, l2 = _split_penalty(penalty, lam, mix)
    r = _data_grad(X @ w + intercept, y, loss)
    gw = X.T @ r + l1 * np.sign(w) + l2 * w
    return gw, float(np.sum(r))


def linear_score(X, model: "LogregModel"):
    """w0 + sum_j w_j x_j for one row or each row of a matrix."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != len(model.weights):
        raise ValueError(f"input has {X.shape[-1]} features, model has {len(model.weights)}")
    out = X @ model.weights + model.intercept
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class FitConfig:
    max_iterations: int = 5000
    tolerance: float = 1e-8  # relative decrease of the objective
    learning_rate: float | str = "backtracking"
    seed: int = 0
    armijo: float = 1e-4
    gradient_tolerance: float = 0.0
    max_halvings: int = 60

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be > 0")
        if self.learning_rate != "backtracking" and not float(self.learning_rate) > 0:
            raise ValueError("learning_rate must be 'backtracking' or a positive step")


@dataclass
class LogregModel:
    weights: np.ndarray
    intercept: float
    penalty: str = "none"
    lam: float = 0.0
    mix: float = 0.5
    schema: FeatureSchema | None = None
    scaling: ScalingParams | None = None
    trace: list = field(default_factory=list)
    converged: bool = False

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.penalty = canonical_penalty(self.penalty)
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.schema is not None and len(self.schema) != len(self.weights):
            raise ValueError("weight count does not match the schema")

    @property
    def C(self) -> float:
        return math.inf if self.lam == 0 else 1.0 / self.lam

    @property
    def iterations(self) -> int:
        return self.trace[-1][0] if self.trace else 0


def _steepest_direction(gw_data, w, l1, l2):
    """Minimum-norm subgradient of the penalised objective in w.

    At w_j = 0 the L1 term absorbs data gradients smaller than l1, which is
    what lets lasso coordinates sit exactly at zero.
    """
    g = gw_data + l2 * w
    nz = w != 0
    out = np.where(nz, g + l1 * np.sign(w), 0.0)
    zero_g = g[~nz]
    out[~nz] = np.sign(zero_g) * np.maximum(np.abs(zero_g) - l1, 0.0)
    return out


def fit(X, y, penalty="ridge", lam: float = 1.0, config: FitConfig | None = None, mix: float = 0.5, schema=None, scaling=None) -> LogregModel:
    """Minimise the penalised negative log-likelihood from a zero start.

    Each iteration takes a step along the steepest-descent direction, found
    by halving from twice the previous accepted step until the Armijo
    condition holds. When an L1 term is present, coordinates that would cross
    zero are clipped to zero. The run stops when the relative objective
    decrease falls below ``config.tolerance``, when the direction norm falls
    below ``config.gradient_tolerance``, when no decreasing step exists, or
    after ``config.max_iterations``. ``trace`` records (iteration, objective)
    after every accepted step; with backtracking it never increases.
    """
    config = config or FitConfig()
    penalty = canonical_penalty(penalty)
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be 2-D with one label per row")
    if len(X) < 2:
        raise ValueError("need at least two rows")
    if not np.isfinite(X).all():
        raise ValueError("X contains non-finite values")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    if len(np.unique(y)) < 2:
        raise ValueError("both classes must be present to fit a logistic regression")
    l1, l2 = _split_penalty(penalty, lam, mix)

    def f(w, b):
        z = X @ w + b
        return _data_loss(z, y, "log") + l1 * np.sum(np.abs(w)) + 0.5 * l2 * np.dot(w, w)

    w = np.zeros(X.shape[1])
    b = 0.0
    fval = f(w, b)
    trace = [(0, fval)]
    step = 1.0
    backtracking = config.learning_rate == "backtracking"
    converged = False

    for it in range(1, config.max_iterations + 1):
        r = sigmoid(X @ w + b) - y
        dw = _steepest_direction(X.T @ r, w, l1, l2)
        db = float(np.sum(r))
        gnorm = math.sqrt(float(np.dot(dw, dw)) + db * db)
        if gnorm <= config.gradient_tolerance or gnorm == 0.0:
            converged = True
            break

        step = min(step * 2.0, 1e6) if backtracking else float(config.learning_rate)
        accepted = False
        for _ in range(config.max_halvings if backtracking else 1):
            w_new = w - step * dw
            if l1 > 0:
                # orthant clipping: no coordinate may pass through zero in one step
                sign_ref = np.where(w != 0, np.sign(w), -np.sign(dw))
                w_new = np.where(np.sign(w_new) == sign_ref, w_new, 0.0)
            b_new = b - step * db
            f_new = f(w_new, b_new)
            decrease = np.dot(dw, w_new - w) + db * (b_new - b)
            if not backtracking or f_new <= fval + config.armijo * decrease:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            converged = True
            break

        rel = (fval - f_new) / max(abs(fval), 1e-300)
        w, b, fval = w_new, b_new, f_new
        trace.append((it, fval))
        if 0.0 <= rel <= config.tolerance:
            converged = True
            break

    if l1 > 0:
        w = np.where(np.abs(w) < SNAP_TO_ZERO, 0.0, w)
    return LogregModel(w, b, penalty, lam, mix, schema, scaling, trace, converged)


def predict_proba(X, model: LogregModel):
    return sigmoid(linear_score(X, model))


def predict(X, model: LogregModel, threshold: float = 0.5):
    return (np.asarray(predict_proba(X, model)) >= threshold).astype(np.int64)


class PathPoint(NamedTuple):
    C: float
    weights: np.ndarray
    intercept: float


def regularization_path(X, y, penalty="lasso", C_values=(), config: FitConfig | None = None, mix: float = 0.5) -> list[PathPoint]:
    """Fit once per C (lam = 1/C) and collect the coefficients."""
    C_values = [float(c) for c in C_values]
    if not C_values:
        raise ValueError("C_values is empty")
    if any(c <= 0 for c in C_values):
        raise ValueError("C values must be positive")
    if C_values != sorted(C_values):
        raise ValueError("C values must be sorted ascending")
    out = []
    for C in C_values:
        model = fit(X, y, penalty, 1.0 / C, config, mix)
        out.append(PathPoint(C, model.weights, model.intercept))
    return out


def write_path_csv(path_points, names, path) -> None:
    """One row per C, one column per coefficient."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["C", "intercept"] + list(names))
        for point in path_points:
            writer.writerow([repr(point.C), repr(float(point.intercept))] + [repr(float(v)) for v in point.weights])


def save_model(model: LogregModel, path, extra: dict | None = None) -> None:
    data = {
        "format": "claimclass.logreg/1",
        "weights": [float(v) for v in model.weights],
        "intercept": float(model.intercept),
        "penalty": model.penalty,
        "lambda": float(model.lam),
        "mix": float(model.mix),
        "schema": None if model.schema is None else model.schema.to_dict(),
        "schema_digest": None if model.schema is None else model.schema.digest(),
        "scaling": None if model.scaling is None else model.scaling.to_dict(),
        "converged": bool(model.converged),
        "trace": [[int(i), float(v)] for i, v in model.trace],
        "extra": extra or {},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=1, sort_keys=True)


def load_model(path) -> tuple[LogregModel, dict]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if data.get("format") != "claimclass.logreg/1":
        raise ValueError(f"{path} is not a logistic-regression model file")
    schema = None if data["schema"] is None else FeatureSchema.from_dict(data["schema"])
    if schema is not None and schema.digest() != data["schema_digest"]:
        raise ValueError(f"{path}: schema digest mismatch")
    scaling = None if data["scaling"] is None else ScalingParams.from_dict(data["scaling"])
    model = LogregModel(
        np.asarray(data["weights"]),
        data["intercept"],
        data["penalty"],
        data["lambda"],
        data["mix"],
        schema,
        scaling,
        [tuple(t) for t in data["trace"]],
        data["converged"],
    )
    return model, data["extra"]
