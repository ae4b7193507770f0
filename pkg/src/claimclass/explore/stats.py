"""Claim proportions per feature level, correlations and department totals."""
from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import NamedTuple

import numpy as np
import pandas as pd

from ..evaluation import UNDEFINED

# bin widths for the numeric features plotted against claim proportions
DEFAULT_BINS = {
    "drv_age1": 5,
    "drv_age2": 5,
    "vh_age": 5,
    "vh_speed": 25,
    "pol_duration": 1,
    "pol_sit_duration": 1,
}

DEFAULT_LEVEL_FEATURES = [
    "pol_bonus",
    "pol_coverage",
    "drv_age1",
    "pol_pay_freq",
    "vh_fuel",
    "pol_payd",
    "pol_duration",
    "pol_sit_duration",
    "vh_speed",
    "pol_usage",
    "vh_age",
    "vh_type",
]

CONTINUOUS_FEATURES = [
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


def z_value(level: float) -> float:
    """Two-sided normal quantile; 1.959964 at level 0.95."""
    if not 0 < level < 1:
        raise ValueError("confidence level must lie in (0, 1)")
    return NormalDist().inv_cdf(0.5 + level / 2)


def wald_ci(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    """Normal-approximation interval for a binomial proportion, clipped to [0, 1]."""
    if trials <= 0:
        raise ValueError("trials must be >= 1")
    if not 0 <= successes <= trials:
        raise ValueError("successes must lie in [0, trials]")
    p = successes / trials
    half = z_value(level) * math.sqrt(p * (1 - p) / trials)
    return max(0.0, p - half), min(1.0, p + half)


def wilson_ci(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    if trials <= 0:
        raise ValueError("trials must be >= 1")
    if not 0 <= successes <= trials:
        raise ValueError("successes must lie in [0, trials]")
    z = z_value(level)
    p = successes / trials
    den = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / den
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / den
    return max(0.0, centre - half), min(1.0, centre + half)


def rate_ci(events: int, exposure: int, level: float = 0.95) -> tuple[float, float]:
    """Normal interval for a count per policy (can exceed 1), floored at 0."""
    if exposure <= 0:
        raise ValueError("exposure must be >= 1")
    r = events / exposure
    half = z_value(level) * math.sqrt(r / exposure)
    return max(0.0, r - half), r + half


@dataclass(frozen=True)
class ProportionRow:
    level: object
    policy_count: int
    claim_count: int
    proportion: float
    ci_low: float
    ci_high: float


def _level_keys(values: pd.Series, binning):
    """Map each value to a sortable key and a display label."""
    if binning is None or binning == "levels":
        return values, values.map(str)
    if isinstance(binning, (int, float)):
        width = float(binning)
        if width <= 0:
            raise ValueError("bin width must be positive")
        lo = np.floor(values.astype(float) / width) * width
        label = lo.map(lambda a: f"[{a:g}, {a + width:g})")
        return lo, label
    edges = np.asarray(list(binning), dtype=float)
    if len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("bin edges must be increasing with at least two entries")
    pos = np.searchsorted(edges, values.astype(float), side="right") - 1
    # the last edge closes the final bin
    pos = np.where(values.astype(float).to_numpy() == edges[-1], len(edges) - 2, pos)
    pos = pd.Series(pos, index=values.index)
    inside = (pos >= 0) & (pos < len(edges) - 1)
    pos = pos.where(inside)
    label = pos.map(lambda i: f"[{edges[int(i)]:g}, {edges[int(i) + 1]:g})" if not pd.isna(i) else None)
    return pos, label


def claim_proportion_by_level(
    dataset: pd.DataFrame,
    feature: str,
    binning=None,
    count: str = "policies",
    interval: str = "wald",
    level: float = 0.95,
) -> list[ProportionRow]:
    """Share of claiming policies for each level (or bin) of ``feature``.

    binning
        ``None`` or ``"levels"`` keeps each distinct value; a number is a bin
        width; a sequence is a list of bin edges. Numeric features with more
        than 30 distinct values must be binned.
    count
        ``"policies"`` counts policies with at least one claim; ``"claims"``
        counts all claims, giving a frequency that may exceed 1 (its interval
        then comes from ``rate_ci``).
    interval
        ``"wald"`` or ``"wilson"``.
    """
    if feature not in dataset.columns:
        raise KeyError(f"unknown feature {feature!r}")
    values = dataset[feature]
    numeric = pd.api.types.is_numeric_dtype(values) and not pd.api.types.is_bool_dtype(values)
    if numeric and binning is None and values.nunique() > 30:
        raise ValueError(f"numeric feature {feature!r} needs a bin width or edges")
    if count not in ("policies", "claims"):
        raise ValueError("count must be 'policies' or 'claims'")
    ci = {"wald": wald_ci, "wilson": wilson_ci}.get(interval)
    if ci is None:
        raise ValueError("interval must be 'wald' or 'wilson'")

    keys, labels = _level_keys(values, binning)
    numerator = dataset["label"] if count == "policies" else dataset["claim_nb"]
    frame = pd.DataFrame({"key": keys, "label": labels, "hit": numerator}).dropna(subset=["key"])
    rows = []
    for key, group in frame.groupby("key", sort=True):
        n = len(group)
        hits = int(group["hit"].sum())
        low, high = ci(hits, n, level) if count == "policies" else rate_ci(hits, n, level)
        display = group["label"].iloc[0]
        if binning is None or binning == "levels":
            display = key.item() if hasattr(key, "item") else key
        rows.append(ProportionRow(display, n, hits, hits / n, low, high))
    return rows


class CorrelationMatrix(NamedTuple):
    names: list
    values: np.ndarray
    constant: list  # names whose correlations are undefined (NaN off-diagonal)


def pearson_correlation_matrix(data, names=None) -> CorrelationMatrix:
    """Pairwise Pearson coefficients of the columns of ``data``.

    ``data`` is a DataFrame or 2-D array. Entries involving a constant column
    are NaN, except the unit diagonal.
    """
    if isinstance(data, pd.DataFrame):
        names = list(data.columns) if names is None else names
        X = data[names].to_numpy(dtype=np.float64)
    else:
        X = np.asarray(data, dtype=np.float64)
        names = list(names) if names is not None else [f"x{i}" for i in range(X.shape[1])]
    if X.ndim != 2 or len(X) < 2:
        raise ValueError("need at least two rows")
    centred = X - X.mean(axis=0)
    norms = np.sqrt(np.einsum("ij,ij->j", centred, centred))
    constant = norms == 0
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = centred / norms
        values = unit.T @ unit
    values = np.clip((values + values.T) / 2, -1.0, 1.0)
    values[constant, :] = np.nan
    values[:, constant] = np.nan
    np.fill_diagonal(values, 1.0)
    return CorrelationMatrix(names, values, [n for n, c in zip(names, constant) if c])


def department_code(insee: str) -> str:
    """First two characters of a 5-character INSEE commune code ("2A", "2B" for Corsica)."""
    insee = str(insee).strip()
    if len(insee) != 5:
        raise ValueError(f"INSEE code must have 5 characters: {insee!r}")
    return insee[:2].upper()


@dataclass(frozen=True)
class DepartmentAggregate:
    code: str
    policy_count: int
    claim_count: int
    claim_amount: float


def aggregate_by_department(dataset: pd.DataFrame) -> list[DepartmentAggregate]:
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    codes = dataset["pol_insee_code"].map(department_code)
    grouped = dataset.assign(department=codes).groupby("department", sort=True)
    out = []
    for code, group in grouped:
        out.append(
            DepartmentAggregate(
                code,
                len(group),
                int(group["claim_nb"].sum()),
                math.fsum(group["claim_amount"]),
            )
        )
    return out


def departments_frame(aggregates) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "code": [a.code for a in aggregates],
            "policy_count": [a.policy_count for a in aggregates],
            "claim_count": [a.claim_count for a in aggregates],
            "claim_amount": [a.claim_amount for a in aggregates],
        }
    )


class Summary(NamedTuple):
    mean: float
    std: object
    min: float
    q1: float
    median: float
    q3: float
    max: float


def summary_stats(values) -> Summary:
    """Mean, sample std (UNDEFINED for one value), min, quartiles and max.

    Quartiles use linear interpolation between order statistics.
    """
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        raise ValueError("no values")
    q1, med, q3 = np.percentile(x, [25, 50, 75], method="linear")
    std = float(np.std(x, ddof=1)) if x.size > 1 else UNDEFINED
    return Summary(float(x.mean()), std, float(x.min()), float(q1), float(med), float(q3), float(x.max()))


def department_table(aggregates) -> pd.DataFrame:
    """Summary statistics across departments for claim number, claim amount
    and policy count, one row each."""
    frame = departments_frame(aggregates)
    rows = []
    for name, column in (("Claim number", "claim_count"), ("Claim amount", "claim_amount"), ("Policy", "policy_count")):
        s = summary_stats(frame[column])
        rows.append({"quantity": name, **{k: (None if v is UNDEFINED else v) for k, v in s._asdict().items()}})
    return pd.DataFrame(rows)
