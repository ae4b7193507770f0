"""Reading the policy and claim tables and joining them into a labelled dataset.

The policy table has one row per insured vehicle (``id_policy``); the claim
table has one row per claim, keyed by ``id_client`` and ``id_vehicle``.
Claims are summed per policy and left-joined onto the policy table, so every
policy survives the merge and policies without claims get zero totals.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np
import pandas as pd

POLICY_COLUMNS = [
    "id_policy",
    "pol_bonus",
    "pol_coverage",
    "pol_duration",
    "pol_sit_duration",
    "pol_pay_freq",
    "pol_payd",
    "pol_usage",
    "pol_insee_code",
    "drv_drv2",
    "drv_age1",
    "drv_age2",
    "drv_sex1",
    "drv_sex2",
    "drv_age_lic1",
    "drv_age_lic2",
    "vh_age",
    "vh_cyl",
    "vh_din",
    "vh_fuel",
    "vh_make",
    "vh_model",
    "vh_sale_begin",
    "vh_sale_end",
    "vh_speed",
    "vh_type",
    "vh_value",
    "vh_weight",
]

CATEGORIES = {
    "pol_coverage": ("Mini", "Median1", "Median2", "Maxi"),
    "pol_pay_freq": ("Annual", "Biannual", "Quarterly", "Monthly"),
    "pol_usage": ("WorkPrivate", "Retired", "Professional", "AllTrips"),
    "drv_sex1": ("M", "F"),
    "drv_sex2": ("M", "F", "none"),
    "vh_fuel": ("Diesel", "Gasoline", "Hybrid"),
    "vh_type": ("Tourism", "Commercial"),
}

# spellings seen in the pricing-game files for the same category
ALIASES = {
    "pol_pay_freq": {"Yearly": "Annual", "Bi-annual": "Biannual", "Biannually": "Biannual"},
    "vh_type": {"Tourisme": "Tourism", "Commercial vehicle": "Commercial"},
}

BOOLEAN_COLUMNS = ("pol_payd", "drv_drv2")
INTEGER_COLUMNS = (
    "pol_duration",
    "pol_sit_duration",
    "drv_age1",
    "drv_age2",
    "drv_age_lic1",
    "drv_age_lic2",
    "vh_age",
    "vh_sale_begin",
    "vh_sale_end",
)
DECIMAL_COLUMNS = ("pol_bonus", "vh_cyl", "vh_din", "vh_speed", "vh_value", "vh_weight")
STRING_COLUMNS = ("id_policy", "pol_insee_code", "vh_make", "vh_model")

SECOND_DRIVER_COLUMNS = ("drv_age2", "drv_sex2", "drv_age_lic2")
OPTIONAL_COLUMNS = ("vh_age",)

BONUS_RANGE = (0.5, 3.5)
CLAIM_AMOUNT_RANGE = (-2000.0, 300000.0)

LABEL_COLUMNS = ["claim_nb", "claim_amount", "label"]

_TRUE = {"yes", "y", "true", "1", "t"}
_FALSE = {"no", "n", "false", "0", "f"}


class IngestError(ValueError):
    """A row of an input table could not be parsed.

    ``line`` is the 1-based physical line number (the header is line 1).
    """

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column!r}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class OrphanClaimError(ValueError):
    """Aggregated claims reference policies that are not in the policy table."""

    def __init__(self, keys):
        self.keys = sorted(keys)
        shown = ", ".join(self.keys[:10])
        more = f" (+{len(self.keys) - 10} more)" if len(self.keys) > 10 else ""
        super().__init__(f"{len(self.keys)} claim keys have no policy: {shown}{more}")


def build_policy_id(id_client: str, id_vehicle: str, separator: str = "-") -> str:
    """Join a client id and a vehicle id into the policy key.

    A client insuring several cars keeps one ``id_client`` and gets one key per
    vehicle. The separator is configurable because the exact key layout
    differs between releases of the pricing-game files.
    """
    id_client = str(id_client).strip()
    id_vehicle = str(id_vehicle).strip()
    if not id_client or not id_vehicle:
        raise ValueError("id_client and id_vehicle must both be non-empty")
    return f"{id_client}{separator}{id_vehicle}"


def _parse_bool(token):
    low = token.lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    raise ValueError(f"not a yes/no value: {token!r}")


def _parse_int(token):
    value = float(token)
    if not math.isfinite(value) or value != int(value):
        raise ValueError(f"not an integer: {token!r}")
    return int(value)


def _parse_decimal(token):
    value = float(token)
    if not math.isfinite(value):
        raise ValueError(f"not a finite number: {token!r}")
    return value


def _parse_category(column, token):
    token = ALIASES.get(column, {}).get(token, token)
    if token not in CATEGORIES[column]:
        raise ValueError(f"unknown category {token!r}, expected one of {CATEGORIES[column]}")
    return token


def _parse_insee(token):
    # codes exported through a spreadsheet lose their leading zero
    if len(token) == 4 and token.isdigit():
        token = "0" + token
    if len(token) != 5:
        raise ValueError(f"INSEE code must have 5 characters: {token!r}")
    return token.upper()


def _read_rows(path):
    path = Path(path)
    try:
        handle = path.open(newline="", encoding="utf-8-sig")
    except OSError as exc:
        raise IngestError(f"cannot open {path}: {exc}") from exc
    with handle:
        reader = csv.reader(handle, delimiter=",", quotechar='"')
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path} is empty (no header row)") from None
        header = [h.strip() for h in header]
        rows = []
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise IngestError(
                    f"expected {len(header)} fields, found {len(row)}", line=reader.line_num
                )
            rows.append((reader.line_num, row))
    return header, rows


def _policy_row(record, line, separator):
    out = {}
    if "id_policy" not in record or not record["id_policy"].strip():
        if record.get("id_client", "").strip() and record.get("id_vehicle", "").strip():
            record = dict(record)
            record["id_policy"] = build_policy_id(record["id_client"], record["id_vehicle"], separator)
    drv2_token = record["drv_drv2"].strip()
    try:
        has_second = _parse_bool(drv2_token)
    except ValueError as exc:
        raise IngestError(str(exc), line, "drv_drv2") from None

    for column in POLICY_COLUMNS:
        token = record[column].strip()
        try:
            if not token or (column == "drv_sex2" and not has_second and token in {"0", "none"}):
                if column in OPTIONAL_COLUMNS:
                    out[column] = None
                elif column in SECOND_DRIVER_COLUMNS and not has_second:
                    out[column] = "none" if column == "drv_sex2" else 0
                else:
                    raise ValueError("empty cell")
            elif column in BOOLEAN_COLUMNS:
                out[column] = _parse_bool(token)
            elif column in INTEGER_COLUMNS:
                out[column] = _parse_int(token)
            elif column in DECIMAL_COLUMNS:
                out[column] = _parse_decimal(token)
            elif column in CATEGORIES:
                out[column] = _parse_category(column, token)
            elif column == "pol_insee_code":
                out[column] = _parse_insee(token)
            else:
                out[column] = token
        except ValueError as exc:
            raise IngestError(str(exc), line, column) from None

    lo, hi = BONUS_RANGE
    if not lo <= out["pol_bonus"] <= hi:
        raise IngestError(f"bonus-malus {out['pol_bonus']} outside [{lo}, {hi}]", line, "pol_bonus")
    return out


def _policy_frame(records):
    frame = pd.DataFrame.from_records(records, columns=POLICY_COLUMNS)
    for column in INTEGER_COLUMNS:
        dtype = "Int64" if column in OPTIONAL_COLUMNS else "int64"
        frame[column] = frame[column].astype(dtype)
    for column in DECIMAL_COLUMNS:
        frame[column] = frame[column].astype("float64")
    for column in BOOLEAN_COLUMNS:
        frame[column] = frame[column].astype(bool)
    for column in list(CATEGORIES) + list(STRING_COLUMNS):
        frame[column] = frame[column].astype(object)
    return frame


def parse_policy_csv(path, separator: str = "-", extra_columns: dict | None = None) -> pd.DataFrame:
    """Parse the policy table into a DataFrame with one row per policy.

    Columns follow the feature order of the pricing-game manual. Only
    ``vh_age`` may be missing (stored as ``<NA>``). Second-driver fields left
    blank on single-driver policies are encoded as 0 and ``"none"``.

    ``extra_columns`` maps additional column names to parsers; it is used to
    read back merged dumps that carry ``claim_nb``, ``claim_amount`` and
    ``label``. Any other extra columns (``id_client``, ``id_year``...) are
    ignored.

    Raises IngestError with the offending line and column.
    """
    header, rows = _read_rows(path)
    has_key = "id_policy" in header or {"id_client", "id_vehicle"} <= set(header)
    missing = [c for c in POLICY_COLUMNS if c not in header and not (c == "id_policy" and has_key)]
    extra_columns = extra_columns or {}
    missing += [c for c in extra_columns if c not in header]
    if missing:
        raise IngestError(f"{path}: missing columns {missing}", line=1)

    records, extras = [], {c: [] for c in extra_columns}
    seen = {}
    for line, row in rows:
        record = dict(zip(header, row))
        if "id_policy" not in record:
            record["id_policy"] = ""
        parsed = _policy_row(record, line, separator)
        key = parsed["id_policy"]
        if key in seen:
            raise IngestError(f"duplicate id_policy {key!r} (first seen on line {seen[key]})", line, "id_policy")
        seen[key] = line
        records.append(parsed)
        for column, parser in extra_columns.items():
            try:
                extras[column].append(parser(record[column].strip()))
            except ValueError as exc:
                raise IngestError(str(exc), line, column) from None

    frame = _policy_frame(records)
    for column, values in extras.items():
        frame[column] = values
    return frame


def parse_claim_csv(path) -> pd.DataFrame:
    """Parse the claim table.

    Requires ``id_client``, ``id_vehicle`` and ``claim_amount``. When a
    ``claim_nb`` column is present it is used as the count for the row,
    otherwise each row counts as one claim.
    """
    header, rows = _read_rows(path)
    missing = [c for c in ("id_client", "id_vehicle", "claim_amount") if c not in header]
    if missing:
        raise IngestError(f"{path}: missing columns {missing}", line=1)
    has_nb = "claim_nb" in header
    lo, hi = CLAIM_AMOUNT_RANGE

    clients, vehicles, counts, amounts = [], [], [], []
    for line, row in rows:
        record = dict(zip(header, row))
        for column in ("id_client", "id_vehicle"):
            if not record[column].strip():
                raise IngestError("empty cell", line, column)
        try:
            amount = _parse_decimal(record["claim_amount"].strip())
        except ValueError as exc:
            raise IngestError(str(exc), line, "claim_amount") from None
        if not lo <= amount <= hi:
            raise IngestError(f"claim amount {amount} outside [{lo}, {hi}]", line, "claim_amount")
        count = 1
        if has_nb:
            try:
                count = _parse_int(record["claim_nb"].strip())
            except ValueError as exc:
                raise IngestError(str(exc), line, "claim_nb") from None
            if count < 0:
                raise IngestError("negative claim count", line, "claim_nb")
        clients.append(record["id_client"].strip())
        vehicles.append(record["id_vehicle"].strip())
        counts.append(count)
        amounts.append(amount)

    return pd.DataFrame(
        {
            "id_client": pd.Series(clients, dtype=object),
            "id_vehicle": pd.Series(vehicles, dtype=object),
            "claim_nb": pd.Series(counts, dtype="int64"),
            "claim_amount": pd.Series(amounts, dtype="float64"),
        }
    )


def aggregate_claims(claims: pd.DataFrame, separator: str = "-") -> pd.DataFrame:
    """Total claim count and amount per policy key.

    Returns a frame indexed by ``id_policy`` (sorted) with ``claim_nb`` and
    ``claim_amount`` columns. Amounts are summed with ``math.fsum`` so the
    totals do not depend on row order.
    """
    if len(claims) == 0:
        empty = pd.DataFrame({"claim_nb": pd.Series(dtype="int64"), "claim_amount": pd.Series(dtype="float64")})
        empty.index.name = "id_policy"
        return empty
    keys = [build_policy_id(c, v, separator) for c, v in zip(claims["id_client"], claims["id_vehicle"])]
    grouped = claims.assign(id_policy=keys).groupby("id_policy", sort=True)
    out = pd.DataFrame(
        {
            "claim_nb": grouped["claim_nb"].sum().astype("int64"),
            "claim_amount": grouped["claim_amount"].agg(math.fsum).astype("float64"),
        }
    )
    return out


def merge(policies: pd.DataFrame, aggregates: pd.DataFrame) -> pd.DataFrame:
    """Left-join claim totals onto the policy table and derive the label.

    Policies without claims get ``claim_nb = 0`` and ``claim_amount = 0``.
    ``label`` is 1 exactly when ``claim_nb > 0``, so a policy whose claims net
    to a negative amount (subrogation) is still labelled 1.
    """
    orphans = set(aggregates.index) - set(policies["id_policy"])
    if orphans:
        raise OrphanClaimError(orphans)
    merged = policies.merge(
        aggregates, how="left", left_on="id_policy", right_index=True, validate="one_to_one"
    )
    merged["claim_nb"] = merged["claim_nb"].fillna(0).astype("int64")
    merged["claim_amount"] = merged["claim_amount"].fillna(0.0).astype("float64")
    merged["label"] = (merged["claim_nb"] > 0).astype("int64")
    return merged.reset_index(drop=True)


def impute_vh_age(dataset: pd.DataFrame, strategy: str = "median", external: tuple | None = None) -> pd.DataFrame:
    """Fill missing vehicle ages.

    strategy
        ``"external_value"`` sets the age of one policy from an outside
        source, ``external = (id_policy, age)``; ``"median"`` uses the median
        of the ages present, rounded to a whole year; ``"drop"`` removes the
        rows.
    """
    out = dataset.copy()
    missing = out["vh_age"].isna()
    if strategy == "external_value":
        if external is None:
            raise ValueError("external_value strategy needs an (id_policy, vh_age) pair")
        key, value = external
        hit = out["id_policy"] == key
        if not hit.any():
            raise KeyError(f"policy {key!r} not in dataset")
        out.loc[hit, "vh_age"] = int(value)
        if out["vh_age"].isna().any():
            left = out.loc[out["vh_age"].isna(), "id_policy"].tolist()
            raise ValueError(f"vh_age still missing after external fill: {left}")
    elif strategy == "median":
        if missing.any():
            present = out.loc[~missing, "vh_age"].astype("float64")
            if present.empty:
                raise ValueError("no vh_age values to take a median of")
            out.loc[missing, "vh_age"] = int(round(float(np.median(present))))
    elif strategy == "drop":
        out = out.loc[~missing].reset_index(drop=True)
    else:
        raise ValueError(f"unknown imputation strategy {strategy!r}")
    out["vh_age"] = out["vh_age"].astype("int64")
    return out


def claim_frequency_histogram(dataset: pd.DataFrame) -> dict[int, int]:
    """Number of policies for each observed claim count."""
    counts = dataset["claim_nb"].value_counts().sort_index()
    return {int(k): int(v) for k, v in counts.items()}


def label_balance(dataset: pd.DataFrame) -> dict[str, float]:
    n = len(dataset)
    positives = int(dataset["label"].sum())
    return {
        "rows": n,
        "with_claims": positives,
        "without_claims": n - positives,
        "share_with_claims": positives / n if n else float("nan"),
        "share_without_claims": (n - positives) / n if n else float("nan"),
    }


def _format_cell(value):
    if value is None or value is pd.NA:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "Yes" if value else "No"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_merged_csv(dataset: pd.DataFrame, path) -> None:
    """Dump the merged table: policy columns then claim_nb, claim_amount, label."""
    columns = POLICY_COLUMNS + LABEL_COLUMNS
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for row in dataset[columns].itertuples(index=False, name=None):
            writer.writerow([_format_cell(v) for v in row])


def read_merged_csv(path) -> pd.DataFrame:
    def label(token):
        value = _parse_int(token)
        if value not in (0, 1):
            raise ValueError(f"label must be 0 or 1: {token!r}")
        return value

    frame = parse_policy_csv(
        path, extra_columns={"claim_nb": _parse_int, "claim_amount": _parse_decimal, "label": label}
    )
    frame["claim_nb"] = frame["claim_nb"].astype("int64")
    frame["claim_amount"] = frame["claim_amount"].astype("float64")
    frame["label"] = frame["label"].astype("int64")
    if ((frame["claim_nb"] > 0).astype("int64") != frame["label"]).any():
        raise IngestError(f"{path}: label disagrees with claim_nb")
    return frame


def load_dataset(policy_path, claim_path, separator: str = "-") -> pd.DataFrame:
    """Parse both tables, aggregate the claims and merge."""
    policies = parse_policy_csv(policy_path, separator=separator)
    claims = parse_claim_csv(claim_path)
    return merge(policies, aggregate_claims(claims, separator=separator))
