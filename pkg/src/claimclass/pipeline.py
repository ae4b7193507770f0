"""Glue between a merged dataset and train/test design matrices.

By default the scaler is fit on the full matrix before splitting. ``fit_on_train=True`` fits it on the training rows
only.
"""
from __future__ import annotations

from dataclasses import dataclass

import pandas as pd

from . import ingest
from .preprocess import (
    EncodedMatrix,
    FeatureSchema,
    ScalingParams,
    SplitIndices,
    apply_scaling,
    fit_scaling,
    one_hot_encode,
    subsample,
    train_test_split,
)


@dataclass
class Prepared:
    train: EncodedMatrix
    test: EncodedMatrix
    schema: FeatureSchema
    scaling: ScalingParams
    split: SplitIndices


def impute(dataset: pd.DataFrame, strategy: str = "median", external=None) -> pd.DataFrame:
    if strategy == "external_value" and external is not None:
        external = (str(external[0]), int(external[1]))
    return ingest.impute_vh_age(dataset, strategy, external)


def prepare(
    dataset: pd.DataFrame,
    categorical=None,
    numeric=None,
    scaling: str = "zscore",
    fit_on_train: bool = False,
    test_fraction: float = 0.25,
    seed: int = 0,
    subsample_size: int | None = None,
    schema: FeatureSchema | None = None,
    scaling_params: ScalingParams | None = None,
) -> Prepared:
    """Encode, split and scale. ``subsample_size`` caps the training rows.

    Passing a frozen ``schema`` and ``scaling_params`` (from a saved model)
    reproduces the exact encoding the model was trained on.
    """
    encoded = one_hot_encode(dataset, categorical, numeric, schema=schema)
    split = train_test_split(len(encoded), test_fraction, seed)
    train_rows = split.train
    if subsample_size is not None:
        train_rows = subsample(train_rows, int(subsample_size), seed)
    if scaling_params is None:
        basis = encoded.take(split.train) if fit_on_train else encoded
        scaling_params = fit_scaling(basis, scaling)
    scaled = apply_scaling(encoded, scaling_params)
    return Prepared(scaled.take(train_rows), scaled.take(split.test), encoded.schema, scaling_params, split)
