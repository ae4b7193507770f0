"""Run configuration: a YAML (or JSON) file, validated into dataclasses.

Unknown keys anywhere in the file are rejected.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .explore.stats import CONTINUOUS_FEATURES, DEFAULT_BINS, DEFAULT_LEVEL_FEATURES
from .preprocess import DEFAULT_CATEGORICAL, DEFAULT_NUMERIC


class ConfigError(ValueError):
    pass


@dataclass
class Paths:
    policy_csv: str | None = None
    claim_csv: str | None = None
    geojson: str | None = None
    output_dir: str = "out"


@dataclass
class IngestOptions:
    id_separator: str = "-"
    impute: str = "median"
    impute_external: list | None = None  # [id_policy, vh_age]


@dataclass
class PreprocessOptions:
    categorical: list = field(default_factory=lambda: list(DEFAULT_CATEGORICAL))
    numeric: list = field(default_factory=lambda: list(DEFAULT_NUMERIC))
    scaling: str = "zscore"
    fit_on_train: bool = False
    test_fraction: float = 0.25
    seed: int = 0
    subsample: int | None = None


@dataclass
class KnnOptions:
    k: int = 20
    order: float | str = 2.0  # a Minkowski order, or "chebyshev"
    weighting: str = "inverse_distance"


@dataclass
class LogregOptions:
    penalty: str = "ridge"
    C: float | None = 1.0
    lam: float | None = None
    mix: float = 0.5
    max_iterations: int = 5000
    tolerance: float = 1e-8
    threshold: float = 0.5


@dataclass
class ModelOptions:
    knn: KnnOptions = field(default_factory=KnnOptions)
    logreg: LogregOptions = field(default_factory=LogregOptions)


@dataclass
class EvaluationOptions:
    positive_class: str = "no-claims"


@dataclass
class ExplorationOptions:
    features: list = field(default_factory=lambda: list(DEFAULT_LEVEL_FEATURES))
    bins: dict = field(default_factory=lambda: {**DEFAULT_BINS, "pol_bonus": "levels"})
    heatmap_columns: list = field(default_factory=lambda: list(CONTINUOUS_FEATURES))
    code_property: str = "code"
    interval: str = "wald"
    count: str = "policies"


@dataclass
class RunConfig:
    paths: Paths = field(default_factory=Paths)
    ingest: IngestOptions = field(default_factory=IngestOptions)
    preprocess: PreprocessOptions = field(default_factory=PreprocessOptions)
    model: ModelOptions = field(default_factory=ModelOptions)
    evaluation: EvaluationOptions = field(default_factory=EvaluationOptions)
    exploration: ExplorationOptions = field(default_factory=ExplorationOptions)
    threads: int = 1

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @property
    def output_dir(self) -> Path:
        return Path(self.paths.output_dir)


def _build(cls, data, where):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'}: expected a mapping")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"{where or 'config'}: unknown keys {unknown}")
    kwargs = {}
    for name, value in data.items():
        sub = known[name].default_factory if known[name].default_factory is not dataclasses.MISSING else None
        if sub is not None and dataclasses.is_dataclass(sub):
            kwargs[name] = _build(sub, value, f"{where}.{name}" if where else name)
        else:
            kwargs[name] = value
    return cls(**kwargs)


def _validate(cfg: RunConfig):
    p = cfg.preprocess
    if not 0 < float(p.test_fraction) < 1:
        raise ConfigError("preprocess.test_fraction must lie in (0, 1)")
    if p.scaling not in ("zscore", "minmax"):
        raise ConfigError("preprocess.scaling must be zscore or minmax")
    if p.subsample is not None and int(p.subsample) < 1:
        raise ConfigError("preprocess.subsample must be positive")
    if cfg.ingest.impute not in ("median", "drop", "external_value"):
        raise ConfigError("ingest.impute must be median, drop or external_value")
    if cfg.ingest.impute == "external_value" and not cfg.ingest.impute_external:
        raise ConfigError("ingest.impute_external = [id_policy, vh_age] is required for external_value")
    if cfg.evaluation.positive_class not in ("claims", "no-claims"):
        raise ConfigError("evaluation.positive_class must be claims or no-claims")
    if cfg.model.knn.weighting not in ("uniform", "inverse_distance"):
        raise ConfigError("model.knn.weighting must be uniform or inverse_distance")
    if int(cfg.threads) < 1:
        raise ConfigError("threads must be >= 1")
    lr = cfg.model.logreg
    if lr.C is None and lr.lam is None:
        raise ConfigError("model.logreg needs C or lam")
    if lr.C is not None and float(lr.C) <= 0:
        raise ConfigError("model.logreg.C must be positive")
    if not 0 < float(lr.threshold) < 1:
        raise ConfigError("model.logreg.threshold must lie in (0, 1)")


def load_config(path=None) -> RunConfig:
    """Read a config file; with no path, return the defaults."""
    if path is None:
        cfg = RunConfig()
    else:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        cfg = _build(RunConfig, data, "")
        lr = (data.get("model") or {}).get("logreg") or {}
        if "lam" in lr and "C" in lr:
            raise ConfigError("give either model.logreg.C or model.logreg.lam, not both")
        if "lam" in lr:
            cfg.model.logreg.C = None
    _validate(cfg)
    return cfg
