"""Application config: one YAML (or JSON) file with a section per stage.

Example::

    seed: 7
    cascade: {p: 0.2}
    backtrans: {lang_rich: en, lang_limit: ja, rich_rate: 0.05, limit_rate: 0.25}
    sce: {mu: 0.1, beta: 1.0, clamp: -4.0}
    train: {epochs: 30, batch_size: 32, learning_rate: 2.0, lr_decay: 0.05, oversample: true}
    pretrain: {epochs: 100, learning_rate: 6.0}
    fusion: {coarse_threshold: 0.5, fine_threshold: 0.5, fine_requires_coarse: true}
    metrics: {classify: {Acc: 1, F1: 1, QWK: 1}}
    categories: {Misorder: Coll}
    features: {dim: 262144, mode: nsp, aggregation: mean}

Command-line flags override file values.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .backtranslation import BacktransConfig
from .errors import ConfigError, IoError, ValidationError
from .fusion import FusionConfig
from .injection import CascadeConfig, default_categories
from .metrics import DEFAULT_WEIGHTS
from .model import DEFAULT_DIM, SCEConfig, TrainConfig
from .nsp import GranularityMode
from .types import DEFAULT_CATEGORY_MAP, CategoryMap


@dataclass
class FeatureConfig:
    dim: int = DEFAULT_DIM
    mode: str = "nsp"
    aggregation: str = "mean"

    def __post_init__(self):
        self.mode = GranularityMode.parse(self.mode).value
        if self.aggregation not in ("mean", "vote"):
            raise ConfigError(f"aggregation must be 'mean' or 'vote', got {self.aggregation!r}")


@dataclass
class PretrainConfig:
    """Schedule for the pre-training phase on the back-translated corpus."""

    epochs: int = 100
    learning_rate: float = 6.0

    def __post_init__(self):
        if self.epochs < 1 or not self.learning_rate > 0:
            raise ConfigError("pretrain needs epochs >= 1 and a positive learning rate")


@dataclass
class AppConfig:
    seed: int = 0
    cascade: dict = field(default_factory=dict)
    backtrans: BacktransConfig = field(default_factory=BacktransConfig)
    sce: SCEConfig = field(default_factory=SCEConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    pretrain: PretrainConfig = field(default_factory=PretrainConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    metrics: dict = field(default_factory=lambda: {k: dict(v) for k, v in DEFAULT_WEIGHTS.items()})
    categories: dict = field(default_factory=dict)

    @property
    def category_map(self) -> CategoryMap:
        return DEFAULT_CATEGORY_MAP.with_overrides(self.categories)

    def cascade_config(self, **overrides) -> CascadeConfig:
        raw = {**self.cascade, **{k: v for k, v in overrides.items() if v is not None}}
        raw.setdefault("seed", self.seed)
        weights = raw.pop("category_weights", None)
        if weights is not None:
            by_name = {c.name: c for c in default_categories(self.category_map)}
            unknown = set(weights) - set(by_name)
            if unknown:
                raise ConfigError(f"unknown categories in cascade.category_weights: {sorted(unknown)}")
            raw["category_weights"] = {by_name[k]: float(v) for k, v in weights.items()}
        else:
            raw["category_weights"] = {c: 1.0 for c in default_categories(self.category_map)}
        return _build(CascadeConfig, raw, "cascade")

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            out[f.name] = dataclasses.asdict(v) if dataclasses.is_dataclass(v) else v
        return out


_SECTIONS = {
    "backtrans": BacktransConfig,
    "sce": SCEConfig,
    "train": TrainConfig,
    "pretrain": PretrainConfig,
    "fusion": FusionConfig,
    "features": FeatureConfig,
}


def _build(cls, raw, section):
    if not isinstance(raw, dict):
        raise ConfigError(f"section {section!r} must be a mapping")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - names
    if unknown:
        raise ConfigError(f"unknown keys in {section!r}: {sorted(unknown)}")
    try:
        return cls(**raw)
    except (TypeError, ValidationError) as exc:
        raise ConfigError(f"bad value in {section!r}: {exc}") from None


def load_config(path=None, overrides: dict | None = None) -> AppConfig:
    """Read ``path`` (if any) and apply ``overrides`` of the form ``{section: {key: value}}``.

    ``None`` override values are ignored, so unset CLI flags fall through.
    """
    raw: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise IoError(f"cannot read config {path}: {exc}") from exc
        try:
            raw = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config file must contain a mapping")
    for section, values in (overrides or {}).items():
        values = {k: v for k, v in values.items() if v is not None} if isinstance(values, dict) else values
        if isinstance(values, dict):
            raw.setdefault(section, {})
            raw[section] = {**(raw[section] or {}), **values}
        elif values is not None:
            raw[section] = values

    allowed = {f.name for f in dataclasses.fields(AppConfig)}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a non-negative integer")
    kwargs = {"seed": seed}
    for name, cls in _SECTIONS.items():
        section = raw.get(name) or {}
        if not isinstance(section, dict):
            raise ConfigError(f"section {name!r} must be a mapping")
        section = dict(section)
        if name == "train":
            section.setdefault("seed", seed)
        kwargs[name] = _build(cls, section, name)
    for name in ("cascade", "metrics", "categories"):
        if not isinstance(raw.get(name) or {}, dict):
            raise ConfigError(f"section {name!r} must be a mapping")
    kwargs["cascade"] = dict(raw.get("cascade") or {})
    metrics = {k: dict(v) for k, v in DEFAULT_WEIGHTS.items()}
    metrics.update(raw.get("metrics") or {})
    kwargs["metrics"] = metrics
    kwargs["categories"] = dict(raw.get("categories") or {})
    cfg = AppConfig(**kwargs)
    cfg.cascade_config()  # validate eagerly
    return cfg
