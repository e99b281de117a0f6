"""Experiment configuration: dataclasses plus a sectioned TOML loader.

File layout (every section optional, every key optional)::

    [experiment]   dataset, seed, train_ratio, max_terms, hidden_dim
    [stage1]       algorithm, features, clusters, text_fraction
    [stage2]       enabled, algorithm, features, clusters, text_fraction
    [embedding]    provider, path, dim
    [clustering]   sib_max_sweeps, sib_tol, kmeans_max_iter, kmeans_tol
    [finetune]     n_labels, stratified
    [train]        epochs, batch_size, learning_rate, optimizer
    [eval]         cluster_sweep, fraction_sweep, stage1_fraction_sweep, label_budgets
    [synthetic]    PlantedSpec fields; used when experiment.dataset is unset

Command-line flags override file values, which override these defaults.
"""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from .errors import ValidationError
from .model import TrainConfig
from .synth import PlantedSpec

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

ALGORITHMS = ("sib", "kmeans")
FEATURES = ("tfidf", "embedding")
PROVIDERS = ("projection", "file")


@dataclass(frozen=True)
class StageConfig:
    algorithm: str = "sib"
    features: str = "tfidf"
    clusters: int = 20
    text_fraction: float = 1.0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValidationError(f"unknown algorithm {self.algorithm!r}")
        if self.features not in FEATURES:
            raise ValidationError(f"unknown features {self.features!r}")
        if self.algorithm == "sib" and self.features != "tfidf":
            raise ValidationError("sib clusters term distributions; it needs features = 'tfidf'")
        if self.clusters < 2:
            raise ValidationError(f"clusters must be >= 2, got {self.clusters}")
        if not 0.0 < self.text_fraction <= 1.0:
            raise ValidationError(f"text_fraction must lie in (0, 1], got {self.text_fraction}")


def default_stage2() -> StageConfig:
    return StageConfig("kmeans", "embedding", 20, 0.05)


@dataclass(frozen=True)
class EmbeddingConfig:
    provider: str = "projection"
    path: str | None = None
    dim: int = 384

    def __post_init__(self):
        if self.provider not in PROVIDERS:
            raise ValidationError(f"unknown embedding provider {self.provider!r}")
        if self.provider == "file" and not self.path:
            raise ValidationError("embedding.provider = 'file' requires embedding.path")
        if self.dim < 2:
            raise ValidationError("embedding.dim must be >= 2")


@dataclass(frozen=True)
class ClusteringConfig:
    sib_max_sweeps: int = 15
    sib_tol: float = 0.02
    kmeans_max_iter: int = 300
    kmeans_tol: float = 1e-6

    def __post_init__(self):
        if self.sib_max_sweeps < 1 or self.kmeans_max_iter < 1:
            raise ValidationError("iteration caps must be >= 1")
        if self.sib_tol < 0 or self.kmeans_tol < 0:
            raise ValidationError("tolerances must be >= 0")


@dataclass(frozen=True)
class FinetuneConfig:
    n_labels: int = 64
    stratified: bool = False

    def __post_init__(self):
        if self.n_labels < 1:
            raise ValidationError("finetune.n_labels must be >= 1")


@dataclass(frozen=True)
class EvalConfig:
    cluster_sweep: tuple[int, ...] = (10, 20, 30, 50, 70, 80, 100)
    fraction_sweep: tuple[float, ...] = (0.05, 0.10, 0.20)
    stage1_fraction_sweep: tuple[float, ...] = (1.0, 0.8, 0.7, 0.5)
    label_budgets: tuple[float | int, ...] = (64, 0.05, 0.10, 0.20, 0.50)

    def __post_init__(self):
        for name in ("cluster_sweep", "fraction_sweep", "stage1_fraction_sweep", "label_budgets"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if any(c < 2 for c in self.cluster_sweep):
            raise ValidationError("cluster_sweep values must be >= 2")
        if any(not 0 < f <= 1 for f in self.fraction_sweep + self.stage1_fraction_sweep):
            raise ValidationError("fractions must lie in (0, 1]")
        for b in self.label_budgets:
            parse_budget(b)


def parse_budget(value) -> int | float:
    """Integers (or integral strings) are counts; floats in (0, 1] or 'N%' are fractions."""
    if isinstance(value, str):
        v = value.strip()
        try:
            if v.endswith("%"):
                value = float(v[:-1]) / 100.0
            elif v.isdigit():
                value = int(v)
            else:
                value = float(v)
        except ValueError:
            raise ValidationError(f"invalid label budget {v!r}") from None
    if isinstance(value, bool):
        raise ValidationError(f"invalid label budget {value!r}")
    if isinstance(value, int):
        if value < 1:
            raise ValidationError(f"label budget must be >= 1, got {value}")
        return value
    if isinstance(value, float):
        if not 0.0 < value <= 1.0:
            raise ValidationError(f"fractional label budget must lie in (0, 1], got {value}")
        return value
    raise ValidationError(f"invalid label budget {value!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str | None = None
    seed: int = 0
    train_ratio: float = 0.8
    max_terms: int = 10_000
    hidden_dim: int = 128
    stage1: StageConfig = field(default_factory=StageConfig)
    stage2: StageConfig | None = field(default_factory=default_stage2)
    embedding: EmbeddingConfig = field(default_factory=EmbeddingConfig)
    clustering: ClusteringConfig = field(default_factory=ClusteringConfig)
    finetune: FinetuneConfig = field(default_factory=FinetuneConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    synthetic: PlantedSpec = field(default_factory=PlantedSpec)

    def __post_init__(self):
        if not 0.0 < self.train_ratio < 1.0:
            raise ValidationError("train_ratio must lie in (0, 1)")
        if self.max_terms < 1 or self.hidden_dim < 1:
            raise ValidationError("max_terms and hidden_dim must be positive")

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        for key in ("cluster_sweep", "fraction_sweep", "stage1_fraction_sweep", "label_budgets"):
            d["eval"][key] = list(d["eval"][key])
        return d

    def with_overrides(self, **kwargs) -> "ExperimentConfig":
        return replace(self, **kwargs)


_SECTIONS = {
    "stage1": StageConfig,
    "embedding": EmbeddingConfig,
    "clustering": ClusteringConfig,
    "finetune": FinetuneConfig,
    "train": TrainConfig,
    "eval": EvalConfig,
    "synthetic": PlantedSpec,
}
_EXPERIMENT_KEYS = {"dataset", "seed", "train_ratio", "max_terms", "hidden_dim"}


def _build(cls, values: dict, section: str):
    known = {f.name for f in fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ValidationError(f"unknown keys in [{section}]: {', '.join(sorted(unknown))}")
    try:
        return cls(**values)
    except TypeError as exc:
        raise ValidationError(f"[{section}]: {exc}") from None


def config_from_dict(data: dict[str, Any]) -> ExperimentConfig:
    data = dict(data)
    allowed = set(_SECTIONS) | {"experiment", "stage2"} | _EXPERIMENT_KEYS
    unknown = set(data) - allowed
    if unknown:
        raise ValidationError(f"unknown config sections: {', '.join(sorted(unknown))}")
    top = {k: data.pop(k) for k in list(data) if k in _EXPERIMENT_KEYS}
    exp = dict(data.pop("experiment", {}) or {})
    bad = set(exp) - _EXPERIMENT_KEYS
    if bad:
        raise ValidationError(f"unknown keys in [experiment]: {', '.join(sorted(bad))}")
    top.update(exp)

    kwargs: dict[str, Any] = dict(top)
    for name, cls in _SECTIONS.items():
        if name in data and data[name] is not None:
            kwargs[name] = _build(cls, dict(data[name]), name)
    if "stage2" in data:
        s2 = data["stage2"]
        if s2 is None:
            kwargs["stage2"] = None
        else:
            s2 = dict(s2)
            if not s2.pop("enabled", True):
                kwargs["stage2"] = None
            else:
                base = asdict(default_stage2())
                base.update(s2)
                kwargs["stage2"] = _build(StageConfig, base, "stage2")
    try:
        return ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise ValidationError(str(exc)) from None


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from None
    return config_from_dict(data)
