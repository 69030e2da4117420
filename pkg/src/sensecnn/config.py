"""
Configuration models built on pydantic for validation and immutability.

Defaults reproduce the published training setup: region sizes 3, 4 and 5
with 100 feature maps each, dropout keep probability 0.5, l2 coefficient
1e-3, Adam at 1e-4, mini-batches of 50, 1001 steps for the CNN and 3001
for the bag-of-vectors network with 1024 hidden units.
"""

from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple
import json

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .diagnostics import FuzzyMatcher
from .exceptions import ConfigurationError


class EmbeddingMode(str, Enum):
    """Whether input vectors are frozen or updated by backpropagation."""
    STATIC = "static"
    TUNED = "tuned"


class EmbeddingKind(str, Enum):
    """Source of the input vectors."""
    PRETRAINED = "pretrained"
    RANDOM = "random"


class ModelKind(str, Enum):
    CNN = "cnn"
    MLP = "mlp"
    MAJORITY = "majority"
    RANDOM = "random"


class BalanceMode(str, Enum):
    NONE = "none"
    OVER = "over"
    UNDER = "under"


class RunMode(str, Enum):
    CV = "cv"
    TRAIN = "train"
    EVAL = "eval"
    WSD = "wsd"
    ANALYZE = "analyze"
    TUNE = "tune"


def check_region_sizes(v: Tuple[int, ...]) -> Tuple[int, ...]:
    """Non-empty, positive, distinct region sizes."""
    if not v:
        raise ValueError("region_sizes must not be empty")
    if any(n < 1 for n in v):
        raise ValueError(f"region sizes must be >= 1, got {list(v)}")
    if len(set(v)) != len(v):
        raise ValueError(f"region sizes must be distinct, got {list(v)}")
    return tuple(v)


class CnnConfig(BaseModel):
    """
    Architecture of the one-layer CNN.

    Example:
        >>> cfg = CnnConfig(dim=300, classes=3)
        >>> cfg.total_maps
        300
    """

    dim: int = Field(ge=1, description="Embedding dimension d")
    region_sizes: Tuple[int, ...] = Field(
        default=(3, 4, 5),
        description="Filter region sizes n"
    )
    maps_per_size: int = Field(default=100, ge=1, description="Feature maps per region size")
    classes: int = Field(ge=2, description="Number of output senses")
    dropout_keep: float = Field(default=0.5, gt=0.0, le=1.0)
    l2_lambda: float = Field(default=1e-3, ge=0.0)
    embedding_mode: EmbeddingMode = EmbeddingMode.STATIC

    model_config = ConfigDict(frozen=True)

    @field_validator('region_sizes')
    @classmethod
    def validate_region_sizes(cls, v: Tuple[int, ...]) -> Tuple[int, ...]:
        return check_region_sizes(v)

    @property
    def total_maps(self) -> int:
        return self.maps_per_size * len(self.region_sizes)

    @property
    def max_region(self) -> int:
        return max(self.region_sizes)


class MlpConfig(BaseModel):
    """One hidden layer over the sum of the sentence's word vectors."""

    dim: int = Field(ge=1)
    hidden: int = Field(default=1024, ge=1)
    classes: int = Field(ge=2)
    dropout_keep: float = Field(default=0.5, gt=0.0, le=1.0)
    l2_lambda: float = Field(default=1e-3, ge=0.0)
    embedding_mode: EmbeddingMode = EmbeddingMode.STATIC

    model_config = ConfigDict(frozen=True)


class AdamHyper(BaseModel):
    """Adam step size and moment decay rates."""

    lr: float = Field(default=1e-4, gt=0.0)
    beta1: float = Field(default=0.9, gt=0.0, lt=1.0)
    beta2: float = Field(default=0.999, gt=0.0, lt=1.0)
    eps: float = Field(default=1e-8, gt=0.0)

    model_config = ConfigDict(frozen=True)


class TrainConfig(BaseModel):
    """Mini-batch training loop settings."""

    iterations: int = Field(default=1001, ge=1, description="Mini-batch gradient steps")
    batch_size: int = Field(default=50, ge=1)
    seed: int = Field(default=0, ge=0)
    dropout_keep: float = Field(default=0.5, gt=0.0, le=1.0)
    l2_lambda: float = Field(default=1e-3, ge=0.0)
    embedding_mode: EmbeddingMode = EmbeddingMode.STATIC
    adam: AdamHyper = Field(default_factory=AdamHyper)
    log_every: int = Field(default=100, ge=1)
    progress: bool = False

    model_config = ConfigDict(frozen=True)


DEFAULT_ITERATIONS = {ModelKind.CNN: 1001, ModelKind.MLP: 3001}

WSD_REGION_CANDIDATES: Tuple[Tuple[int, ...], ...] = (
    (1, 2, 3), (2, 3, 4), (3, 4, 5), (4, 5, 6), (5, 6, 7),
)


class ExperimentSpec(BaseModel):
    """
    Flat description of one experiment run.

    Every field can be given as a top-level ``key = value`` line of a
    TOML config file and overridden by a CLI flag.

    Corpus blending: folds are built over ``fold_source``; every corpus in
    ``always_in_train`` is appended to each training fold.

    Example:
        >>> spec = ExperimentSpec(fold_source='mpqa.jsonl', embedding_kind='random', random_bound=0.25)
        >>> spec.train_config(ModelKind.CNN).iterations
        1001
    """

    mode: RunMode = RunMode.CV
    model: ModelKind = ModelKind.CNN
    compare_with: List[ModelKind] = Field(
        default_factory=list,
        description="Baseline kinds trained on the same folds for McNemar tests"
    )
    seed: int = Field(default=0, ge=0)
    out_dir: Path = Path("runs/latest")

    # corpora
    fold_source: Optional[Path] = None
    always_in_train: List[Path] = Field(default_factory=list)
    test_corpus: Optional[Path] = None
    lexical_sample_dir: Optional[Path] = None
    checkpoint: Optional[Path] = None
    group_by_target: bool = True
    train_fold: Optional[int] = Field(default=None, ge=0)

    # protocol
    folds: int = Field(default=5, ge=2)
    balance: BalanceMode = BalanceMode.NONE

    # embeddings
    embeddings: Optional[Path] = None
    embedding_dim: int = Field(default=300, ge=1)
    embedding_kind: EmbeddingKind = EmbeddingKind.PRETRAINED
    embedding_mode: EmbeddingMode = EmbeddingMode.STATIC
    random_bound: Optional[float] = Field(default=None, ge=0.0)

    # architecture
    region_sizes: Tuple[int, ...] = (3, 4, 5)
    maps_per_size: int = Field(default=100, ge=1)
    hidden: int = Field(default=1024, ge=1)
    dropout_keep: float = Field(default=0.5, gt=0.0, le=1.0)
    l2_lambda: float = Field(default=1e-3, ge=0.0)

    # training
    iterations: Optional[int] = Field(default=None, ge=1, description="Defaults per model kind")
    batch_size: Optional[int] = Field(default=None, ge=1, description="50, or 10 in wsd mode")
    learning_rate: float = Field(default=1e-4, gt=0.0)
    log_every: int = Field(default=100, ge=1)
    progress: bool = False

    # wsd / tuning
    tune_regions: bool = False
    region_candidates: List[Tuple[int, ...]] = Field(
        default_factory=lambda: [tuple(c) for c in WSD_REGION_CANDIDATES]
    )
    validation_fraction: float = Field(default=0.2, gt=0.0, lt=1.0)

    # analysis
    top_k: int = Field(default=15, ge=1)

    workers: int = Field(default=4, ge=1, description="Parallel per-verb jobs")

    model_config = ConfigDict(frozen=True, extra='forbid')

    @field_validator('region_sizes')
    @classmethod
    def validate_region_sizes(cls, v: Tuple[int, ...]) -> Tuple[int, ...]:
        return check_region_sizes(v)

    @model_validator(mode='after')
    def validate_embeddings(self) -> "ExperimentSpec":
        if self.needs_embeddings:
            if self.embedding_kind is EmbeddingKind.PRETRAINED and self.embeddings is None:
                raise ValueError(
                    "pretrained embeddings need an 'embeddings' path; "
                    "set embedding_kind = \"random\" for the random-vector condition"
                )
            if self.embedding_kind is EmbeddingKind.RANDOM and self.embeddings is None \
                    and self.random_bound is None:
                raise ValueError(
                    "random embeddings need 'random_bound' or an 'embeddings' file "
                    "whose variance sets the bound"
                )
        return self

    @property
    def needs_embeddings(self) -> bool:
        """Whether a neural model is trained in this run (checkpointed runs carry their table)."""
        if self.mode in (RunMode.EVAL, RunMode.ANALYZE) and self.checkpoint is not None:
            return False
        neural = {ModelKind.CNN, ModelKind.MLP}
        return self.model in neural or any(k in neural for k in self.compare_with)

    def train_config(self, kind: ModelKind, seed: Optional[int] = None) -> TrainConfig:
        """Training loop settings for one model kind."""
        if self.batch_size is not None:
            batch_size = self.batch_size
        else:
            batch_size = 10 if self.mode is RunMode.WSD else 50
        return TrainConfig(
            iterations=self.iterations or DEFAULT_ITERATIONS.get(kind, 1001),
            batch_size=batch_size,
            seed=self.seed if seed is None else seed,
            dropout_keep=self.dropout_keep,
            l2_lambda=self.l2_lambda,
            embedding_mode=self.embedding_mode,
            adam=AdamHyper(lr=self.learning_rate),
            log_every=self.log_every,
            progress=self.progress,
        )

    def cnn_config(self, dim: int, classes: int,
                   region_sizes: Optional[Tuple[int, ...]] = None) -> CnnConfig:
        return CnnConfig(
            dim=dim,
            region_sizes=region_sizes or self.region_sizes,
            maps_per_size=self.maps_per_size,
            classes=classes,
            dropout_keep=self.dropout_keep,
            l2_lambda=self.l2_lambda,
            embedding_mode=self.embedding_mode,
        )

    def mlp_config(self, dim: int, classes: int) -> MlpConfig:
        return MlpConfig(
            dim=dim,
            hidden=self.hidden,
            classes=classes,
            dropout_keep=self.dropout_keep,
            l2_lambda=self.l2_lambda,
            embedding_mode=self.embedding_mode,
        )

    def with_overrides(self, **overrides: Any) -> "ExperimentSpec":
        """New spec with ``overrides`` applied (None values are ignored)."""
        merged = self.model_dump()
        merged.update({k: v for k, v in overrides.items() if v is not None})
        return build_spec(merged)


def build_spec(values: Mapping[str, Any]) -> ExperimentSpec:
    """
    Validate a flat mapping into an ExperimentSpec.

    Raises:
        ConfigurationError: With "did you mean" hints for unknown keys
    """
    known = list(ExperimentSpec.model_fields)
    unknown = [k for k in values if k not in ExperimentSpec.model_fields]
    if unknown:
        hints = {k: FuzzyMatcher.suggestion_names(k, known, n=1) for k in unknown}
        details = ", ".join(
            f"'{k}'" + (f" (did you mean '{hints[k][0]}'?)" if hints[k] else "")
            for k in unknown
        )
        raise ConfigurationError(f"Unknown configuration keys: {details}")

    try:
        return ExperimentSpec(**values)
    except ValidationError as e:
        problems = {".".join(str(p) for p in err['loc']) or "spec": err['msg'] for err in e.errors()}
        raise ConfigurationError("Invalid experiment configuration", problems) from e


def load_spec(path: Path, overrides: Optional[Dict[str, Any]] = None) -> ExperimentSpec:
    """
    Read a TOML config file or a run manifest, then apply CLI overrides.

    Relative corpus and embedding paths in a TOML file resolve against the
    file's directory.

    Raises:
        ConfigurationError: If the file is missing, unparsable or invalid
    """
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"Config file not found: {path}")

    try:
        if path.suffix == '.json':
            with open(path, encoding='utf-8') as f:
                document = json.load(f)
            values = document.get('spec', document)
        else:
            with open(path, 'rb') as f:
                values = tomllib.load(f)
            values = _resolve_paths(values, path.parent)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as e:
        raise ConfigurationError(f"Could not parse config file: {e}", {"path": str(path)}) from e

    values = dict(values)
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return build_spec(values)


_PATH_KEYS = ('fold_source', 'test_corpus', 'lexical_sample_dir', 'checkpoint', 'embeddings', 'out_dir')


def _resolve_paths(values: Dict[str, Any], base: Path) -> Dict[str, Any]:
    resolved = dict(values)
    for key in _PATH_KEYS:
        if isinstance(resolved.get(key), str) and not Path(resolved[key]).is_absolute():
            resolved[key] = str(base / resolved[key])
    if isinstance(resolved.get('always_in_train'), list):
        resolved['always_in_train'] = [
            p if Path(p).is_absolute() else str(base / p) for p in resolved['always_in_train']
        ]
    return resolved
