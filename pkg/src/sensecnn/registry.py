"""
Model-kind registry.

Each kind maps to a fitter that turns a training dataset into a predictor
with ``predict_labels(dataset)``. The harness resolves kinds through the
registry so a typo in a config file fails early with suggestions.
"""

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Protocol, Tuple
import logging

from .cnn import CnnModel
from .config import ExperimentSpec, ModelKind
from .dataset import Dataset, RandomClassifier, majority_baseline
from .diagnostics import FuzzyMatcher
from .embeddings import EmbeddingTable
from .exceptions import ConfigurationError, UnknownModelError
from .mlp import MlpModel
from .numerics import SeededRng
from .optim import train

logger = logging.getLogger(__name__)


class Predictor(Protocol):
    def predict_labels(self, ds: Dataset) -> List[str]: ...


@dataclass(frozen=True)
class FitRequest:
    """Everything a fitter may use; ``table`` is owned by the job."""
    train: Dataset
    spec: ExperimentSpec
    seed: int
    table: Optional[EmbeddingTable] = None
    region_sizes: Optional[Tuple[int, ...]] = None


Fitter = Callable[[FitRequest], Predictor]


@dataclass(frozen=True)
class ModelEntry:
    kind: str
    fitter: Fitter
    neural: bool
    description: str = ""


class ModelRegistry:
    """
    Registry of model kinds.

    Example:
        >>> registry = default_registry()
        >>> registry.get('cnn').neural
        True
    """

    def __init__(self):
        self._entries: Dict[str, ModelEntry] = {}

    def register(self, kind: str, fitter: Fitter, neural: bool, description: str = "") -> None:
        """
        Add a model kind.

        Raises:
            ConfigurationError: If ``kind`` is already registered
        """
        if kind in self._entries:
            raise ConfigurationError(f"Model kind '{kind}' is already registered")
        self._entries[kind] = ModelEntry(kind, fitter, neural, description)

    def get(self, kind) -> ModelEntry:
        """
        Look up a kind (a string or a ModelKind).

        Raises:
            UnknownModelError: With close matches for misspelled kinds
        """
        name = kind.value if isinstance(kind, ModelKind) else str(kind)
        if name not in self._entries:
            available = self.kinds()
            raise UnknownModelError(
                name,
                suggestions=FuzzyMatcher.suggestion_names(name, available),
                available=available,
            )
        return self._entries[name]

    def kinds(self) -> List[str]:
        return sorted(self._entries)

    def __contains__(self, kind) -> bool:
        name = kind.value if isinstance(kind, ModelKind) else str(kind)
        return name in self._entries

    def fit(self, kind, request: FitRequest) -> Predictor:
        return self.get(kind).fitter(request)


def _single_class_fallback(request: FitRequest, kind: str) -> Optional[Predictor]:
    present = [label for label, c in request.train.label_counts().items() if c > 0]
    if len(present) < 2:
        logger.warning(
            "%s: training data has a single sense (%s); predicting it for every instance",
            kind, ", ".join(present),
        )
        return majority_baseline(request.train)[1]
    return None


def _require_table(request: FitRequest, kind: str) -> EmbeddingTable:
    if request.table is None:
        raise ConfigurationError(f"model kind '{kind}' needs an embedding table")
    return request.table


def fit_cnn(request: FitRequest) -> Predictor:
    fallback = _single_class_fallback(request, "cnn")
    if fallback is not None:
        return fallback
    table = _require_table(request, "cnn")
    spec = request.spec
    cfg = spec.cnn_config(table.dim, len(request.train.label_set), request.region_sizes)
    model = CnnModel.create(cfg, SeededRng(request.seed).spawn("init"))
    return train(model, request.train, table, spec.train_config(ModelKind.CNN, seed=request.seed))


def fit_mlp(request: FitRequest) -> Predictor:
    fallback = _single_class_fallback(request, "mlp")
    if fallback is not None:
        return fallback
    table = _require_table(request, "mlp")
    spec = request.spec
    cfg = spec.mlp_config(table.dim, len(request.train.label_set))
    model = MlpModel.create(cfg, SeededRng(request.seed).spawn("init"))
    return train(model, request.train, table, spec.train_config(ModelKind.MLP, seed=request.seed))


def fit_majority(request: FitRequest) -> Predictor:
    return majority_baseline(request.train)[1]


def fit_random(request: FitRequest) -> Predictor:
    present = [label for label, c in request.train.label_counts().items() if c > 0]
    return RandomClassifier(present, request.seed)


def default_registry() -> ModelRegistry:
    registry = ModelRegistry()
    registry.register("cnn", fit_cnn, neural=True, description="one-layer CNN with max-over-time pooling")
    registry.register("mlp", fit_mlp, neural=True, description="sum-of-vectors feed-forward baseline")
    registry.register("majority", fit_majority, neural=False, description="most frequent training sense")
    registry.register("random", fit_random, neural=False, description="uniform random sense")
    return registry
