"""
sensecnn

One-layer convolutional sentence classifiers for modal sense
classification and lexical-sample word sense disambiguation.

Features:
- Text embedding files with lazily initialized, cached OOV vectors
- CNN with max-over-time pooling and a sum-of-vectors MLP baseline
- Static or fine-tuned embeddings, Adam with sparse embedding updates
- Stratified cross validation, train/eval with checkpoints, WSD runs
- Majority and random baselines with mid-p McNemar significance
- Feature-detector analysis: top sentences and n-grams per filter

Example:
    >>> from sensecnn import build_spec, run_experiment
    >>>
    >>> spec = build_spec({
    ...     'mode': 'cv',
    ...     'fold_source': 'data/modals.jsonl',
    ...     'embeddings': 'vectors/glove.300d.txt',
    ...     'compare_with': ['majority'],
    ... })
    >>> run = run_experiment(spec)  # doctest: +SKIP
    >>> run.micro  # doctest: +SKIP
"""

__version__ = "0.1.0"

from .config import (
    BalanceMode,
    CnnConfig,
    EmbeddingKind,
    EmbeddingMode,
    ExperimentSpec,
    MlpConfig,
    ModelKind,
    RunMode,
    TrainConfig,
    build_spec,
    load_spec,
)
from .dataset import Dataset, Instance, balance, load_dataset, parse_instances, stratified_folds
from .embeddings import EmbeddingTable, SentenceMatrix, load_embeddings
from .cnn import CnnModel
from .mlp import MlpModel
from .numerics import SeededRng
from .optim import TrainedModel, train, training_accuracy
from .evaluation import EvalResult, PairedComparison, evaluate, mcnemar_midp, micro_average
from .introspect import FilterHit, analyze_filters, distance_stats, export_report, filter_top_sentences
from .checkpoint import load_checkpoint, save_checkpoint
from .registry import ModelRegistry, default_registry
from .harness import RunResult, WordResult, run_experiment

from .exceptions import (
    SenseCnnError,
    ShapeMismatchError,
    EmbeddingFormatError,
    CorpusFormatError,
    UnknownFilterError,
    UnknownModelError,
    ConfigurationError,
    CheckpointError,
    ReportWriteError,
)

__all__ = [
    # Configuration
    'BalanceMode',
    'CnnConfig',
    'EmbeddingKind',
    'EmbeddingMode',
    'ExperimentSpec',
    'MlpConfig',
    'ModelKind',
    'RunMode',
    'TrainConfig',
    'build_spec',
    'load_spec',

    # Data
    'Dataset',
    'Instance',
    'balance',
    'load_dataset',
    'parse_instances',
    'stratified_folds',
    'EmbeddingTable',
    'SentenceMatrix',
    'load_embeddings',

    # Models and training
    'CnnModel',
    'MlpModel',
    'SeededRng',
    'TrainedModel',
    'train',
    'training_accuracy',
    'ModelRegistry',
    'default_registry',
    'load_checkpoint',
    'save_checkpoint',

    # Evaluation and analysis
    'EvalResult',
    'PairedComparison',
    'evaluate',
    'mcnemar_midp',
    'micro_average',
    'FilterHit',
    'analyze_filters',
    'distance_stats',
    'export_report',
    'filter_top_sentences',

    # Experiments
    'RunResult',
    'WordResult',
    'run_experiment',

    # Exceptions
    'SenseCnnError',
    'ShapeMismatchError',
    'EmbeddingFormatError',
    'CorpusFormatError',
    'UnknownFilterError',
    'UnknownModelError',
    'ConfigurationError',
    'CheckpointError',
    'ReportWriteError',
]
