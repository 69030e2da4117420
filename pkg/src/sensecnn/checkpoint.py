"""
Checkpoint files for trained CNN and MLP models.

A checkpoint is one canonical JSON document:

    {
      "format": "sensecnn-checkpoint", "version": 1,
      "model_kind": "cnn" | "mlp",
      "config": {...}, "train_config": {...} | null,
      "label_set": [...],
      "params": {tensor name: nested lists},
      "embeddings": {"dim", "n_pretrained", "oov_bound", "trainable", "rng", "source"},
      "embedding_delta": {token: [d floats]},
      "seed_info": {...}
    }

``embedding_delta`` holds every OOV row and every pre-trained row that
tuning changed; unchanged pre-trained rows come from the embedding file
the model was trained with. Floats are written with their shortest
round-trip repr, so a loaded model predicts exactly like the saved one.
"""

from pathlib import Path
from typing import Any, Dict, Optional, Union
import json
import logging

import numpy as np
from pydantic import ValidationError

from .cnn import CnnModel
from .config import CnnConfig, MlpConfig, TrainConfig
from .embeddings import EmbeddingTable
from .exceptions import CheckpointError, ShapeMismatchError
from .mlp import MlpModel
from .numerics import SeededRng
from .optim import TrainedModel, TrainingHistory
from .serialization import canonical_json

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "sensecnn-checkpoint"
CHECKPOINT_VERSION = 1

_MODELS = {
    "cnn": (CnnModel, CnnConfig),
    "mlp": (MlpModel, MlpConfig),
}


def save_checkpoint(
    trained: TrainedModel,
    path: Union[str, Path],
    base: Optional[EmbeddingTable] = None,
    embeddings_source: Optional[Union[str, Path]] = None,
    seed_info: Optional[Dict[str, Any]] = None
) -> Path:
    """
    Write ``trained`` to ``path``.

    Args:
        trained: Model, label set and embedding table to store
        path: Destination file
        base: Table as it was before training; its pre-trained rows are the
            reference for the embedding delta. Defaults to the trained
            table itself (static mode leaves pre-trained rows untouched).
        embeddings_source: Embedding file recorded for later loading
        seed_info: Seeds of the run, stored verbatim

    Raises:
        CheckpointError: For models without parameters or on I/O failure
    """
    kind = trained.kind
    if kind not in _MODELS:
        raise CheckpointError(f"model kind '{kind}' has no checkpoint format", {"kinds": sorted(_MODELS)})

    table = trained.table
    reference = base if base is not None else table
    snapshot = reference.matrix[:reference.n_pretrained]

    document = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "model_kind": kind,
        "config": trained.model.config.model_dump(mode='json'),
        "train_config": trained.train_config.model_dump(mode='json') if trained.train_config else None,
        "label_set": list(trained.label_set),
        "params": {name: tensor.tolist() for name, tensor in trained.model.tensors().items()},
        "embeddings": {
            "dim": table.dim,
            "n_pretrained": table.n_pretrained,
            "oov_bound": table.oov_bound,
            "trainable": table.trainable,
            "rng": table.rng.get_state(),
            "source": Path(embeddings_source).as_posix() if embeddings_source else None,
        },
        "embedding_delta": table.delta_since(snapshot),
        "seed_info": seed_info or {},
    }

    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(canonical_json(document) + "\n", encoding='utf-8')
    except OSError as e:
        raise CheckpointError(f"could not write checkpoint: {e.strerror or e}", {"path": str(path)}) from e
    logger.info("checkpoint written to %s (%d embedding rows)", path, len(document["embedding_delta"]))
    return path


def read_checkpoint(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Parse and sanity-check a checkpoint document without building the model.

    Raises:
        CheckpointError: If the file is missing, not JSON or of another format
    """
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding='utf-8'))
    except FileNotFoundError as e:
        raise CheckpointError("checkpoint not found", {"path": str(path)}) from e
    except (OSError, json.JSONDecodeError) as e:
        raise CheckpointError(f"unreadable checkpoint: {e}", {"path": str(path)}) from e

    if not isinstance(document, dict) or document.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError("not a sensecnn checkpoint", {"path": str(path)})
    if document.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            "unsupported checkpoint version",
            {"path": str(path), "version": document.get("version"), "supported": CHECKPOINT_VERSION},
        )
    return document


def _build_model(document: Dict[str, Any]):
    kind = document.get("model_kind")
    if kind not in _MODELS:
        raise CheckpointError(f"unknown model kind '{kind}' in checkpoint", {"kinds": sorted(_MODELS)})
    model_cls, config_cls = _MODELS[kind]
    try:
        cfg = config_cls(**document["config"])
    except (KeyError, TypeError, ValidationError) as e:
        raise CheckpointError(f"invalid model configuration in checkpoint: {e}") from e

    model = model_cls.create(cfg, SeededRng(0))
    stored = document.get("params", {})
    for name, tensor in model.tensors().items():
        if name not in stored:
            raise CheckpointError(f"checkpoint lacks tensor '{name}'")
        values = np.asarray(stored[name], dtype=np.float64)
        if values.shape != tensor.shape:
            raise ShapeMismatchError(f"checkpoint[{name}]", values.shape, tensor.shape)
        tensor[...] = values
    return model


def _build_table(document: Dict[str, Any], base: Optional[EmbeddingTable]) -> EmbeddingTable:
    meta = document.get("embeddings", {})
    dim = int(meta.get("dim", 0))
    if base is None:
        if meta.get("n_pretrained", 0):
            raise CheckpointError(
                "checkpoint was trained with pre-trained vectors; load that embedding file first",
                {"embeddings": meta.get("source")},
            )
        table = EmbeddingTable.random_init(dim, float(meta["oov_bound"]), trainable=bool(meta.get("trainable")))
    else:
        if base.dim != dim:
            raise ShapeMismatchError("checkpoint embeddings", (base.dim,), (dim,))
        table = base.copy()
        table.oov_bound = float(meta["oov_bound"])
        table.trainable = bool(meta.get("trainable"))
    table.apply_delta(document.get("embedding_delta", {}))
    if "rng" in meta:
        table.rng = SeededRng.from_state(meta["rng"])
        table.seed = table.rng.seed
    return table


def load_checkpoint(path: Union[str, Path], base: Optional[EmbeddingTable] = None) -> TrainedModel:
    """
    Rebuild a trained model from a checkpoint.

    Args:
        path: Checkpoint file
        base: Pre-trained embedding table; required when the model was
            trained with pre-trained vectors. It is copied, not modified.

    Raises:
        CheckpointError: On missing, malformed or incompatible checkpoints
    """
    document = read_checkpoint(path)
    model = _build_model(document)
    table = _build_table(document, base)

    train_config = None
    if document.get("train_config"):
        try:
            train_config = TrainConfig(**document["train_config"])
        except ValidationError as e:
            raise CheckpointError(f"invalid training configuration in checkpoint: {e}") from e

    label_set = tuple(document.get("label_set", []))
    if len(label_set) != model.config.classes:
        raise CheckpointError(
            "label set does not match the model's class count",
            {"labels": len(label_set), "classes": model.config.classes},
        )
    return TrainedModel(
        model=model,
        label_set=label_set,
        table=table,
        history=TrainingHistory(),
        train_config=train_config,
    )
