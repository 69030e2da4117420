"""
Adam and the mini-batch training loop shared by the CNN and the MLP.

``iterations`` counts mini-batch gradient steps, not epochs. Batches are
drawn without replacement from a seeded shuffle that is redrawn at every
epoch boundary; the last batch of an epoch may be smaller. There is no
early stopping.

In tuned mode the embedding table is a trainable tensor whose Adam
moments grow with the table, and only the rows of tokens occurring in the
current batch are updated.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union
import csv
import logging

import numpy as np
from tqdm import tqdm

from .config import AdamHyper, EmbeddingMode, TrainConfig
from .dataset import Dataset
from .embeddings import EmbeddingTable, SentenceMatrix
from .exceptions import ConfigurationError, SenseCnnError, ShapeMismatchError
from .numerics import SeededRng

logger = logging.getLogger(__name__)

EMBEDDING_KEY = "embeddings"


@dataclass
class AdamState:
    """Step counter and per-tensor moment estimates."""
    t: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    def ensure(self, key: str, shape: Tuple[int, ...]) -> None:
        """Create or grow (along axis 0) the moments of ``key``."""
        if key not in self.m:
            self.m[key] = np.zeros(shape)
            self.v[key] = np.zeros(shape)
            return
        have = self.m[key].shape
        if have == shape:
            return
        if have[1:] != shape[1:] or shape[0] < have[0]:
            raise ShapeMismatchError("AdamState", have, shape)
        pad = np.zeros((shape[0] - have[0],) + shape[1:])
        self.m[key] = np.concatenate([self.m[key], pad])
        self.v[key] = np.concatenate([self.v[key], pad])


def adam_step(
    state: AdamState,
    params: Dict[str, np.ndarray],
    grads: Dict[str, np.ndarray],
    hyper: AdamHyper,
    rows: Optional[Dict[str, np.ndarray]] = None
) -> None:
    """
    One bias-corrected Adam update, in place.

    Args:
        state: Moments and step counter, updated in place
        params: Named tensors, updated in place
        grads: Gradients for every key in ``params``
        hyper: Step size and decay rates
        rows: For sparse keys, the row indices ``grads[key]`` refers to;
            only those rows (and their moments) change
    """
    rows = rows or {}
    state.t += 1
    bc1 = 1.0 - hyper.beta1 ** state.t
    bc2 = 1.0 - hyper.beta2 ** state.t

    for key, theta in params.items():
        g = grads[key]
        state.ensure(key, theta.shape)
        m, v = state.m[key], state.v[key]

        if key in rows:
            idx = rows[key]
            if g.shape != (len(idx),) + theta.shape[1:]:
                raise ShapeMismatchError(f"adam_step[{key}]", g.shape, (len(idx),) + theta.shape[1:])
            m[idx] = hyper.beta1 * m[idx] + (1.0 - hyper.beta1) * g
            v[idx] = hyper.beta2 * v[idx] + (1.0 - hyper.beta2) * (g * g)
            theta[idx] -= hyper.lr * (m[idx] / bc1) / (np.sqrt(v[idx] / bc2) + hyper.eps)
        else:
            if g.shape != theta.shape:
                raise ShapeMismatchError(f"adam_step[{key}]", g.shape, theta.shape)
            m *= hyper.beta1
            m += (1.0 - hyper.beta1) * g
            v *= hyper.beta2
            v += (1.0 - hyper.beta2) * (g * g)
            theta -= hyper.lr * (m / bc1) / (np.sqrt(v / bc2) + hyper.eps)


@dataclass
class TrainingHistory:
    """Mean mini-batch loss per step (dropout active, penalty included)."""
    losses: List[float] = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.losses)

    def to_csv(self, path: Union[str, Path]) -> None:
        with open(path, 'w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(["step", "loss"])
            for step, value in enumerate(self.losses, 1):
                writer.writerow([step, repr(value)])


@dataclass
class TrainedModel:
    """A fitted model with the label set and embedding table it was trained with."""
    model: object
    label_set: Tuple[str, ...]
    table: EmbeddingTable
    history: TrainingHistory
    train_config: Optional[TrainConfig] = None

    @property
    def kind(self) -> str:
        return self.model.kind

    def predict_indices(self, ds: Dataset) -> List[int]:
        return [self.model.predict(self.table.embed_sentence(list(inst.tokens))) for inst in ds]

    def predict_labels(self, ds: Dataset) -> List[str]:
        return [self.label_set[i] for i in self.predict_indices(ds)]


def _batches(n: int, batch_size: int, rng: SeededRng):
    """Endless stream of index batches, reshuffled per epoch."""
    while True:
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            yield order[start:start + batch_size]


def _scatter_rows(sentences: List[SentenceMatrix], grads: List[np.ndarray], dim: int):
    """Sum per-sentence row gradients into unique table rows."""
    row_ids = np.concatenate([sm.row_ids for sm in sentences])
    stacked = np.vstack(grads)
    unique, inverse = np.unique(row_ids, return_inverse=True)
    summed = np.zeros((unique.shape[0], dim))
    np.add.at(summed, inverse, stacked)
    return unique, summed


def train(model, data: Dataset, table: EmbeddingTable, cfg: TrainConfig) -> TrainedModel:
    """
    Fit ``model`` with ``cfg.iterations`` Adam steps.

    Each step averages the per-sentence gradients of one mini-batch. In
    static mode the table's rows are never written; OOV rows are
    materialized up front so the table does not change during training.

    Raises:
        SenseCnnError: On empty data
        ConfigurationError: If the model's class count or embedding mode disagrees
    """
    if len(data) == 0:
        raise SenseCnnError("cannot train on an empty dataset")
    if model.config.classes != len(data.label_set):
        raise ConfigurationError(
            "model class count does not match the dataset label set",
            {"classes": model.config.classes, "label_set": list(data.label_set)},
        )
    if model.embedding_mode is not cfg.embedding_mode:
        raise ConfigurationError(
            "model and training config disagree on the embedding mode",
            {"model": model.embedding_mode.value, "train": cfg.embedding_mode.value},
        )

    tuned = cfg.embedding_mode is EmbeddingMode.TUNED
    table.warm(inst.tokens for inst in data)
    golds = [data.label_index(inst.label) for inst in data]
    cached = None if tuned else [table.embed_sentence(list(inst.tokens)) for inst in data]

    root = SeededRng(cfg.seed)
    batch_stream = _batches(len(data), cfg.batch_size, root.spawn("batches"))
    dropout_rng = root.spawn("dropout")
    state = AdamState()
    history = TrainingHistory()

    steps = range(1, cfg.iterations + 1)
    if cfg.progress:
        steps = tqdm(steps, desc=f"train {model.kind}", unit="step", leave=False)

    for step in steps:
        batch = next(batch_stream)
        sentences = []
        sums = None
        row_grads = []
        batch_loss = 0.0
        for i in batch:
            sm = cached[i] if cached is not None else table.embed_sentence(list(data[i].tokens))
            trace = model.forward(sm, dropout_rng)
            batch_loss += model.loss(trace, golds[i])
            grads = model.backward(trace, golds[i])
            named = grads.tensors()
            if sums is None:
                sums = {k: g.copy() for k, g in named.items()}
            else:
                for k, g in named.items():
                    sums[k] += g
            if tuned:
                sentences.append(sm)
                row_grads.append(grads.embeddings)

        scale = 1.0 / len(batch)
        params = model.tensors()
        grad_means = {k: g * scale for k, g in sums.items()}
        rows = None
        if tuned:
            unique, summed = _scatter_rows(sentences, row_grads, table.dim)
            params = dict(params)
            params[EMBEDDING_KEY] = table.matrix
            grad_means[EMBEDDING_KEY] = summed * scale
            rows = {EMBEDDING_KEY: unique}

        adam_step(state, params, grad_means, cfg.adam, rows)
        history.losses.append(batch_loss * scale)

        if step % cfg.log_every == 0 or step == cfg.iterations:
            logger.info("step %d/%d loss %.4f", step, cfg.iterations, history.losses[-1])

    return TrainedModel(
        model=model,
        label_set=data.label_set,
        table=table,
        history=history,
        train_config=cfg,
    )


def training_accuracy(trained: TrainedModel, data: Dataset) -> float:
    predictions = trained.predict_labels(data)
    return sum(p == inst.label for p, inst in zip(predictions, data)) / len(data)
