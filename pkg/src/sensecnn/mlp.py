"""
Bag-of-vectors baseline: one ReLU hidden layer over the sum of the
sentence's word vectors, dropout on the hidden layer, softmax output.

Summation makes the prediction invariant to token order, which is what
separates this baseline from the CNN.
"""

from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from .config import EmbeddingMode, MlpConfig
from .embeddings import SentenceMatrix
from .exceptions import ShapeMismatchError
from .numerics import SeededRng, cross_entropy, glorot_bound, softmax


@dataclass
class MlpParams:
    W1: np.ndarray  # (hidden, d)
    b1: np.ndarray
    W2: np.ndarray  # (classes, hidden)
    b2: np.ndarray

    def tensors(self) -> Dict[str, np.ndarray]:
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}

    def copy(self) -> "MlpParams":
        return MlpParams(self.W1.copy(), self.b1.copy(), self.W2.copy(), self.b2.copy())


@dataclass
class MlpTrace:
    sentence: SentenceMatrix
    u: np.ndarray
    pre_hidden: np.ndarray
    hidden: np.ndarray
    dropout_mask: Optional[np.ndarray]
    dropped: np.ndarray
    logits: np.ndarray
    probs: np.ndarray
    keep: float = 1.0


@dataclass
class MlpGradients:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    embeddings: Optional[np.ndarray] = None

    def tensors(self) -> Dict[str, np.ndarray]:
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}


def mlp_init(d: int, hidden: int, classes: int, rng: SeededRng) -> MlpParams:
    """Glorot-uniform weights with fan-in/fan-out equal to the layer sizes; zero biases."""
    l1 = glorot_bound(d, hidden)
    l2 = glorot_bound(hidden, classes)
    return MlpParams(
        W1=rng.uniform(-l1, l1, (hidden, d)),
        b1=np.zeros(hidden),
        W2=rng.uniform(-l2, l2, (classes, hidden)),
        b2=np.zeros(classes),
    )


def mlp_forward(
    params: MlpParams,
    sm: SentenceMatrix,
    rng: Optional[SeededRng] = None,
    keep: float = 0.5,
    dropout_mask: Optional[np.ndarray] = None
) -> MlpTrace:
    d = params.W1.shape[1]
    if sm.dim != d:
        raise ShapeMismatchError("mlp_forward", (sm.length, sm.dim), (sm.length, d))

    u = sm.matrix.sum(axis=0)
    pre = params.W1 @ u + params.b1
    h = np.maximum(pre, 0.0)

    mask = dropout_mask
    if mask is None and rng is not None and keep < 1.0:
        mask = rng.bernoulli(keep, h.shape[0])
    dropped = h * mask / keep if mask is not None else h

    logits = params.W2 @ dropped + params.b2
    return MlpTrace(sm, u, pre, h, mask, dropped, logits, softmax(logits), keep)


def mlp_penalty(params: MlpParams, lam: float) -> float:
    return lam * float(np.sum(params.W1 ** 2) + np.sum(params.W2 ** 2))


def mlp_loss(trace: MlpTrace, gold: int, params: MlpParams, lam: float) -> float:
    return cross_entropy(trace.probs, gold) + mlp_penalty(params, lam)


def mlp_backward(
    trace: MlpTrace,
    gold: int,
    params: MlpParams,
    lam: float,
    tuned: bool = False
) -> MlpGradients:
    """Exact gradients; l2 on W1 and W2 only. Every sentence row shares d(loss)/du."""
    dlogits = trace.probs.copy()
    dlogits[gold] -= 1.0

    dW2 = np.outer(dlogits, trace.dropped) + 2.0 * lam * params.W2
    db2 = dlogits.copy()

    d_dropped = params.W2.T @ dlogits
    dh = d_dropped * trace.dropout_mask / trace.keep if trace.dropout_mask is not None else d_dropped
    dpre = dh * (trace.pre_hidden > 0.0)

    dW1 = np.outer(dpre, trace.u) + 2.0 * lam * params.W1
    db1 = dpre

    embeddings = None
    if tuned:
        du = params.W1.T @ dpre
        embeddings = np.tile(du, (trace.sentence.length, 1))
    return MlpGradients(dW1, db1, dW2, db2, embeddings)


class MlpModel:
    """MLP parameters bundled with their configuration (same interface as CnnModel)."""

    kind = "mlp"

    def __init__(self, cfg: MlpConfig, params: MlpParams):
        self.config = cfg
        self.params = params

    @classmethod
    def create(cls, cfg: MlpConfig, rng: SeededRng) -> "MlpModel":
        return cls(cfg, mlp_init(cfg.dim, cfg.hidden, cfg.classes, rng))

    @property
    def embedding_mode(self) -> EmbeddingMode:
        return self.config.embedding_mode

    def forward(self, sm, rng=None, dropout_mask=None) -> MlpTrace:
        return mlp_forward(self.params, sm, rng, self.config.dropout_keep, dropout_mask)

    def loss(self, trace: MlpTrace, gold: int) -> float:
        return mlp_loss(trace, gold, self.params, self.config.l2_lambda)

    def backward(self, trace: MlpTrace, gold: int) -> MlpGradients:
        tuned = self.config.embedding_mode is EmbeddingMode.TUNED
        return mlp_backward(trace, gold, self.params, self.config.l2_lambda, tuned)

    def predict(self, sm) -> int:
        return int(np.argmax(mlp_forward(self.params, sm).logits))

    def predict_proba(self, sm) -> np.ndarray:
        return mlp_forward(self.params, sm).probs

    def tensors(self) -> Dict[str, np.ndarray]:
        return self.params.tensors()
