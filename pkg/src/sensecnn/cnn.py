"""
One-layer CNN for sentence classification.

For a sentence matrix x (s x d) and a filter w (n x d), feature ``i`` of
the map is the Frobenius inner product of w with the window of rows
``i .. i+n-1`` (narrow convolution: s - n + 1 positions). A bias and a
ReLU follow, then max-over-time pooling keeps one value per filter. The
pooled values of all filters are concatenated, dropped out at training
time (inverted scaling) and fed to a softmax layer.

Sentences shorter than the largest region size are right-padded with zero
rows, which contribute nothing to any inner product.

Gradients are derived by hand. Max pooling routes each filter's gradient
to its first maximal position only.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .config import CnnConfig, EmbeddingMode
from .embeddings import SentenceMatrix
from .exceptions import ShapeMismatchError, UnknownFilterError
from .diagnostics import FuzzyMatcher
from .numerics import SeededRng, cross_entropy, glorot_bound, softmax

FilterId = Tuple[int, int]


@dataclass
class CnnParams:
    """
    Trainable CNN parameters.

    ``filters[n]`` has shape (m, n, d): the m filter matrices of region
    size n. ``biases[n]`` has shape (m,).
    """
    filters: Dict[int, np.ndarray]
    biases: Dict[int, np.ndarray]
    softmax_W: np.ndarray
    softmax_b: np.ndarray

    def tensors(self) -> Dict[str, np.ndarray]:
        """Named views of every tensor; in-place updates change the params."""
        named = {}
        for n in self.filters:
            named[f"filters.{n}"] = self.filters[n]
            named[f"biases.{n}"] = self.biases[n]
        named["softmax_W"] = self.softmax_W
        named["softmax_b"] = self.softmax_b
        return named

    def copy(self) -> "CnnParams":
        return CnnParams(
            filters={n: w.copy() for n, w in self.filters.items()},
            biases={n: b.copy() for n, b in self.biases.items()},
            softmax_W=self.softmax_W.copy(),
            softmax_b=self.softmax_b.copy(),
        )


@dataclass
class ForwardTrace:
    """
    Activations of one forward pass, kept for backprop and introspection.

    ``argmax_pos[n][j]`` is the 0-based feature-map position k of filter
    (n, j); its window covers tokens k .. k+n-1.
    """
    sentence: SentenceMatrix
    padded: np.ndarray
    windows: Dict[int, np.ndarray]
    pre_activations: Dict[int, np.ndarray]
    feature_maps: Dict[int, np.ndarray]
    argmax_pos: Dict[int, np.ndarray]
    pooled: np.ndarray
    dropout_mask: Optional[np.ndarray]
    dropped: np.ndarray
    logits: np.ndarray
    probs: np.ndarray
    keep: float = 1.0


@dataclass
class Gradients:
    """Gradients shaped like CnnParams, plus sentence-row gradients in tuned mode."""
    filters: Dict[int, np.ndarray]
    biases: Dict[int, np.ndarray]
    softmax_W: np.ndarray
    softmax_b: np.ndarray
    embeddings: Optional[np.ndarray] = field(default=None)

    def tensors(self) -> Dict[str, np.ndarray]:
        named = {}
        for n in self.filters:
            named[f"filters.{n}"] = self.filters[n]
            named[f"biases.{n}"] = self.biases[n]
        named["softmax_W"] = self.softmax_W
        named["softmax_b"] = self.softmax_b
        return named


def init_params(cfg: CnnConfig, rng: SeededRng) -> CnnParams:
    """
    Glorot-uniform filters and softmax weights, zero biases.

    Filters of one region size are treated as a linear map R^(n*d) -> R^m,
    so their limit is sqrt(6 / (n*d + m)).
    """
    m = cfg.maps_per_size
    filters = {}
    biases = {}
    for n in cfg.region_sizes:
        bound = glorot_bound(n * cfg.dim, m)
        filters[n] = rng.uniform(-bound, bound, (m, n, cfg.dim))
        biases[n] = np.zeros(m)
    bound = glorot_bound(cfg.total_maps, cfg.classes)
    return CnnParams(
        filters=filters,
        biases=biases,
        softmax_W=rng.uniform(-bound, bound, (cfg.classes, cfg.total_maps)),
        softmax_b=np.zeros(cfg.classes),
    )


def pad_sentence(matrix: np.ndarray, min_rows: int) -> np.ndarray:
    """Right-pad with zero rows up to ``min_rows``."""
    s, d = matrix.shape
    if s >= min_rows:
        return matrix
    return np.vstack([matrix, np.zeros((min_rows - s, d))])


def forward(
    params: CnnParams,
    cfg: CnnConfig,
    sm: SentenceMatrix,
    rng_for_dropout: Optional[SeededRng] = None,
    dropout_mask: Optional[np.ndarray] = None
) -> ForwardTrace:
    """
    Run the network on one sentence.

    Dropout is applied when ``rng_for_dropout`` is given (a fresh mask) or
    when ``dropout_mask`` is given (a fixed mask, for gradient checks).

    Raises:
        ShapeMismatchError: If the sentence dimension differs from cfg.dim
    """
    if sm.dim != cfg.dim:
        raise ShapeMismatchError("cnn.forward", (sm.length, sm.dim), (sm.length, cfg.dim))

    x = pad_sentence(sm.matrix, cfg.max_region)
    windows = {}
    pre = {}
    maps = {}
    argmax = {}
    pooled_parts = []
    for n in cfg.region_sizes:
        w = params.filters[n]
        m = w.shape[0]
        win = sliding_window_view(x, (n, cfg.dim))[:, 0].reshape(-1, n * cfg.dim)
        c = win @ w.reshape(m, -1).T + params.biases[n]
        fm = np.maximum(c, 0.0)
        pos = fm.argmax(axis=0)
        windows[n] = win
        pre[n] = c
        maps[n] = fm
        argmax[n] = pos
        pooled_parts.append(fm[pos, np.arange(m)])
    pooled = np.concatenate(pooled_parts)

    keep = cfg.dropout_keep
    mask = dropout_mask
    if mask is None and rng_for_dropout is not None and keep < 1.0:
        mask = rng_for_dropout.bernoulli(keep, pooled.shape[0])
    if mask is not None:
        dropped = pooled * mask / keep
    else:
        dropped = pooled

    logits = params.softmax_W @ dropped + params.softmax_b
    return ForwardTrace(
        sentence=sm,
        padded=x,
        windows=windows,
        pre_activations=pre,
        feature_maps=maps,
        argmax_pos=argmax,
        pooled=pooled,
        dropout_mask=mask,
        dropped=dropped,
        logits=logits,
        probs=softmax(logits),
        keep=keep,
    )


def l2_penalty(params: CnnParams, cfg: CnnConfig) -> float:
    """lambda * (||softmax_W||^2 + sum of ||filters||^2); biases excluded."""
    total = float(np.sum(params.softmax_W ** 2))
    for w in params.filters.values():
        total += float(np.sum(w ** 2))
    return cfg.l2_lambda * total


def loss(trace: ForwardTrace, gold: int, params: CnnParams, cfg: CnnConfig) -> float:
    return cross_entropy(trace.probs, gold) + l2_penalty(params, cfg)


def backward(trace: ForwardTrace, gold: int, params: CnnParams, cfg: CnnConfig) -> Gradients:
    """
    Exact gradients of :func:`loss` for the trace's sentence.

    The ReLU gate is open where the pre-activation is > 0; the dropout
    mask of the trace is replayed. Embedding-row gradients are returned in
    tuned mode only, for the real (unpadded) rows.
    """
    lam2 = 2.0 * cfg.l2_lambda
    dlogits = trace.probs.copy()
    dlogits[gold] -= 1.0

    d_softmax_W = np.outer(dlogits, trace.dropped) + lam2 * params.softmax_W
    d_softmax_b = dlogits.copy()

    d_dropped = params.softmax_W.T @ dlogits
    if trace.dropout_mask is not None:
        d_pooled = d_dropped * trace.dropout_mask / trace.keep
    else:
        d_pooled = d_dropped

    tuned = cfg.embedding_mode is EmbeddingMode.TUNED
    d_x = np.zeros_like(trace.padded) if tuned else None

    d_filters = {}
    d_biases = {}
    offset = 0
    for n in cfg.region_sizes:
        w = params.filters[n]
        m = w.shape[0]
        pos = trace.argmax_pos[n]
        cols = np.arange(m)
        gate = trace.pre_activations[n][pos, cols] > 0.0
        g = d_pooled[offset:offset + m] * gate
        offset += m

        d_filters[n] = (g[:, None] * trace.windows[n][pos]).reshape(w.shape) + lam2 * w
        d_biases[n] = g

        if tuned:
            for j in np.flatnonzero(g):
                d_x[pos[j]:pos[j] + n] += g[j] * w[j]

    embeddings = d_x[:trace.sentence.length] if tuned else None
    return Gradients(
        filters=d_filters,
        biases=d_biases,
        softmax_W=d_softmax_W,
        softmax_b=d_softmax_b,
        embeddings=embeddings,
    )


def predict_proba(params: CnnParams, cfg: CnnConfig, sm: SentenceMatrix) -> np.ndarray:
    return forward(params, cfg, sm).probs


def predict(params: CnnParams, cfg: CnnConfig, sm: SentenceMatrix) -> int:
    """Dropout-free argmax class; ties go to the lowest index."""
    return int(np.argmax(forward(params, cfg, sm).logits))


def filter_ids(cfg: CnnConfig):
    """Every (region_size, map_index) in pooled-vector order."""
    return [(n, j) for n in cfg.region_sizes for j in range(cfg.maps_per_size)]


def pooled_offset(cfg: CnnConfig, filter_id: FilterId) -> int:
    """
    Position of a filter's feature in the pooled vector.

    Raises:
        UnknownFilterError: If the region size or map index does not exist
    """
    n, j = filter_id
    if n not in cfg.region_sizes or not 0 <= j < cfg.maps_per_size:
        names = [format_filter_id(f) for f in filter_ids(cfg)]
        wanted = format_filter_id(filter_id)
        raise UnknownFilterError(
            wanted,
            suggestions=FuzzyMatcher.suggestion_names(wanted, names),
            available=names,
        )
    return cfg.region_sizes.index(n) * cfg.maps_per_size + j


def format_filter_id(filter_id: FilterId) -> str:
    return f"{filter_id[0]}-{filter_id[1]}"


def parse_filter_id(text: str) -> FilterId:
    n, j = text.split("-", 1)
    return int(n), int(j)


class CnnModel:
    """
    CNN parameters bundled with their configuration.

    Shares its interface with :class:`sensecnn.mlp.MlpModel` so the
    training loop and the harness treat both kinds alike.
    """

    kind = "cnn"

    def __init__(self, cfg: CnnConfig, params: CnnParams):
        self.config = cfg
        self.params = params

    @classmethod
    def create(cls, cfg: CnnConfig, rng: SeededRng) -> "CnnModel":
        return cls(cfg, init_params(cfg, rng))

    @property
    def embedding_mode(self) -> EmbeddingMode:
        return self.config.embedding_mode

    def forward(self, sm, rng=None, dropout_mask=None) -> ForwardTrace:
        return forward(self.params, self.config, sm, rng, dropout_mask)

    def loss(self, trace: ForwardTrace, gold: int) -> float:
        return loss(trace, gold, self.params, self.config)

    def backward(self, trace: ForwardTrace, gold: int) -> Gradients:
        return backward(trace, gold, self.params, self.config)

    def predict(self, sm) -> int:
        return predict(self.params, self.config, sm)

    def predict_proba(self, sm) -> np.ndarray:
        return predict_proba(self.params, self.config, sm)

    def tensors(self) -> Dict[str, np.ndarray]:
        return self.params.tensors()
