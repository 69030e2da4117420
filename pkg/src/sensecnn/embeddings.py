"""
Pre-trained word vectors and sentence matrices.

The text format is one vector per line, ``token v1 ... vd``, with an
optional ``V d`` header line. Words without a pre-trained vector get a
random vector drawn from U[-a, a] per dimension, where ``a`` is chosen so
the uniform variance (a^2 / 3) equals the pooled variance of the loaded
vectors. Those vectors are materialized lazily, appended to the table and
cached so that a word keeps its vector for the lifetime of the table.
"""

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import BinaryIO, Dict, Iterable, List, Optional, Set, Tuple, Union
import io
import logging

import numpy as np

from .exceptions import EmbeddingFormatError, SenseCnnError, ShapeMismatchError
from .numerics import Matrix, SeededRng

logger = logging.getLogger(__name__)


class RowSource(str, Enum):
    """Where a sentence row came from."""
    PRETRAINED = "pretrained"
    OOV = "oov"
    RANDOM_INIT = "random-init"


@dataclass
class SentenceMatrix:
    """
    Input layer for one sentence: one embedding row per token.

    ``row_ids`` are the table rows the vectors were copied from; tuned
    training scatters gradients back through them.
    """
    tokens: List[str]
    matrix: Matrix
    row_sources: List[RowSource]
    row_ids: np.ndarray

    @property
    def length(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]


class EmbeddingTable:
    """
    Vocabulary to d-dimensional vectors, with variance-matched OOV rows.

    Rows ``[0, n_pretrained)`` hold loaded vectors; later rows are OOV
    vectors appended on first use. ``trainable`` marks the tuned condition;
    the table itself never updates rows, the optimizer does.

    Example:
        >>> table = EmbeddingTable.random_init(dim=4, bound=0.5, seed=1)
        >>> sm = table.embed_sentence(['he', 'can', 'go'])
        >>> sm.matrix.shape
        (3, 4)
    """

    def __init__(
        self,
        dim: int,
        vocab: Optional[Dict[str, int]] = None,
        matrix: Optional[Matrix] = None,
        oov_bound: Optional[float] = None,
        trainable: bool = False,
        seed: int = 0
    ):
        if dim < 1:
            raise ValueError(f"embedding dimension must be >= 1, got {dim}")

        self.dim = int(dim)
        self.vocab: Dict[str, int] = dict(vocab or {})
        initial = np.zeros((0, dim)) if matrix is None else np.asarray(matrix, dtype=np.float64)
        if initial.ndim != 2 or initial.shape[1] != dim or initial.shape[0] != len(self.vocab):
            raise ShapeMismatchError("EmbeddingTable", initial.shape, (len(self.vocab), dim))

        self.n_pretrained = initial.shape[0]
        capacity = max(16, 2 * self.n_pretrained)
        self._data = np.zeros((capacity, dim), dtype=np.float64)
        self._data[:self.n_pretrained] = initial
        self._size = self.n_pretrained

        if oov_bound is None:
            oov_bound = oov_bound_from_table(self) if self.n_pretrained else 0.0
        if oov_bound < 0:
            raise ValueError(f"oov_bound must be >= 0, got {oov_bound}")
        self.oov_bound = float(oov_bound)

        self.trainable = trainable
        self.seed = int(seed)
        self.rng = SeededRng(self.seed)
        self.oov_cache: Dict[str, int] = {}
        self.duplicate_count = 0

    @classmethod
    def random_init(cls, dim: int, bound: float, seed: int = 0, trainable: bool = False):
        """Table with no pre-trained vectors: every token gets a random row."""
        return cls(dim, oov_bound=bound, trainable=trainable, seed=seed)

    @property
    def matrix(self) -> Matrix:
        """View of all materialized rows; in-place edits update the table."""
        return self._data[:self._size]

    def __len__(self) -> int:
        return self._size

    def __contains__(self, token: str) -> bool:
        return self.lookup(token) is not None

    def lookup(self, token: str) -> Optional[int]:
        """Row of a pre-trained or cached token (exact form, then lowercased)."""
        for form in (token, token.lower()):
            if form in self.vocab:
                return self.vocab[form]
            if form in self.oov_cache:
                return self.oov_cache[form]
        return None

    def _append_row(self, vector: np.ndarray) -> int:
        if self._size == self._data.shape[0]:
            grown = np.zeros((2 * self._data.shape[0], self.dim), dtype=np.float64)
            grown[:self._size] = self._data[:self._size]
            self._data = grown
        self._data[self._size] = vector
        self._size += 1
        return self._size - 1

    def source_of(self, row: int) -> RowSource:
        if row < self.n_pretrained:
            return RowSource.PRETRAINED
        return RowSource.OOV if self.n_pretrained else RowSource.RANDOM_INIT

    def row_index(self, token: str) -> Tuple[int, RowSource]:
        """Row for ``token``, drawing and caching an OOV vector if needed."""
        row = self.lookup(token)
        if row is None:
            vector = self.rng.uniform(-self.oov_bound, self.oov_bound, self.dim)
            row = self._append_row(vector)
            self.oov_cache[token] = row
        return row, self.source_of(row)

    def vector(self, token: str) -> np.ndarray:
        row, _ = self.row_index(token)
        return self._data[row].copy()

    def embed_sentence(self, tokens: List[str]) -> SentenceMatrix:
        """
        Build the s x d input matrix for a token list.

        Raises:
            SenseCnnError: If ``tokens`` is empty
        """
        if not tokens:
            raise SenseCnnError("cannot embed an empty sentence")

        rows = []
        sources = []
        for token in tokens:
            row, source = self.row_index(token)
            rows.append(row)
            sources.append(source)

        row_ids = np.asarray(rows, dtype=np.int64)
        return SentenceMatrix(
            tokens=list(tokens),
            matrix=self._data[row_ids].copy(),
            row_sources=sources,
            row_ids=row_ids,
        )

    def warm(self, sentences: Iterable[Iterable[str]]) -> int:
        """
        Materialize OOV rows for every token in ``sentences``.

        Returns:
            Number of rows added
        """
        before = self._size
        for tokens in sentences:
            for token in tokens:
                self.row_index(token)
        added = self._size - before
        if added:
            logger.debug("materialized %d OOV rows", added)
        return added

    def copy(self) -> "EmbeddingTable":
        """Independent copy, including the OOV cache and the RNG position."""
        clone = EmbeddingTable.__new__(EmbeddingTable)
        clone.dim = self.dim
        clone.vocab = dict(self.vocab)
        clone.n_pretrained = self.n_pretrained
        clone._data = self._data.copy()
        clone._size = self._size
        clone.oov_bound = self.oov_bound
        clone.trainable = self.trainable
        clone.seed = self.seed
        clone.rng = self.rng.clone()
        clone.oov_cache = dict(self.oov_cache)
        clone.duplicate_count = self.duplicate_count
        return clone

    def token_of_rows(self) -> Dict[int, str]:
        """Inverse mapping row -> token over vocab and OOV cache."""
        inverse = {row: token for token, row in self.vocab.items()}
        inverse.update({row: token for token, row in self.oov_cache.items()})
        return inverse

    def delta_since(self, snapshot: Matrix) -> Dict[str, List[float]]:
        """
        Rows that differ from ``snapshot`` (or did not exist in it), keyed by token.

        Used to store tuned embeddings in checkpoints without the whole table.
        """
        inverse = self.token_of_rows()
        delta: Dict[str, List[float]] = {}
        current = self.matrix
        for row in range(self._size):
            if row >= snapshot.shape[0] or not np.array_equal(current[row], snapshot[row]):
                delta[inverse[row]] = current[row].tolist()
        return delta

    def apply_delta(self, delta: Dict[str, List[float]]) -> None:
        """Overwrite (or materialize) the rows listed in a checkpoint delta."""
        for token in sorted(delta):
            values = np.asarray(delta[token], dtype=np.float64)
            if values.shape != (self.dim,):
                raise ShapeMismatchError("apply_delta", values.shape, (self.dim,))
            row = self.vocab.get(token, self.oov_cache.get(token))
            if row is None:
                row = self._append_row(values)
                self.oov_cache[token] = row
            else:
                self._data[row] = values


def oov_bound_from_table(table: EmbeddingTable) -> float:
    """
    Half-width ``a`` of U[-a, a] whose variance matches the loaded vectors.

    The variance is pooled over every component of every pre-trained
    vector, so a = sqrt(3 * var).
    """
    if table.n_pretrained == 0:
        raise SenseCnnError("cannot derive an OOV bound from a table without vectors")
    variance = float(np.var(table.matrix[:table.n_pretrained]))
    return float(np.sqrt(3.0 * variance))


def _is_header(fields: List[str]) -> bool:
    if len(fields) != 2:
        return False
    return all(f.isdigit() for f in fields)


def load_embeddings(
    source: Union[BinaryIO, bytes, str, Path],
    expected_dim: int,
    *,
    restrict_to: Optional[Set[str]] = None,
    trainable: bool = False,
    seed: int = 0
) -> EmbeddingTable:
    """
    Parse the text embedding format.

    Args:
        source: Binary stream, raw bytes or a path to a UTF-8 file
        expected_dim: Dimension every vector must have
        restrict_to: Optional vocabulary; other lines are skipped after validation
        trainable: Whether the table is tuned during training
        seed: Seed for OOV draws

    Returns:
        EmbeddingTable; the first occurrence of a duplicated token wins

    Raises:
        EmbeddingFormatError: On a dimension mismatch, unparsable number or empty input
    """
    if isinstance(source, (str, Path)):
        with open(source, 'rb') as handle:
            return _parse(handle, expected_dim, restrict_to, trainable, seed, str(source))
    if isinstance(source, bytes):
        source = io.BytesIO(source)
    return _parse(source, expected_dim, restrict_to, trainable, seed, None)


def _parse(
    stream: BinaryIO,
    expected_dim: int,
    restrict_to: Optional[Set[str]],
    trainable: bool,
    seed: int,
    name: Optional[str]
) -> EmbeddingTable:
    vocab: Dict[str, int] = {}
    rows: List[np.ndarray] = []
    seen: Set[str] = set()
    duplicates = 0
    # moments over every parsed vector, so restricting keeps the full-file bound
    count = 0
    total = 0.0
    total_sq = 0.0
    seen_content = False

    for line_number, raw in enumerate(stream, 1):
        try:
            line = raw.decode('utf-8').rstrip('\r\n')
        except UnicodeDecodeError as e:
            raise EmbeddingFormatError(f"invalid UTF-8: {e}", line_number, name)
        fields = line.split()
        if not line.strip():
            continue
        if not seen_content and line_number == 1 and _is_header(fields):
            declared = int(fields[1])
            if declared != expected_dim:
                raise EmbeddingFormatError(
                    f"header declares dimension {declared}, expected {expected_dim}",
                    line_number, name,
                )
            seen_content = True
            continue
        seen_content = True

        token, values = fields[0], fields[1:]
        if len(values) != expected_dim:
            raise EmbeddingFormatError(
                f"token '{token}' has {len(values)} values, expected {expected_dim}",
                line_number, name,
            )
        try:
            vector = np.array([float(v) for v in values], dtype=np.float64)
        except ValueError as e:
            raise EmbeddingFormatError(f"unparsable value for '{token}': {e}", line_number, name)
        if not np.isfinite(vector).all():
            raise EmbeddingFormatError(f"non-finite value for '{token}'", line_number, name)

        if token in seen:
            duplicates += 1
            continue
        seen.add(token)
        count += vector.size
        total += float(vector.sum())
        total_sq += float(np.dot(vector, vector))
        if restrict_to is not None and token not in restrict_to and token.lower() not in restrict_to:
            continue
        vocab[token] = len(rows)
        rows.append(vector)

    if not seen_content:
        raise EmbeddingFormatError("embedding source is empty", None, name)
    if not seen:
        raise EmbeddingFormatError("embedding source holds no vectors", None, name)

    if duplicates:
        logger.warning("%d duplicate token rows ignored (first occurrence kept)", duplicates)

    matrix = np.vstack(rows) if rows else np.zeros((0, expected_dim))
    oov_bound = None if rows else 0.0
    if restrict_to is not None and count:
        mean = total / count
        oov_bound = float(np.sqrt(3.0 * max(total_sq / count - mean * mean, 0.0)))
    table = EmbeddingTable(
        expected_dim,
        vocab=vocab,
        matrix=matrix,
        oov_bound=oov_bound,
        trainable=trainable,
        seed=seed,
    )
    table.duplicate_count = duplicates
    logger.info("loaded %d vectors (d=%d, oov bound %.4f)", len(vocab), expected_dim, table.oov_bound)
    return table


def dump_embeddings(table: EmbeddingTable, destination: Union[str, Path], with_header: bool = True) -> None:
    """Write every materialized row (OOV rows included) in the text format."""
    inverse = table.token_of_rows()
    with open(destination, 'w', encoding='utf-8') as out:
        if with_header:
            out.write(f"{len(table)} {table.dim}\n")
        for row in range(len(table)):
            values = " ".join(repr(float(v)) for v in table.matrix[row])
            out.write(f"{inverse[row]} {values}\n")
