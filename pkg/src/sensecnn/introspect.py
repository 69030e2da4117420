"""
Feature-detector analysis for trained CNNs.

For each filter, training sentences are ranked by the filter's pooled
(1-max) value. The window at the arg-max position is the n-gram the filter
detected in that sentence. N-gram vectors (sums of word vectors) are
exported for external dimensionality reduction, and the position of every
n-gram relative to the target word is summarized.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union
import logging

import numpy as np

from .cnn import CnnModel, FilterId, filter_ids, format_filter_id, pooled_offset
from .dataset import Dataset
from .embeddings import EmbeddingTable
from .exceptions import ReportWriteError, SenseCnnError
from .optim import TrainedModel
from .serialization import canonical_json

logger = logging.getLogger(__name__)

DEFAULT_TOP_K = 15


@dataclass(frozen=True)
class FilterHit:
    """One top-ranked sentence of one filter."""
    filter_id: FilterId
    instance_id: str
    pooled_value: float
    span: Tuple[int, int]  # inclusive token range, clipped to the real tokens
    ngram: Tuple[str, ...]
    label: str
    tokens: Tuple[str, ...] = ()
    target_index: int = 0
    rank: int = 0

    @property
    def filter_name(self) -> str:
        return format_filter_id(self.filter_id)

    def context(self) -> str:
        """The sentence with the detected span bracketed."""
        left, right = self.span
        parts = list(self.tokens[:left]) + ["["] + list(self.tokens[left:right + 1]) + ["]"] \
            + list(self.tokens[right + 1:])
        return " ".join(parts)


@dataclass
class _PoolTable:
    values: np.ndarray     # (N, total_maps)
    positions: np.ndarray  # (N, total_maps) window start per filter
    lengths: np.ndarray    # (N,) real token counts


def _require_cnn(trained: TrainedModel) -> CnnModel:
    if not isinstance(trained.model, CnnModel):
        raise SenseCnnError(
            "feature-detector analysis needs a CNN",
            {"model_kind": getattr(trained.model, 'kind', type(trained.model).__name__)},
        )
    return trained.model


def _pool_table(trained: TrainedModel, data: Dataset) -> _PoolTable:
    model = _require_cnn(trained)
    cfg = model.config
    values = np.zeros((len(data), cfg.total_maps))
    positions = np.zeros((len(data), cfg.total_maps), dtype=np.int64)
    lengths = np.zeros(len(data), dtype=np.int64)
    for row, inst in enumerate(data):
        trace = model.forward(trained.table.embed_sentence(list(inst.tokens)))
        values[row] = trace.pooled
        positions[row] = np.concatenate([trace.argmax_pos[n] for n in cfg.region_sizes])
        lengths[row] = len(inst.tokens)
    return _PoolTable(values, positions, lengths)


def _rank(table: _PoolTable, data: Dataset, model: CnnModel, filter_id: FilterId, k: int) -> List[FilterHit]:
    n = filter_id[0]
    column = pooled_offset(model.config, filter_id)
    values = table.values[:, column]
    # stable sort on -value keeps instance order among ties
    order = np.argsort(-values, kind='stable')

    hits: List[FilterHit] = []
    discarded = 0
    for row in order:
        start = int(table.positions[row, column])
        length = int(table.lengths[row])
        if start >= length:
            discarded += 1
            continue
        end = min(start + n - 1, length - 1)
        inst = data[int(row)]
        hits.append(FilterHit(
            filter_id=filter_id,
            instance_id=inst.id,
            pooled_value=float(values[row]),
            span=(start, end),
            ngram=tuple(inst.tokens[start:end + 1]),
            label=inst.label,
            tokens=inst.tokens,
            target_index=inst.target_index,
            rank=len(hits) + 1,
        ))
        if len(hits) == k:
            break
    if discarded:
        logger.debug("filter %s: %d padding-only windows discarded", format_filter_id(filter_id), discarded)
    return hits


def filter_top_sentences(
    trained: TrainedModel,
    data: Dataset,
    filter_id: FilterId,
    k: int = DEFAULT_TOP_K
) -> List[FilterHit]:
    """
    Top ``k`` sentences of ``data`` for one filter, by pooled value.

    Ties keep dataset order. Windows lying entirely in the padding are
    skipped; windows partly over the padding are clipped to real tokens.

    Raises:
        UnknownFilterError: If ``filter_id`` is not a filter of the model
    """
    model = _require_cnn(trained)
    pooled_offset(model.config, filter_id)
    if len(data) == 0:
        raise SenseCnnError("no sentences to rank")
    return _rank(_pool_table(trained, data), data, model, filter_id, k)


def analyze_filters(
    trained: TrainedModel,
    data: Dataset,
    filters: Optional[Iterable[FilterId]] = None,
    k: int = DEFAULT_TOP_K
) -> Dict[FilterId, List[FilterHit]]:
    """Top hits for many filters from a single forward pass per sentence."""
    model = _require_cnn(trained)
    wanted = list(filters) if filters is not None else filter_ids(model.config)
    for filter_id in wanted:
        pooled_offset(model.config, filter_id)
    if len(data) == 0:
        raise SenseCnnError("no sentences to rank")
    table = _pool_table(trained, data)
    return {filter_id: _rank(table, data, model, filter_id, k) for filter_id in wanted}


def ngram_vector(table: EmbeddingTable, ngram: Sequence[str]) -> np.ndarray:
    """Sum of the word vectors of an n-gram."""
    if not ngram:
        raise SenseCnnError("empty n-gram")
    return np.sum([table.vector(token) for token in ngram], axis=0)


def classify_span(span: Tuple[int, int], target: int) -> Tuple[str, int]:
    """
    Position of a span relative to the target index.

    Returns:
        ('contains', 0), ('left', target - right) or ('right', left - target)
    """
    left, right = span
    if left <= target <= right:
        return "contains", 0
    if right < target:
        return "left", target - right
    return "right", left - target


@dataclass
class DistanceSummary:
    count: int = 0
    contains: int = 0
    left: int = 0
    right: int = 0
    starts_with_target: int = 0
    total_distance: int = 0
    total_left: int = 0
    total_right: int = 0

    def add(self, kind: str, distance: int, starts: bool) -> None:
        self.count += 1
        self.total_distance += distance
        if kind == "contains":
            self.contains += 1
        elif kind == "left":
            self.left += 1
            self.total_left += distance
        else:
            self.right += 1
            self.total_right += distance
        if starts:
            self.starts_with_target += 1

    @staticmethod
    def _ratio(a: int, b: int) -> float:
        return a / b if b else 0.0

    @property
    def mean_abs_distance(self) -> float:
        return self._ratio(self.total_distance, self.count)

    @property
    def mean_left_distance(self) -> float:
        return self._ratio(self.total_left, self.left)

    @property
    def mean_right_distance(self) -> float:
        return self._ratio(self.total_right, self.right)

    @property
    def contains_fraction(self) -> float:
        return self._ratio(self.contains, self.count)

    @property
    def starts_with_target_fraction(self) -> float:
        return self._ratio(self.starts_with_target, self.count)

    def to_json(self) -> Dict:
        return {
            "count": self.count,
            "contains": self.contains,
            "left": self.left,
            "right": self.right,
            "starts_with_target": self.starts_with_target,
            "mean_abs_distance": self.mean_abs_distance,
            "mean_left_distance": self.mean_left_distance,
            "mean_right_distance": self.mean_right_distance,
            "contains_fraction": self.contains_fraction,
            "starts_with_target_fraction": self.starts_with_target_fraction,
        }


@dataclass
class DistanceStats:
    overall: DistanceSummary = field(default_factory=DistanceSummary)
    per_filter: Dict[str, DistanceSummary] = field(default_factory=dict)
    per_label: Dict[str, DistanceSummary] = field(default_factory=dict)

    def to_json(self) -> Dict:
        return {
            "overall": self.overall.to_json(),
            "per_filter": {k: v.to_json() for k, v in sorted(self.per_filter.items())},
            "per_label": {k: v.to_json() for k, v in sorted(self.per_label.items())},
        }


def distance_stats(hits: Iterable[FilterHit], data: Dataset) -> DistanceStats:
    """
    Token distances of detected n-grams from the target word.

    Raises:
        SenseCnnError: If a hit refers to an instance missing from ``data``
    """
    by_id = data.by_id()
    stats = DistanceStats()
    for hit in hits:
        inst = by_id.get(hit.instance_id)
        if inst is None:
            raise SenseCnnError("hit refers to an unknown instance", {"instance_id": hit.instance_id})
        kind, distance = classify_span(hit.span, inst.target_index)
        starts = hit.span[0] == inst.target_index
        stats.overall.add(kind, distance, starts)
        stats.per_filter.setdefault(hit.filter_name, DistanceSummary()).add(kind, distance, starts)
        stats.per_label.setdefault(inst.label, DistanceSummary()).add(kind, distance, starts)
    return stats


def hit_vectors(table: EmbeddingTable, hits_by_filter: Dict[FilterId, List[FilterHit]]):
    return {fid: [ngram_vector(table, h.ngram) for h in hits] for fid, hits in hits_by_filter.items()}


def export_report(
    hits_by_filter: Dict[FilterId, List[FilterHit]],
    vectors: Dict[FilterId, List[np.ndarray]],
    stats: DistanceStats,
    destination: Union[str, Path],
    dim: Optional[int] = None
) -> Dict[str, Path]:
    """
    Write the analysis files into ``destination``.

    Files:
        ngram_vectors.tsv: filter, label, n-gram and vector per hit
        feature_detectors.txt: each filter's hits with bracketed context
        feature_detectors.html: the same listing for the viewer
        distance_stats.json: distance statistics

    Raises:
        ReportWriteError: If a file cannot be written
    """
    from .reports import render_detectors_html, render_detectors_text

    destination = Path(destination)
    ordered = sorted(hits_by_filter)
    if dim is None:
        dim = next((len(v[0]) for v in vectors.values() if v), 0)

    header = ["filter", "label", "ngram"] + [f"v{i}" for i in range(1, dim + 1)]
    lines = ["\t".join(header)]
    for fid in ordered:
        for hit, vec in zip(hits_by_filter[fid], vectors.get(fid, [])):
            values = [repr(float(x)) for x in vec]
            lines.append("\t".join([hit.filter_name, hit.label, " ".join(hit.ngram)] + values))

    outputs = {
        "vectors": (destination / "ngram_vectors.tsv", "\n".join(lines) + "\n"),
        "text": (destination / "feature_detectors.txt", render_detectors_text(hits_by_filter, stats)),
        "html": (destination / "feature_detectors.html", render_detectors_html(hits_by_filter, stats)),
        "stats": (destination / "distance_stats.json", canonical_json(stats.to_json(), indent=2) + "\n"),
    }

    written = {}
    for key, (path, content) in outputs.items():
        try:
            destination.mkdir(parents=True, exist_ok=True)
            path.write_text(content, encoding='utf-8')
        except OSError as e:
            raise ReportWriteError(path, e.strerror or str(e)) from e
        written[key] = path
    return written
