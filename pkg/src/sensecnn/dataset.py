"""
Corpus representation and experimental protocol helpers.

A corpus is JSON Lines, one instance per line::

    {"id": "mpqa-17", "tokens": ["You", "can", "enter", "now"], "label": "de",
     "target_index": 1, "genre": "news"}

Optional fields: ``labels`` (several gold senses, lexical-sample data),
``target_count`` (number of marked target words, default 1) and
``target`` (the grouping key for per-word classifiers; defaults to the
lowercased target token).

Class indices follow the lexicographic order of the label set.
"""

from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import BinaryIO, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union
import io
import json
import logging

from .diagnostics import describe_counts
from .exceptions import CorpusFormatError, SenseCnnError
from .numerics import SeededRng

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Instance:
    """One tokenized sentence with a sense-labelled target word."""
    id: str
    tokens: Tuple[str, ...]
    label: str
    target_index: int
    genre: Optional[str] = None
    labels: Tuple[str, ...] = ()
    target_count: int = 1
    target: Optional[str] = None

    @property
    def gold_labels(self) -> Tuple[str, ...]:
        """Every acceptable sense (just ``label`` for single-label data)."""
        return self.labels or (self.label,)

    @property
    def target_word(self) -> str:
        return self.target or self.tokens[self.target_index].lower()

    def to_json(self) -> Dict:
        record = {
            "id": self.id,
            "tokens": list(self.tokens),
            "label": self.label,
            "target_index": self.target_index,
        }
        if self.genre is not None:
            record["genre"] = self.genre
        if self.labels:
            record["labels"] = list(self.labels)
        if self.target_count != 1:
            record["target_count"] = self.target_count
        if self.target is not None:
            record["target"] = self.target
        return record


class Dataset:
    """
    Ordered, immutable collection of instances with a fixed label set.

    Example:
        >>> ds = Dataset([Instance('a', ('can', 'go'), 'de', 0),
        ...               Instance('b', ('may', 'be'), 'ep', 0)])
        >>> ds.label_set
        ('de', 'ep')
    """

    def __init__(
        self,
        instances: Iterable[Instance],
        label_set: Optional[Sequence[str]] = None,
        target_word: Optional[str] = None
    ):
        self.instances: Tuple[Instance, ...] = tuple(instances)
        observed = {label for inst in self.instances for label in inst.gold_labels}
        if label_set is None:
            label_set = sorted(observed)
        else:
            missing = observed - set(label_set)
            if missing:
                raise SenseCnnError(
                    "label_set does not cover every instance label",
                    {"missing": sorted(missing)},
                )
        self.label_set: Tuple[str, ...] = tuple(label_set)
        self.target_word = target_word
        self._index = {label: i for i, label in enumerate(self.label_set)}

    def __len__(self) -> int:
        return len(self.instances)

    def __iter__(self) -> Iterator[Instance]:
        return iter(self.instances)

    def __getitem__(self, i: int) -> Instance:
        return self.instances[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.instances == other.instances and self.label_set == other.label_set

    def __repr__(self) -> str:
        return f"Dataset(n={len(self)}, labels={list(self.label_set)}, target={self.target_word!r})"

    def label_index(self, label: str) -> int:
        return self._index[label]

    def labels(self) -> List[str]:
        return [inst.label for inst in self.instances]

    def label_counts(self) -> Dict[str, int]:
        counts = Counter(inst.label for inst in self.instances)
        return {label: counts.get(label, 0) for label in self.label_set}

    def by_id(self) -> Dict[str, Instance]:
        return {inst.id: inst for inst in self.instances}

    def with_instances(self, instances: Iterable[Instance]) -> "Dataset":
        """Same label set and target word, different instances."""
        return Dataset(instances, self.label_set, self.target_word)

    def concat(self, *others: "Dataset") -> "Dataset":
        """Blend corpora; the label set becomes the sorted union."""
        instances = list(self.instances)
        labels = set(self.label_set)
        for other in others:
            instances.extend(other.instances)
            labels.update(other.label_set)
        return Dataset(instances, sorted(labels), self.target_word)

    def group_by_target(self) -> Dict[str, "Dataset"]:
        """One dataset per target word, in sorted key order."""
        groups: Dict[str, List[Instance]] = {}
        for inst in self.instances:
            groups.setdefault(inst.target_word, []).append(inst)
        return {
            word: Dataset(groups[word], target_word=word)
            for word in sorted(groups)
        }


def _require(record: Dict, key: str, kind, line_number: int, name: Optional[str]):
    if key not in record:
        raise CorpusFormatError(f"missing field '{key}'", line_number, name)
    value = record[key]
    if not isinstance(value, kind) or isinstance(value, bool):
        raise CorpusFormatError(f"field '{key}' has the wrong type", line_number, name)
    return value


def _parse_record(record: Dict, line_number: int, name: Optional[str]) -> Instance:
    if not isinstance(record, dict):
        raise CorpusFormatError("line is not a JSON object", line_number, name)

    inst_id = _require(record, 'id', str, line_number, name)
    tokens = _require(record, 'tokens', list, line_number, name)
    if not tokens or not all(isinstance(t, str) for t in tokens):
        raise CorpusFormatError("'tokens' must be a non-empty list of strings", line_number, name)

    labels = record.get('labels') or []
    if not isinstance(labels, list) or not all(isinstance(x, str) for x in labels):
        raise CorpusFormatError("'labels' must be a list of strings", line_number, name)
    if 'label' in record or not labels:
        label = _require(record, 'label', str, line_number, name)
    else:
        label = labels[0]

    target_index = _require(record, 'target_index', int, line_number, name)
    if not 0 <= target_index < len(tokens):
        raise CorpusFormatError(
            f"target_index {target_index} outside sentence of {len(tokens)} tokens",
            line_number, name,
        )

    genre = record.get('genre')
    if genre is not None and not isinstance(genre, str):
        raise CorpusFormatError("'genre' must be a string", line_number, name)
    target = record.get('target')
    if target is not None and not isinstance(target, str):
        raise CorpusFormatError("'target' must be a string", line_number, name)
    target_count = record.get('target_count', 1)
    if not isinstance(target_count, int) or target_count < 1:
        raise CorpusFormatError("'target_count' must be a positive integer", line_number, name)

    if labels and label not in labels:
        labels = [label] + labels

    return Instance(
        id=inst_id,
        tokens=tuple(tokens),
        label=label,
        target_index=target_index,
        genre=genre,
        labels=tuple(labels) if len(labels) > 1 else (),
        target_count=target_count,
        target=target,
    )


def parse_instances(source: Union[BinaryIO, bytes], name: Optional[str] = None) -> Dataset:
    """
    Parse a JSONL corpus, keeping file order.

    Raises:
        CorpusFormatError: On invalid JSON, missing fields, a bad target index or a duplicate id
    """
    if isinstance(source, bytes):
        source = io.BytesIO(source)

    instances: List[Instance] = []
    seen: Dict[str, int] = {}
    for line_number, raw in enumerate(source, 1):
        try:
            line = raw.decode('utf-8').strip()
        except UnicodeDecodeError as e:
            raise CorpusFormatError(f"invalid UTF-8: {e}", line_number, name)
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise CorpusFormatError(f"invalid JSON: {e.msg}", line_number, name)
        inst = _parse_record(record, line_number, name)
        if inst.id in seen:
            raise CorpusFormatError(
                f"duplicate id '{inst.id}' (first seen on line {seen[inst.id]})",
                line_number, name,
            )
        seen[inst.id] = line_number
        instances.append(inst)

    return Dataset(instances)


def load_dataset(path: Union[str, Path]) -> Dataset:
    """Read a JSONL corpus file."""
    path = Path(path)
    if not path.exists():
        raise SenseCnnError(f"Corpus not found: {path}")
    with open(path, 'rb') as f:
        return parse_instances(f, name=str(path))


def serialize_instances(ds: Dataset) -> bytes:
    """JSONL bytes that :func:`parse_instances` reads back to an equal dataset."""
    lines = [json.dumps(inst.to_json(), ensure_ascii=False, sort_keys=True) for inst in ds]
    return ("\n".join(lines) + ("\n" if lines else "")).encode('utf-8')


def write_dataset(ds: Dataset, path: Union[str, Path]) -> None:
    Path(path).write_bytes(serialize_instances(ds))


@dataclass
class FoldPlan:
    """Assignment of every instance id to one of ``k`` folds."""
    k: int
    assignments: Dict[str, int]
    seed: int

    def test_ids(self, fold: int) -> List[str]:
        return [i for i, f in self.assignments.items() if f == fold]

    def split(self, ds: Dataset, fold: int) -> Tuple[Dataset, Dataset]:
        """(train, test) for ``fold``, both in dataset order."""
        if not 0 <= fold < self.k:
            raise SenseCnnError(f"fold {fold} out of range for k={self.k}")
        train = [inst for inst in ds if self.assignments[inst.id] != fold]
        test = [inst for inst in ds if self.assignments[inst.id] == fold]
        return ds.with_instances(train), ds.with_instances(test)

    def fold_sizes(self) -> List[int]:
        counts = Counter(self.assignments.values())
        return [counts.get(f, 0) for f in range(self.k)]


def stratified_folds(ds: Dataset, k: int, seed: int) -> FoldPlan:
    """
    Stratified k-fold plan.

    Per class (in label-set order), the instances are shuffled with the
    seed and dealt round-robin to the folds. Dealing continues from the
    fold where the previous class stopped, so fold sizes differ by at most
    one overall as well as per class.
    """
    if k < 2:
        raise SenseCnnError(f"k must be >= 2, got {k}")
    if len(ds) == 0:
        raise SenseCnnError("cannot build folds over an empty dataset")

    rng = SeededRng(seed)
    by_label: Dict[str, List[Instance]] = {label: [] for label in ds.label_set}
    for inst in ds:
        by_label[inst.label].append(inst)
    present = [label for label in ds.label_set if by_label.get(label)]

    smallest = min(len(v) for v in by_label.values() if v)
    if k > smallest:
        logger.warning(
            "k=%d exceeds the smallest class size %d; some folds lack that class (%s)",
            k, smallest, describe_counts(ds.label_counts()),
        )

    assignments: Dict[str, int] = {}
    cursor = 0
    for label in ds.label_set:
        members = by_label[label]
        for pos in rng.permutation(len(members)):
            assignments[members[pos].id] = cursor % k
            cursor += 1

    return FoldPlan(k=k, assignments=assignments, seed=seed)


def train_validation_split(ds: Dataset, validation_fraction: float, seed: int) -> Tuple[Dataset, Dataset]:
    """
    Stratified split, e.g. 80:20 for ``validation_fraction=0.2``.

    Realized as one held-out fold of a stratified plan with
    ``k = round(1 / validation_fraction)``.
    """
    k = max(2, int(round(1.0 / validation_fraction)))
    plan = stratified_folds(ds, k, seed)
    return plan.split(ds, 0)


def balance(ds: Dataset, mode: str, seed: int) -> Dataset:
    """
    Equalize class counts by over- or undersampling.

    Args:
        ds: Dataset with at least two classes present
        mode: 'oversample' / 'over' or 'undersample' / 'under'
        seed: Sampling seed

    Returns:
        New dataset; oversampled duplicates get ids suffixed ``#dup<k>``
    """
    mode = {'over': 'oversample', 'under': 'undersample'}.get(mode, mode)
    if mode not in ('oversample', 'undersample'):
        raise SenseCnnError(f"unknown balance mode '{mode}'")

    counts = {label: c for label, c in ds.label_counts().items() if c > 0}
    if len(counts) < 2:
        raise SenseCnnError("balancing needs at least two classes present", {"counts": counts})

    rng = SeededRng(seed)
    by_label: Dict[str, List[Instance]] = {label: [] for label in counts}
    for inst in ds:
        by_label[inst.label].append(inst)
    present = [label for label in ds.label_set if by_label.get(label)]

    result: List[Instance] = []
    if mode == 'oversample':
        target = max(counts.values())
        for label in present:
            members = by_label[label]
            result.extend(members)
            for k in range(target - len(members)):
                picked = members[rng.choice_index(len(members))]
                result.append(replace(picked, id=f"{picked.id}#dup{k}"))
    else:
        target = min(counts.values())
        for label in present:
            members = by_label[label]
            keep = sorted(rng.permutation(len(members))[:target]) if len(members) > target \
                else range(len(members))
            result.extend(members[i] for i in keep)

    return ds.with_instances(result)


class MajorityClassifier:
    """Always predicts the most frequent training sense."""

    kind = "majority"

    def __init__(self, label: str, label_set: Sequence[str]):
        self.label = label
        self.label_set = tuple(label_set)

    def predict_labels(self, ds: Dataset) -> List[str]:
        return [self.label] * len(ds)


class RandomClassifier:
    """Predicts a sense drawn uniformly from the training label set."""

    kind = "random"

    def __init__(self, label_set: Sequence[str], seed: int):
        self.label_set = tuple(label_set)
        self.seed = seed

    def predict_labels(self, ds: Dataset) -> List[str]:
        rng = SeededRng(self.seed)
        return [self.label_set[rng.choice_index(len(self.label_set))] for _ in range(len(ds))]


def majority_baseline(train: Dataset) -> Tuple[str, MajorityClassifier]:
    """
    Most frequent training label, ties broken by label-set order.

    Raises:
        SenseCnnError: If ``train`` is empty
    """
    if len(train) == 0:
        raise SenseCnnError("majority baseline needs training data")
    counts = train.label_counts()
    label = max(train.label_set, key=lambda lab: (counts[lab], -train.label_index(lab)))
    return label, MajorityClassifier(label, train.label_set)


@dataclass(frozen=True)
class SynthCueSpec:
    """
    Recipe for a corpus whose label is decided by one planted n-gram.

    ``cue_ngrams[c]`` is planted in every sentence of class ``c``; filler
    tokens are drawn from ``vocab``. Index 0 holds ``target_token``.
    """
    classes: int
    cue_ngrams: Tuple[Tuple[str, ...], ...]
    n_per_class: int
    sentence_len: int
    vocab: Tuple[str, ...]
    target_token: str = "MODAL"
    label_names: Tuple[str, ...] = field(default=())

    def label_of(self, c: int) -> str:
        return self.label_names[c] if self.label_names else f"c{c}"


def synth_cue_spec(
    classes: int = 3,
    vocab_size: int = 200,
    sentence_len: int = 12,
    n_per_class: int = 100,
    cue_len: int = 3,
    order_only: bool = False
) -> SynthCueSpec:
    """
    Build a cue recipe with disjoint cue and filler vocabularies.

    With ``order_only`` every class uses the same cue tokens in a
    different order, so the bag of words carries no label information.
    """
    vocab = tuple(f"w{i:03d}" for i in range(vocab_size))
    if order_only:
        base = tuple(f"cue{j}" for j in range(cue_len))
        orders = [tuple(base[(j + shift) % cue_len] for j in range(cue_len)) for shift in range(cue_len)]
        orders += [tuple(reversed(o)) for o in orders]
        if classes > len(orders):
            raise SenseCnnError(f"only {len(orders)} distinct orders of {cue_len} cue tokens")
        cues = tuple(orders[:classes])
    else:
        cues = tuple(tuple(f"cue{c}_{j}" for j in range(cue_len)) for c in range(classes))
    return SynthCueSpec(
        classes=classes,
        cue_ngrams=cues,
        n_per_class=n_per_class,
        sentence_len=sentence_len,
        vocab=vocab,
    )


def synth_cue_dataset(spec: SynthCueSpec, seed: int) -> Dataset:
    """
    Generate a corpus where each class is identified by its planted cue.

    Every sentence starts with the target token, continues with random
    filler and carries its class's cue at a random position after index 0.
    """
    if len(set(spec.cue_ngrams)) != len(spec.cue_ngrams) or len(spec.cue_ngrams) != spec.classes:
        raise SenseCnnError("cue n-grams must be pairwise distinct, one per class")
    cue_len = max(len(c) for c in spec.cue_ngrams)
    if spec.sentence_len < cue_len + 1:
        raise SenseCnnError(f"sentence_len must be >= {cue_len + 1}")

    rng = SeededRng(seed)
    instances = []
    for c in range(spec.classes):
        cue = spec.cue_ngrams[c]
        for i in range(spec.n_per_class):
            filler = [spec.vocab[j] for j in rng.integers(0, len(spec.vocab), spec.sentence_len - 1 - len(cue))]
            position = int(rng.integers(0, len(filler) + 1))
            body = filler[:position] + list(cue) + filler[position:]
            instances.append(Instance(
                id=f"{spec.label_of(c)}-{i:04d}",
                tokens=tuple([spec.target_token] + body),
                label=spec.label_of(c),
                target_index=0,
            ))
    return Dataset(instances, target_word=spec.target_token.lower())


def contains_ngram(tokens: Sequence[str], ngram: Sequence[str]) -> bool:
    """Whether ``ngram`` occurs contiguously in ``tokens``."""
    n = len(ngram)
    return any(tuple(tokens[i:i + n]) == tuple(ngram) for i in range(len(tokens) - n + 1))
