"""
Accuracy, confusion matrices, micro-averaging and the mid-p McNemar test.

The McNemar test compares two classifiers on the same instances through
the discordant counts b (A right, B wrong) and c (A wrong, B right).
With N = b + c and X ~ Binomial(N, 1/2), the two-sided mid-p value is
2 * P(X >= max(b, c)) - P(X = max(b, c)), clamped to [0, 1]; N = 0 gives 1.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp
from scipy.stats import binom

from .exceptions import SenseCnnError


@dataclass
class EvalResult:
    """Counts for one set of predictions."""
    n: int
    correct: int
    accuracy: float
    confusion: np.ndarray  # rows = gold, columns = prediction, over ``labels``
    labels: Tuple[str, ...]
    predictions: List[Tuple[str, str, str]] = field(default_factory=list)  # (id, gold, pred)

    def to_json(self) -> Dict:
        return {
            "n": self.n,
            "correct": self.correct,
            "accuracy": self.accuracy,
            "labels": list(self.labels),
            "confusion": self.confusion.tolist(),
        }


def evaluate(
    preds: Sequence[str],
    golds: Sequence[str],
    label_set: Sequence[str],
    ids: Optional[Sequence[str]] = None,
    gold_sets: Optional[Sequence[Sequence[str]]] = None
) -> EvalResult:
    """
    Score predictions against gold labels.

    Args:
        preds: Predicted labels
        golds: Gold labels (the confusion matrix uses these)
        label_set: Training label set; gold labels outside it are appended
            to the confusion axes and can never be predicted
        ids: Optional instance ids, kept in ``predictions``
        gold_sets: Optional acceptable labels per instance; a prediction
            matching any of them counts as correct

    Raises:
        SenseCnnError: On empty input or mismatched lengths
    """
    if len(preds) != len(golds):
        raise SenseCnnError(
            "predictions and gold labels differ in length",
            {"predictions": len(preds), "golds": len(golds)},
        )
    if not golds:
        raise SenseCnnError("cannot evaluate an empty prediction list")
    if gold_sets is not None and len(gold_sets) != len(golds):
        raise SenseCnnError("gold_sets and gold labels differ in length")
    ids = list(ids) if ids is not None else [str(i) for i in range(len(golds))]

    labels = list(label_set)
    for label in sorted(set(golds) | set(preds)):
        if label not in labels:
            labels.append(label)
    index = {label: i for i, label in enumerate(labels)}

    confusion = np.zeros((len(labels), len(labels)), dtype=np.int64)
    correct = 0
    for k, (p, g) in enumerate(zip(preds, golds)):
        confusion[index[g], index[p]] += 1
        accepted = gold_sets[k] if gold_sets is not None else (g,)
        if p in accepted:
            correct += 1

    return EvalResult(
        n=len(golds),
        correct=correct,
        accuracy=correct / len(golds),
        confusion=confusion,
        labels=tuple(labels),
        predictions=list(zip(ids, golds, preds)),
    )


def evaluate_by_genre(
    preds: Sequence[str],
    golds: Sequence[str],
    genres: Sequence[Optional[str]],
    label_set: Sequence[str],
    gold_sets: Optional[Sequence[Sequence[str]]] = None
) -> Dict[str, EvalResult]:
    """
    Separate results per genre tag (untagged instances under '-').

    With ``gold_sets`` each genre is scored any-match, so per-genre correct
    counts add up to the overall count.
    """
    groups: Dict[str, List[int]] = {}
    for i, genre in enumerate(genres):
        groups.setdefault(genre or "-", []).append(i)
    return {
        genre: evaluate(
            [preds[i] for i in idx], [golds[i] for i in idx], label_set,
            gold_sets=[gold_sets[i] for i in idx] if gold_sets is not None else None,
        )
        for genre, idx in sorted(groups.items())
    }


def micro_average(results: Sequence[EvalResult]) -> float:
    """Instance-weighted accuracy over several classifiers."""
    if not results:
        raise SenseCnnError("micro average over no results")
    total = sum(r.n for r in results)
    return sum(r.correct for r in results) / total


@dataclass
class PairedComparison:
    """Discordant counts and mid-p value for classifiers A and B."""
    b: int
    c: int
    midp: float
    pair: Tuple[str, str] = ("A", "B")

    def significant(self, alpha: float = 0.05) -> bool:
        return self.midp < alpha

    def to_json(self) -> Dict:
        return {"pair": list(self.pair), "b": self.b, "c": self.c, "midp": self.midp}


def midp_value(b: int, c: int) -> float:
    """
    Mid-p McNemar value from the discordant counts.

    The binomial tail is summed in log space from the exact log-pmf.

    Example:
        >>> round(midp_value(5, 1), 12)
        0.125
    """
    if b < 0 or c < 0:
        raise ValueError("discordant counts must be non-negative")
    n = b + c
    if n == 0:
        return 1.0
    k = max(b, c)
    log_pmf = binom.logpmf(np.arange(k, n + 1), n, 0.5)
    tail = float(np.exp(logsumexp(log_pmf)))
    point = float(np.exp(log_pmf[0]))
    return float(min(1.0, max(0.0, 2.0 * tail - point)))


def mcnemar_midp(
    a_preds: Sequence[str],
    b_preds: Sequence[str],
    golds: Sequence[str],
    pair: Tuple[str, str] = ("A", "B"),
    gold_sets: Optional[Sequence[Sequence[str]]] = None
) -> PairedComparison:
    """
    Paired mid-p McNemar test on identical instances.

    Raises:
        SenseCnnError: On mismatched lengths
    """
    if not (len(a_preds) == len(b_preds) == len(golds)):
        raise SenseCnnError(
            "paired predictions differ in length",
            {"a": len(a_preds), "b": len(b_preds), "golds": len(golds)},
        )
    accepted = gold_sets if gold_sets is not None else [(g,) for g in golds]
    b = c = 0
    for pa, pb, ok in zip(a_preds, b_preds, accepted):
        a_right = pa in ok
        b_right = pb in ok
        if a_right and not b_right:
            b += 1
        elif b_right and not a_right:
            c += 1
    return PairedComparison(b=b, c=c, midp=midp_value(b, c), pair=pair)
