"""
Tests for accuracy, confusion matrices and the mid-p McNemar test.
"""

import pytest
import sys
from pathlib import Path

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

from sensecnn.evaluation import (
    evaluate,
    evaluate_by_genre,
    mcnemar_midp,
    micro_average,
    midp_value,
)
from sensecnn.exceptions import SenseCnnError


class TestEvaluate:
    """Test single-classifier scoring."""

    def test_accuracy_and_confusion(self):
        """Rows are gold labels, columns predictions."""
        result = evaluate(["de", "ep", "ep"], ["de", "de", "ep"], ["de", "ep"])
        assert result.correct == 2
        assert result.accuracy == pytest.approx(2 / 3)
        assert result.confusion.tolist() == [[1, 1], [0, 1]]

    def test_unseen_gold_label(self):
        """Test labels missing from training are appended and always wrong."""
        result = evaluate(["de", "de"], ["de", "dy"], ["de", "ep"])
        assert result.labels == ("de", "ep", "dy")
        assert result.correct == 1
        assert result.confusion[2, 0] == 1

    def test_any_match(self):
        """A prediction matching any acceptable sense is correct."""
        result = evaluate(["s2", "s1"], ["s1", "s1"], ["s1", "s2"], gold_sets=[("s1", "s2"), ("s1",)])
        assert result.correct == 2

    def test_predictions_kept(self):
        """Instance ids are paired with gold and prediction."""
        result = evaluate(["de"], ["ep"], ["de", "ep"], ids=["x1"])
        assert result.predictions == [("x1", "ep", "de")]

    def test_length_mismatch(self):
        """Lengths must agree."""
        with pytest.raises(SenseCnnError):
            evaluate(["de"], ["de", "ep"], ["de", "ep"])

    def test_empty(self):
        """Nothing to score is an error."""
        with pytest.raises(SenseCnnError):
            evaluate([], [], ["de"])

    def test_by_genre(self):
        """Untagged instances group under '-'."""
        results = evaluate_by_genre(["de", "ep", "de"], ["de", "de", "de"], ["news", None, "news"], ["de", "ep"])
        assert list(results) == ["-", "news"]
        assert results["news"].accuracy == 1.0
        assert results["-"].accuracy == 0.0

    def test_by_genre_any_match(self):
        """With gold sets each genre scores any-match and the counts add up."""
        preds = ["ep", "ep", "de", "ep"]
        golds = ["de", "de", "de", "ep"]
        gold_sets = [("de", "ep"), ("de",), ("de",), ("ep",)]
        genres = ["news", "news", "fiction", "fiction"]
        overall = evaluate(preds, golds, ["de", "ep"], gold_sets=gold_sets)
        results = evaluate_by_genre(preds, golds, genres, ["de", "ep"], gold_sets)
        assert results["news"].correct == 1
        assert results["fiction"].correct == 2
        assert sum(r.correct for r in results.values()) == overall.correct == 3

    def test_to_json(self):
        """JSON form carries counts and the confusion matrix."""
        doc = evaluate(["de"], ["de"], ["de", "ep"]).to_json()
        assert doc == {"n": 1, "correct": 1, "accuracy": 1.0, "labels": ["de", "ep"], "confusion": [[1, 0], [0, 0]]}


class TestMicroAverage:
    """Test instance-weighted accuracy."""

    def test_weighted_by_size(self):
        """Larger classifiers weigh more."""
        a = evaluate(["x"] * 10, ["x"] * 10, ["x"])
        b = evaluate(["x", "y"], ["y", "y"], ["x", "y"])
        assert micro_average([a, b]) == pytest.approx(11 / 12)

    def test_no_results(self):
        """An empty list has no average."""
        with pytest.raises(SenseCnnError):
            micro_average([])


class TestMcNemar:
    """Test the mid-p McNemar test."""

    def test_no_discordance(self):
        """b = c = 0 gives p = 1."""
        assert midp_value(0, 0) == 1.0

    def test_known_value(self):
        """b=5, c=1: 2 * 7/64 - 6/64 = 0.125."""
        assert midp_value(5, 1) == pytest.approx(0.125)

    def test_symmetric(self):
        """Swapping b and c does not change p."""
        assert midp_value(9, 2) == pytest.approx(midp_value(2, 9))

    def test_equal_counts(self):
        """b = c is not evidence of a difference."""
        assert midp_value(4, 4) == pytest.approx(1.0)

    def test_clamped(self):
        """Values stay within [0, 1]."""
        for b in range(6):
            for c in range(6):
                assert 0.0 <= midp_value(b, c) <= 1.0

    def test_large_counts_stable(self):
        """Large discordant counts do not overflow."""
        p = midp_value(600, 400)
        assert 0.0 < p < 1e-9

    def test_negative_rejected(self):
        """Counts are non-negative."""
        with pytest.raises(ValueError):
            midp_value(-1, 2)

    def test_discordant_counts(self):
        """b counts A right/B wrong, c the reverse."""
        golds = ["de", "de", "ep", "ep", "ep"]
        a = ["de", "de", "ep", "de", "ep"]
        b = ["de", "ep", "de", "ep", "ep"]
        comparison = mcnemar_midp(a, b, golds, pair=("cnn", "majority"))
        assert (comparison.b, comparison.c) == (2, 1)
        assert comparison.to_json()["pair"] == ["cnn", "majority"]
        assert not comparison.significant()

    def test_any_match_counts(self):
        """Gold sets decide correctness for both classifiers."""
        comparison = mcnemar_midp(["s2"], ["s3"], ["s1"], gold_sets=[("s1", "s2")])
        assert (comparison.b, comparison.c) == (1, 0)

    def test_length_mismatch(self):
        """Paired predictions must align."""
        with pytest.raises(SenseCnnError):
            mcnemar_midp(["a"], ["a", "b"], ["a"])
