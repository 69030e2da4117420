"""
Tests for the Jinja2 report templates and the analysis viewer page.
"""

import pytest
import sys
from pathlib import Path

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

from sensecnn.exceptions import SenseCnnError
from sensecnn.introspect import FilterHit
from sensecnn.reports import render, render_detectors_html, render_detectors_text, render_results_text
from sensecnn.viewer import build_page, report_pages


RESULTS = {
    "title": "sensecnn cv",
    "model": "cnn",
    "per_verb": {
        "can": {"n": 10, "accuracy": 0.8, "baselines": {"majority": {"accuracy": 0.6}}},
        "may": {"n": 4, "accuracy": 0.5, "baselines": {"majority": {"accuracy": 0.75}}},
    },
    "baselines": ["majority"],
    "significance": [
        {"verb": "can", "pair": ["cnn", "majority"], "b": 5, "c": 1, "midp": 0.01},
        {"verb": "may", "pair": ["cnn", "majority"], "b": 0, "c": 1, "midp": 1.0},
    ],
    "alpha": 0.05,
    "micro": 0.7142857,
    "baselines_micro": {"majority": 0.6428571},
    "notes": ["no test corpus: scores are training accuracies"],
}


def hit(tokens, span, target_index=1, rank=1, value=1.5):
    return FilterHit(
        filter_id=(2, 0), instance_id=f"x{rank}", pooled_value=value, span=span,
        ngram=tuple(tokens[span[0]:span[1] + 1]), label="de", tokens=tuple(tokens),
        target_index=target_index, rank=rank,
    )


class TestResultsText:
    """Test the plain-text results table."""

    def test_rows_and_micro(self):
        """Each verb gets a row with percentages; micro closes the table."""
        text = render_results_text(RESULTS)
        assert text.startswith("sensecnn cv\n===========\n")
        can_line = next(line for line in text.splitlines() if line.startswith("can"))
        assert "80.00" in can_line
        assert "60.00*" in can_line
        may_line = next(line for line in text.splitlines() if line.startswith("may"))
        assert "75.00" in may_line and "*" not in may_line
        micro_line = next(line for line in text.splitlines() if line.startswith("micro"))
        assert "71.43" in micro_line and "64.29" in micro_line

    def test_significance_and_notes(self):
        """McNemar results and notes are listed."""
        text = render_results_text(RESULTS)
        assert "can: cnn vs majority  b=5 c=1 mid-p=0.0100" in text
        assert "  - no test corpus: scores are training accuracies" in text

    def test_without_baselines(self):
        """A bare document renders without optional sections."""
        text = render_results_text({"per_verb": {}, "micro": None})
        assert "Mid-p" not in text
        assert "Notes" not in text

    def test_missing_template(self):
        """Unknown templates raise a package error."""
        with pytest.raises(SenseCnnError):
            render("nope.j2")


class TestDetectorReports:
    """Test the feature-detector listings."""

    def test_text_brackets_span(self):
        """Hits show value, label and bracketed context."""
        hits = {(2, 0): [hit(["you", "can", "go"], (1, 2))]}
        text = render_detectors_text(hits)
        assert "filter 2-0 (region size 2)" in text
        assert " 1. 1.5000  de  x1  can go" in text
        assert "you [ can go ]" in text

    def test_html_marks_span_and_target(self):
        """Span tokens and the target word get their classes."""
        html = render_detectors_html({(2, 0): [hit(["you", "can", "go"], (1, 2))]})
        assert '<span class="span target">can</span>' in html
        assert '<span class="span">go</span>' in html
        assert 'id="filter-2-0"' in html

    def test_html_escapes_tokens(self):
        """Tokens are escaped in HTML."""
        html = render_detectors_html({(2, 0): [hit(["<b>", "can"], (0, 0), target_index=1)]})
        assert "&lt;b&gt;" in html
        assert "<b>" not in html.split("<body>", 1)[1]


class TestViewerPage:
    """Test the page the viewer shows."""

    def test_single_report(self, tmp_path):
        """A directory with one report returns it unchanged."""
        (tmp_path / "feature_detectors.html").write_text("<html>one</html>")
        assert build_page(tmp_path) == "<html>one</html>"

    def test_per_word_reports_combined(self, tmp_path):
        """Word subdirectories are combined into one index page."""
        for word in ("may", "can"):
            (tmp_path / word).mkdir()
            (tmp_path / word / "feature_detectors.html").write_text(f"<p>{word}</p>")
        assert [p.parent.name for p in report_pages(tmp_path)] == ["can", "may"]
        page = build_page(tmp_path)
        assert page.index('href="#word-can"') < page.index('href="#word-may"')
        assert 'srcdoc="&lt;p&gt;can&lt;/p&gt;"' in page

    def test_no_reports(self, tmp_path):
        """Directories without reports raise."""
        with pytest.raises(SenseCnnError):
            build_page(tmp_path)

    def test_missing_directory(self, tmp_path):
        """Missing directories raise."""
        with pytest.raises(SenseCnnError):
            build_page(tmp_path / "absent")
