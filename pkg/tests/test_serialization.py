"""
Tests for canonical JSON, digests, seed derivation and "did you mean" hints.
"""

import json
import pytest
import sys
from enum import Enum
from pathlib import Path

import numpy as np

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

from sensecnn.serialization import (
    canonical_json,
    derive_seed,
    hash_bytes,
    hash_file_content,
    hash_multiple_files,
    serialize_value,
)
from sensecnn.diagnostics import FuzzyMatcher, configure_logging, describe_counts


class Color(Enum):
    RED = "red"


class TestCanonicalJson:
    """Test deterministic JSON output."""

    def test_key_order_independent(self):
        """Equal mappings serialize identically whatever the insertion order."""
        assert canonical_json({"b": 1, "a": 2}) == canonical_json({"a": 2, "b": 1})

    def test_numpy_and_paths(self):
        """Numpy scalars, arrays, enums and paths are converted."""
        text = canonical_json({
            "x": np.float64(0.1),
            "n": np.int64(3),
            "v": np.array([1.5, 2.5]),
            "p": Path("a/b.txt"),
            "c": Color.RED,
        })
        assert json.loads(text) == {"x": 0.1, "n": 3, "v": [1.5, 2.5], "p": "a/b.txt", "c": "red"}

    def test_float_repr_round_trips(self):
        """Floats keep their shortest round-trip representation."""
        value = 0.1 + 0.2
        assert json.loads(canonical_json({"v": value}))["v"] == value

    def test_sets_are_sorted(self):
        """Sets become sorted lists."""
        assert serialize_value({"b", "a"}) == ["a", "b"]

    def test_nan_rejected(self):
        """NaN is not valid JSON."""
        with pytest.raises(ValueError):
            canonical_json({"v": float('nan')})

    def test_unknown_type_rejected(self):
        """Arbitrary objects raise TypeError."""
        with pytest.raises(TypeError):
            canonical_json({"v": object()})


class TestDigests:
    """Test content hashing."""

    def test_file_digest_matches_bytes(self, tmp_path):
        """Chunked file hashing agrees with hashing the bytes."""
        path = tmp_path / "vectors.txt"
        path.write_bytes(b"can 0.1 0.2\n" * 1000)
        assert hash_file_content(path) == hash_bytes(path.read_bytes())

    def test_missing_file(self, tmp_path):
        """Hashing a missing file raises FileNotFoundError."""
        with pytest.raises(FileNotFoundError):
            hash_file_content(tmp_path / "missing")

    def test_multiple_files_sorted(self, tmp_path):
        """Keys are posix paths in sorted order."""
        b = tmp_path / "b.jsonl"
        a = tmp_path / "a.jsonl"
        b.write_text("2")
        a.write_text("1")
        digests = hash_multiple_files([b, a])
        assert list(digests) == [a.as_posix(), b.as_posix()]


class TestDeriveSeed:
    """Test child seed derivation."""

    def test_stable(self):
        """Same inputs give the same seed."""
        assert derive_seed(7, "can", 2) == derive_seed(7, "can", 2)

    def test_keys_matter(self):
        """Different keys or parents give different seeds."""
        assert derive_seed(7, "can") != derive_seed(7, "may")
        assert derive_seed(7, "can") != derive_seed(8, "can")

    def test_non_negative_63_bit(self):
        """Seeds fit a signed 64-bit integer."""
        seed = derive_seed(123, "must")
        assert 0 <= seed < 2 ** 63


class TestDiagnostics:
    """Test suggestions and logging setup."""

    def test_close_matches(self):
        """Misspellings map to the closest known name."""
        assert FuzzyMatcher.suggestion_names("mpl", ["cnn", "mlp", "majority"])[0] == "mlp"

    def test_no_match(self):
        """Unrelated words give no suggestion."""
        assert FuzzyMatcher.suggestion_names("zzzz", ["cnn", "mlp"]) == []

    def test_describe_counts(self):
        """Counts print sorted by label."""
        assert describe_counts({"ep": 10, "de": 4}, "can") == "can: de=4, ep=10"

    def test_configure_logging_single_handler(self):
        """Calling twice installs one handler."""
        logger = configure_logging(1)
        logger = configure_logging(2)
        named = [h for h in logger.handlers if h.get_name() == "sensecnn-cli"]
        assert len(named) == 1
        assert logger.level == 10
