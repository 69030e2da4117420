"""
Tests for the embedding table and the text vector format.

Tests for:
- Parsing (header, dimension checks, duplicates, restriction)
- Variance-matched OOV vectors and their caching
- Sentence matrices, copies and checkpoint deltas
"""

import pytest
import sys
from pathlib import Path

import numpy as np

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

from sensecnn.embeddings import (
    EmbeddingTable,
    RowSource,
    dump_embeddings,
    load_embeddings,
    oov_bound_from_table,
)
from sensecnn.exceptions import EmbeddingFormatError, SenseCnnError, ShapeMismatchError


VECTORS = b"""3 2
can 1.0 -1.0
may 0.5 0.5
must -0.5 2.0
"""


class TestLoadEmbeddings:
    """Test the text format parser."""

    def test_header_and_rows(self):
        """A header line is skipped and every vector is loaded."""
        table = load_embeddings(VECTORS, 2)
        assert table.n_pretrained == 3
        assert table.vector("may").tolist() == [0.5, 0.5]

    def test_without_header(self):
        """The header is optional."""
        table = load_embeddings(b"can 1 2\nmay 3 4\n", 2)
        assert table.n_pretrained == 2

    def test_header_dimension_mismatch(self):
        """A header declaring another dimension is rejected."""
        with pytest.raises(EmbeddingFormatError) as exc_info:
            load_embeddings(VECTORS, 3)
        assert exc_info.value.line_number == 1

    def test_row_dimension_mismatch(self):
        """A row with the wrong number of values reports its line."""
        with pytest.raises(EmbeddingFormatError) as exc_info:
            load_embeddings(b"can 1 2\nmay 3\n", 2)
        assert exc_info.value.line_number == 2
        assert "may" in str(exc_info.value)

    def test_unparsable_value(self):
        """Non-numeric values are rejected."""
        with pytest.raises(EmbeddingFormatError):
            load_embeddings(b"can 1 abc\n", 2)

    def test_empty_source(self):
        """An empty file is an error."""
        with pytest.raises(EmbeddingFormatError):
            load_embeddings(b"", 2)

    def test_header_without_vectors(self):
        """A header alone holds no vectors and is an error."""
        with pytest.raises(EmbeddingFormatError) as exc_info:
            load_embeddings(b"0 3\n", 3)
        assert "no vectors" in str(exc_info.value)

    def test_repeated_spaces(self):
        """Runs of spaces and tabs separate fields like single spaces."""
        table = load_embeddings(b"can  1.0   -1.0 \nmay\t0.5 0.5\n", 2)
        assert table.vector("can").tolist() == [1.0, -1.0]
        assert table.vector("may").tolist() == [0.5, 0.5]

    def test_first_duplicate_wins(self):
        """Later rows of a duplicated token are ignored and counted."""
        table = load_embeddings(b"can 1 1\ncan 2 2\n", 2)
        assert table.vector("can").tolist() == [1.0, 1.0]
        assert table.duplicate_count == 1

    def test_from_path(self, tmp_path):
        """Paths are read as UTF-8 files."""
        path = tmp_path / "vectors.txt"
        path.write_bytes(VECTORS)
        assert load_embeddings(path, 2).n_pretrained == 3

    def test_restriction_keeps_full_file_bound(self):
        """Restricting the vocabulary does not change the OOV bound."""
        full = load_embeddings(VECTORS, 2)
        restricted = load_embeddings(VECTORS, 2, restrict_to={"can"})
        assert restricted.n_pretrained == 1
        assert "may" not in restricted.vocab
        assert restricted.oov_bound == pytest.approx(full.oov_bound)

    def test_restriction_matches_lowercase(self):
        """Tokens are kept when their lowercased form is wanted."""
        table = load_embeddings(b"Can 1 2\n", 2, restrict_to={"can"})
        assert table.n_pretrained == 1


class TestOovVectors:
    """Test variance-matched out-of-vocabulary rows."""

    def test_bound_matches_variance(self):
        """a = sqrt(3 var) over every component of the loaded vectors."""
        table = load_embeddings(VECTORS, 2)
        values = np.array([1.0, -1.0, 0.5, 0.5, -0.5, 2.0])
        assert oov_bound_from_table(table) == pytest.approx(np.sqrt(3 * values.var()))
        assert table.oov_bound == pytest.approx(np.sqrt(3 * values.var()))

    def test_bound_needs_vectors(self):
        """A table without pre-trained rows has no variance to match."""
        with pytest.raises(SenseCnnError):
            oov_bound_from_table(EmbeddingTable.random_init(4, 0.1))

    def test_oov_vector_is_cached(self):
        """An unknown word keeps the vector drawn on first use."""
        table = load_embeddings(VECTORS, 2, seed=3)
        first = table.vector("shall")
        assert np.array_equal(first, table.vector("shall"))
        assert np.all(np.abs(first) <= table.oov_bound)
        assert len(table) == 4

    def test_oov_draws_reproducible(self):
        """The same seed draws the same OOV vectors."""
        a = load_embeddings(VECTORS, 2, seed=5)
        b = load_embeddings(VECTORS, 2, seed=5)
        assert np.array_equal(a.vector("xyz"), b.vector("xyz"))

    def test_lowercase_fallback(self):
        """Unknown capitalized forms fall back to the lowercased entry."""
        table = load_embeddings(VECTORS, 2)
        assert table.vector("Can").tolist() == [1.0, -1.0]

    def test_random_init_sources(self):
        """Every row of a random table is marked random-init."""
        table = EmbeddingTable.random_init(3, 0.25, seed=1)
        sm = table.embed_sentence(["you", "can", "go"])
        assert sm.row_sources == [RowSource.RANDOM_INIT] * 3
        assert np.all(np.abs(sm.matrix) <= 0.25)


class TestSentenceMatrix:
    """Test sentence input matrices."""

    def test_rows_follow_tokens(self):
        """Row i is the vector of token i, repeated tokens share a row."""
        table = load_embeddings(VECTORS, 2)
        sm = table.embed_sentence(["can", "new", "can"])
        assert sm.matrix.shape == (3, 2)
        assert sm.row_sources == [RowSource.PRETRAINED, RowSource.OOV, RowSource.PRETRAINED]
        assert sm.row_ids[0] == sm.row_ids[2]
        assert np.array_equal(sm.matrix[0], sm.matrix[2])

    def test_matrix_is_a_copy(self):
        """Editing a sentence matrix leaves the table alone."""
        table = load_embeddings(VECTORS, 2)
        sm = table.embed_sentence(["can"])
        sm.matrix[0] = 99.0
        assert table.vector("can").tolist() == [1.0, -1.0]

    def test_empty_sentence(self):
        """An empty token list cannot be embedded."""
        with pytest.raises(SenseCnnError):
            EmbeddingTable.random_init(2, 0.1).embed_sentence([])


class TestTableState:
    """Test warming, copies and deltas."""

    def test_warm_counts_new_rows(self):
        """Warming materializes each unknown token once."""
        table = load_embeddings(VECTORS, 2)
        assert table.warm([["can", "x", "y"], ["x", "z"]]) == 3
        assert table.warm([["x"]]) == 0

    def test_copy_is_independent(self):
        """Copies share nothing mutable and continue the same OOV stream."""
        table = load_embeddings(VECTORS, 2, seed=2)
        clone = table.copy()
        clone.matrix[0] = 0.0
        assert table.vector("can").tolist() == [1.0, -1.0]
        assert np.array_equal(table.vector("new"), clone.vector("new"))

    def test_delta_round_trip(self):
        """Applying a delta to the base reproduces changed and OOV rows."""
        base = load_embeddings(VECTORS, 2, seed=4)
        trained = base.copy()
        trained.warm([["oov1", "oov2"]])
        trained.matrix[trained.vocab["may"]] += 0.5
        delta = trained.delta_since(base.matrix[:base.n_pretrained])
        assert set(delta) == {"may", "oov1", "oov2"}

        restored = base.copy()
        restored.apply_delta(delta)
        for token in ("can", "may", "must", "oov1", "oov2"):
            assert np.array_equal(restored.vector(token), trained.vector(token))

    def test_delta_shape_checked(self):
        """Delta rows must have the table's dimension."""
        with pytest.raises(ShapeMismatchError):
            load_embeddings(VECTORS, 2).apply_delta({"can": [1.0, 2.0, 3.0]})

    def test_dump_and_reload(self, tmp_path):
        """Dumped tables (OOV rows included) load back with the same vectors."""
        table = load_embeddings(VECTORS, 2, seed=8)
        table.warm([["novel"]])
        path = tmp_path / "dump.txt"
        dump_embeddings(table, path)
        reloaded = load_embeddings(path, 2)
        assert reloaded.n_pretrained == 4
        assert np.array_equal(reloaded.vector("novel"), table.vector("novel"))

    def test_invalid_dimension(self):
        """Tables need a positive dimension."""
        with pytest.raises(ValueError):
            EmbeddingTable(0)
