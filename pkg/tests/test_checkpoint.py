"""
Tests for checkpoint files.

Tests for:
- Exact prediction round trips (random-init, static and tuned tables)
- OOV rows drawn after loading matching the uninterrupted table
- Format, version and shape validation
"""

import json
import pytest
import sys
from pathlib import Path

import numpy as np

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

from sensecnn.checkpoint import load_checkpoint, read_checkpoint, save_checkpoint
from sensecnn.cnn import CnnModel
from sensecnn.config import AdamHyper, CnnConfig, EmbeddingMode, MlpConfig, TrainConfig
from sensecnn.dataset import Dataset, Instance, synth_cue_dataset, synth_cue_spec
from sensecnn.embeddings import EmbeddingTable, load_embeddings
from sensecnn.exceptions import CheckpointError, SenseCnnError
from sensecnn.mlp import MlpModel
from sensecnn.numerics import SeededRng
from sensecnn.optim import train

VECTORS = b"MODAL 0.5 -0.5 0.1 0.2\nw000 0.1 0.1 0.1 0.1\nw001 -0.3 0.2 0.0 0.4\n"


def data() -> Dataset:
    return synth_cue_dataset(synth_cue_spec(classes=2, vocab_size=10, sentence_len=6, n_per_class=8), 0)


def novel() -> Dataset:
    return Dataset([
        Instance("n1", ("MODAL", "never", "seen"), "c0", 0),
        Instance("n2", ("MODAL", "cue1_0", "cue1_1", "cue1_2", "other"), "c1", 0),
    ])


def fit(table, mode=EmbeddingMode.STATIC, kind="cnn"):
    if kind == "cnn":
        model = CnnModel.create(
            CnnConfig(dim=4, region_sizes=(1, 2), maps_per_size=3, classes=2, embedding_mode=mode),
            SeededRng(1),
        )
    else:
        model = MlpModel.create(MlpConfig(dim=4, hidden=6, classes=2, embedding_mode=mode), SeededRng(1))
    cfg = TrainConfig(iterations=8, batch_size=5, embedding_mode=mode, adam=AdamHyper(lr=1e-2))
    return train(model, data(), table, cfg)


class TestRoundTrip:
    """Loaded models predict exactly like saved ones."""

    @pytest.mark.parametrize("kind", ["cnn", "mlp"])
    def test_random_init_table(self, tmp_path, kind):
        """Random-init tables are fully stored."""
        trained = fit(EmbeddingTable.random_init(4, 0.3, seed=2), kind=kind)
        path = save_checkpoint(trained, tmp_path / "can.json")
        loaded = load_checkpoint(path)
        assert loaded.kind == kind
        assert loaded.label_set == trained.label_set
        for name, tensor in trained.model.tensors().items():
            assert np.array_equal(tensor, loaded.model.tensors()[name])
        assert loaded.predict_labels(data()) == trained.predict_labels(data())

    @pytest.mark.parametrize("mode", [EmbeddingMode.STATIC, EmbeddingMode.TUNED])
    def test_hundred_held_out_sentences(self, tmp_path, mode):
        """Probabilities on 100 unseen sentences are bit-identical after loading."""
        table = load_embeddings(VECTORS, 4, trainable=mode is EmbeddingMode.TUNED, seed=3)
        table.warm(inst.tokens for inst in data())
        base = table.copy()
        trained = fit(table, mode=mode)
        path = save_checkpoint(trained, tmp_path / "can.json", base=base)
        loaded = load_checkpoint(path, base=load_embeddings(VECTORS, 4))
        held_out = synth_cue_dataset(synth_cue_spec(classes=2, vocab_size=40, sentence_len=9, n_per_class=50), 9)
        assert len(held_out) == 100
        for inst in held_out:
            tokens = list(inst.tokens)
            expected = trained.model.predict_proba(trained.table.embed_sentence(tokens))
            actual = loaded.model.predict_proba(loaded.table.embed_sentence(tokens))
            assert np.array_equal(expected, actual), inst.id
        assert loaded.predict_labels(held_out) == trained.predict_labels(held_out)

    def test_oov_stream_continues(self, tmp_path):
        """Words first seen after loading get the vectors the original would draw."""
        trained = fit(EmbeddingTable.random_init(4, 0.3, seed=2))
        path = save_checkpoint(trained, tmp_path / "can.json")
        loaded = load_checkpoint(path)
        expected = trained.model.predict_proba(trained.table.embed_sentence(["MODAL", "never", "seen"]))
        actual = loaded.model.predict_proba(loaded.table.embed_sentence(["MODAL", "never", "seen"]))
        assert np.array_equal(expected, actual)
        assert loaded.predict_labels(novel()) == trained.predict_labels(novel())

    def test_static_pretrained(self, tmp_path):
        """Static runs store OOV rows; pre-trained rows come from the file."""
        trained = fit(load_embeddings(VECTORS, 4, seed=3))
        path = save_checkpoint(trained, tmp_path / "can.json", embeddings_source="vectors.txt")
        document = read_checkpoint(path)
        assert "MODAL" not in document["embedding_delta"]
        assert document["embeddings"]["source"] == "vectors.txt"

        loaded = load_checkpoint(path, base=load_embeddings(VECTORS, 4))
        assert loaded.predict_labels(data()) == trained.predict_labels(data())

    def test_tuned_pretrained(self, tmp_path):
        """Tuned pre-trained rows travel in the delta."""
        table = load_embeddings(VECTORS, 4, seed=3, trainable=True)
        table.warm(inst.tokens for inst in data())
        base = table.copy()
        trained = fit(table, EmbeddingMode.TUNED)
        path = save_checkpoint(trained, tmp_path / "can.json", base=base)
        assert "MODAL" in read_checkpoint(path)["embedding_delta"]

        loaded = load_checkpoint(path, base=load_embeddings(VECTORS, 4))
        assert np.array_equal(loaded.table.vector("MODAL"), trained.table.vector("MODAL"))
        assert loaded.table.trainable
        assert loaded.predict_labels(data()) == trained.predict_labels(data())

    def test_bytes_are_deterministic(self, tmp_path):
        """Saving twice writes identical files."""
        trained = fit(EmbeddingTable.random_init(4, 0.3, seed=2))
        a = save_checkpoint(trained, tmp_path / "a.json", seed_info={"run": 1})
        b = save_checkpoint(trained, tmp_path / "b.json", seed_info={"run": 1})
        assert a.read_bytes() == b.read_bytes()


class TestValidation:
    """Test malformed and incompatible checkpoints."""

    def test_missing(self, tmp_path):
        """A missing file is a checkpoint error."""
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / "none.json")

    def test_not_json(self, tmp_path):
        """Garbage is rejected."""
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(CheckpointError):
            read_checkpoint(path)

    def test_wrong_format(self, tmp_path):
        """Other JSON documents are rejected."""
        path = tmp_path / "other.json"
        path.write_text(json.dumps({"format": "something-else", "version": 1}))
        with pytest.raises(CheckpointError):
            read_checkpoint(path)

    def test_wrong_version(self, tmp_path):
        """Future versions are refused."""
        trained = fit(EmbeddingTable.random_init(4, 0.3, seed=2))
        path = save_checkpoint(trained, tmp_path / "can.json")
        document = json.loads(path.read_text())
        document["version"] = 99
        path.write_text(json.dumps(document))
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_tensor_shape_checked(self, tmp_path):
        """Tampered tensors are caught."""
        trained = fit(EmbeddingTable.random_init(4, 0.3, seed=2))
        path = save_checkpoint(trained, tmp_path / "can.json")
        document = json.loads(path.read_text())
        document["params"]["softmax_b"] = [0.0]
        path.write_text(json.dumps(document))
        with pytest.raises(SenseCnnError):
            load_checkpoint(path)

    def test_pretrained_needs_base(self, tmp_path):
        """Checkpoints of pre-trained runs need the embedding file."""
        trained = fit(load_embeddings(VECTORS, 4))
        path = save_checkpoint(trained, tmp_path / "can.json")
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_base_dimension_checked(self, tmp_path):
        """The base table must have the stored dimension."""
        trained = fit(load_embeddings(VECTORS, 4))
        path = save_checkpoint(trained, tmp_path / "can.json")
        with pytest.raises(SenseCnnError):
            load_checkpoint(path, base=EmbeddingTable.random_init(3, 0.1))
