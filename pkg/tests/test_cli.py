"""
Tests for the command-line entry point.
"""

import json
import pytest
import sys
from pathlib import Path

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

from sensecnn.cli import build_parser, main, overrides_from
from sensecnn.dataset import synth_cue_dataset, synth_cue_spec, write_dataset


@pytest.fixture
def config(tmp_path):
    write_dataset(
        synth_cue_dataset(synth_cue_spec(classes=2, vocab_size=10, sentence_len=5, n_per_class=5), 0),
        tmp_path / "modal.jsonl",
    )
    path = tmp_path / "run.toml"
    path.write_text(
        'fold_source = "modal.jsonl"\n'
        'out_dir = "out"\n'
        'embedding_kind = "random"\n'
        'random_bound = 0.25\n'
        'embedding_dim = 4\n'
        'region_sizes = [1, 2]\n'
        'maps_per_size = 2\n'
        'iterations = 3\n'
        'batch_size = 4\n'
        'learning_rate = 0.001\n'
        'folds = 2\n'
        'workers = 1\n'
    )
    return path


class TestParser:
    """Test flag handling."""

    def test_overrides_only_given_flags(self):
        """Absent flags do not override config values."""
        args = build_parser().parse_args(["cv", "--seed", "3", "--compare-with", "majority",
                                          "--compare-with", "random"])
        assert overrides_from(args) == {"seed": 3, "compare_with": ["majority", "random"], "mode": "cv"}

    def test_progress_flag(self):
        """--progress turns the bar on; leaving it out keeps the config value."""
        assert overrides_from(build_parser().parse_args(["train", "--progress"]))["progress"] is True
        assert "progress" not in overrides_from(build_parser().parse_args(["train"]))


class TestMain:
    """Test exit codes and outputs."""

    def test_success(self, config, tmp_path, capsys):
        """A valid run writes its results and exits 0."""
        assert main(["cv", "--config", str(config), "--compare-with", "majority"]) == 0
        results = json.loads((tmp_path / "out" / "results.json").read_text())
        assert results["mode"] == "cv"
        assert results["baselines"] == ["majority"]
        assert "micro accuracy" in capsys.readouterr().out

    def test_package_error_exits_1(self, tmp_path, capsys):
        """Configuration problems are reported on stderr with status 1."""
        assert main(["cv", "--config", str(tmp_path / "missing.toml")]) == 1
        assert "sensecnn: error:" in capsys.readouterr().err

    def test_invalid_config_exits_1(self, config, capsys):
        """Unknown keys get a hint."""
        config.write_text(config.read_text() + "iteratons = 5\n")
        assert main(["cv", "--config", str(config)]) == 1
        assert "did you mean 'iterations'" in capsys.readouterr().err

    def test_bad_arguments_exit_2(self):
        """argparse errors exit with status 2."""
        with pytest.raises(SystemExit) as exc:
            main(["cv", "--model", "svm"])
        assert exc.value.code == 2

    def test_missing_command_exit_2(self):
        """A subcommand is required."""
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2
