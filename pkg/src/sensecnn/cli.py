"""
Command-line entry point.

    sensecnn cv|train|eval|wsd|analyze|tune [--config PATH] [--seed N]
        [--model cnn|mlp|majority|random] [--compare-with KIND ...]
        [--embeddings PATH] [--embedding-mode static|tuned]
        [--balance over|under|none] [--out DIR] [--checkpoint PATH] [-v]

Flags override values from the config file. Exit status is 0 on success,
1 on any package error and 2 on invalid arguments.
"""

from pathlib import Path
from typing import Any, Dict, List, Optional
import argparse
import sys

from .config import BalanceMode, EmbeddingMode, ModelKind, RunMode, build_spec, load_spec
from .diagnostics import configure_logging
from .exceptions import SenseCnnError
from .harness import run_experiment


_DESCRIPTIONS = {
    RunMode.CV: "k-fold cross validation per target word",
    RunMode.TRAIN: "train, write checkpoints, evaluate on the test corpus",
    RunMode.EVAL: "evaluate checkpoints on the test corpus",
    RunMode.WSD: "lexical-sample word sense disambiguation",
    RunMode.ANALYZE: "rank training sentences per CNN filter",
    RunMode.TUNE: "choose CNN region sizes on a validation split",
}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="TOML config file or a run's manifest.json")
    parser.add_argument("--seed", type=int, help="Run seed")
    parser.add_argument("--model", choices=[k.value for k in ModelKind], help="Model kind")
    parser.add_argument("--compare-with", action="append", choices=[k.value for k in ModelKind],
                        dest="compare_with", help="Baseline trained on the same data (repeatable)")
    parser.add_argument("--embeddings", type=Path, help="Text embedding file")
    parser.add_argument("--embedding-mode", choices=[m.value for m in EmbeddingMode], dest="embedding_mode")
    parser.add_argument("--balance", choices=[b.value for b in BalanceMode], help="Resample training data")
    parser.add_argument("--out", type=Path, dest="out_dir", help="Output directory")
    parser.add_argument("--checkpoint", type=Path, help="Checkpoint file or directory")
    parser.add_argument("--test-corpus", type=Path, dest="test_corpus", help="Evaluation corpus (JSONL)")
    parser.add_argument("--workers", type=int, help="Parallel per-word jobs")
    parser.add_argument("--progress", action="store_true", default=None, help="Show a training progress bar")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="More logging (-v info, -vv debug)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sensecnn",
        description="CNN sense classification experiments",
    )
    commands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for mode, help_text in _DESCRIPTIONS.items():
        _add_common(commands.add_parser(mode.value, help=help_text, description=help_text))
    return parser


_OVERRIDE_KEYS = (
    "seed", "model", "compare_with", "embeddings", "embedding_mode", "balance",
    "out_dir", "checkpoint", "test_corpus", "workers", "progress",
)


def overrides_from(args: argparse.Namespace) -> Dict[str, Any]:
    """Flag values that were actually given, plus the subcommand as mode."""
    values = {key: getattr(args, key) for key in _OVERRIDE_KEYS if getattr(args, key) is not None}
    values["mode"] = args.command
    return values


def _summary(run) -> str:
    if run.micro is not None:
        return f"{run.mode}: {len(run.words)} word(s), micro accuracy {run.micro:.4f}"
    if run.tuning:
        return f"{run.mode}: region sizes chosen for {len(run.tuning)} word(s)"
    return f"{run.mode}: {len(run.analysis)} word(s) analyzed"


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    overrides = overrides_from(args)

    try:
        if args.config is not None:
            spec = load_spec(args.config, overrides)
        else:
            spec = build_spec(overrides)
        run = run_experiment(spec)
    except SenseCnnError as e:
        print(f"sensecnn: error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"sensecnn: error: {e.filename or ''}: {e.strerror or e}", file=sys.stderr)
        return 1

    print(f"{_summary(run)} -> {spec.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
