"""
Diagnostics utilities for sensecnn.

This module provides:
- "Did you mean?" suggestions for typos in model kinds, filter ids and config keys
- Verbosity levels mapped onto the standard logging hierarchy
"""

from typing import List, Optional
from dataclasses import dataclass
import difflib
import logging
import sys


@dataclass
class Suggestion:
    """A suggestion for correcting a user error."""
    suggestion: str
    confidence: float  # 0.0 to 1.0

    def __str__(self) -> str:
        return f"'{self.suggestion}'"


class FuzzyMatcher:
    """Provides fuzzy string matching for helpful suggestions."""

    @staticmethod
    def get_close_matches(
        word: str,
        possibilities: List[str],
        n: int = 3,
        cutoff: float = 0.6
    ) -> List[Suggestion]:
        """
        Get close matches to a word from a list of possibilities.

        Args:
            word: The word to match
            possibilities: List of possible correct values
            n: Maximum number of suggestions to return
            cutoff: Similarity threshold (0.0 to 1.0)

        Returns:
            List of Suggestion objects sorted by confidence

        Example:
            >>> FuzzyMatcher.get_close_matches('cn', ['cnn', 'mlp'])[0].suggestion
            'cnn'
        """
        matches = difflib.get_close_matches(word, possibilities, n=n, cutoff=cutoff)

        suggestions = []
        for match in matches:
            ratio = difflib.SequenceMatcher(None, word.lower(), match.lower()).ratio()
            suggestions.append(Suggestion(suggestion=match, confidence=ratio))

        return sorted(suggestions, key=lambda s: s.confidence, reverse=True)

    @staticmethod
    def suggestion_names(word: str, possibilities: List[str], n: int = 3) -> List[str]:
        """Plain names of the close matches, for exception constructors."""
        return [s.suggestion for s in FuzzyMatcher.get_close_matches(word, possibilities, n=n)]


# 0=warnings only, 1=info, 2=debug, 3=trace (debug plus numpy warnings)
_LEVELS = {
    0: logging.WARNING,
    1: logging.INFO,
    2: logging.DEBUG,
    3: logging.DEBUG,
}

_HANDLER_NAME = "sensecnn-cli"


def configure_logging(verbose_level: int = 0, stream=None) -> logging.Logger:
    """
    Install a single stderr handler on the package logger.

    Library code only emits records; the CLI calls this once.

    Args:
        verbose_level: Level of verbosity (0-3)
        stream: Optional stream, defaults to stderr

    Returns:
        The package logger
    """
    level = _LEVELS[max(0, min(3, verbose_level))]
    logger = logging.getLogger("sensecnn")
    logger.setLevel(level)

    for handler in list(logger.handlers):
        if handler.get_name() == _HANDLER_NAME:
            logger.removeHandler(handler)

    handler = logging.StreamHandler(stream or sys.stderr)
    handler.set_name(_HANDLER_NAME)
    handler.setFormatter(logging.Formatter("[%(levelname)s] %(name)s: %(message)s"))
    logger.addHandler(handler)

    if verbose_level >= 3:
        logging.captureWarnings(True)

    return logger


def describe_counts(counts: dict, title: Optional[str] = None) -> str:
    """
    Format a label -> count mapping on one line.

    Example:
        >>> describe_counts({'de': 4, 'ep': 10})
        'de=4, ep=10'
    """
    body = ", ".join(f"{k}={counts[k]}" for k in sorted(counts))
    return f"{title}: {body}" if title else body


__all__ = [
    'Suggestion',
    'FuzzyMatcher',
    'configure_logging',
    'describe_counts',
]
