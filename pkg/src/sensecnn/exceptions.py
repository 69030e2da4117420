"""
Custom exceptions for the sensecnn package.

Every error carries an optional context dictionary that is rendered below
the message, so a failing CLI run says what it was looking at.
"""

from typing import Optional, List, Dict, Any


class SenseCnnError(Exception):
    """
    Base exception for all sensecnn errors.

    Provides enhanced error messages with context.
    """

    def __init__(self, message: str, context: Optional[Dict[str, Any]] = None):
        """
        Initialize exception with message and optional context.

        Args:
            message: Error message
            context: Optional dictionary with additional context
        """
        self.message = message
        self.context = context or {}
        super().__init__(self._format_message())

    def _format_message(self) -> str:
        """Format error message with context."""
        lines = [self.message]

        if self.context:
            lines.append("")
            lines.append("Context:")
            for key, value in self.context.items():
                lines.append(f"  {key}: {value}")

        return "\n".join(lines)


class ShapeMismatchError(SenseCnnError):
    """Raised when two arrays that must agree in shape do not."""

    def __init__(self, operation: str, left: tuple, right: tuple):
        self.operation = operation
        self.left = tuple(left)
        self.right = tuple(right)
        super().__init__(
            f"Shape mismatch in {operation}: {self.left} vs {self.right}",
            {"operation": operation},
        )


class _LineError(SenseCnnError):
    """Shared formatting for errors tied to a line of an input file."""

    kind = "Input"

    def __init__(
        self,
        message: str,
        line_number: Optional[int] = None,
        source: Optional[str] = None,
        context: Optional[Dict[str, Any]] = None
    ):
        self.line_number = line_number
        self.source = source

        full_context = context or {}
        if source:
            full_context['source'] = source
        if line_number is not None:
            full_context['line'] = line_number

        super().__init__(message, full_context)

    def _format_message(self) -> str:
        """Prefix the message with the offending line."""
        if self.line_number is not None:
            head = f"{self.kind} error on line {self.line_number}: {self.message}"
        else:
            head = f"{self.kind} error: {self.message}"

        lines = [head]
        remaining = {k: v for k, v in self.context.items() if k != 'line'}
        if remaining:
            lines.append("")
            lines.append("Context:")
            for key, value in remaining.items():
                lines.append(f"  {key}: {value}")
        return "\n".join(lines)


class EmbeddingFormatError(_LineError):
    """Raised when a text embedding file cannot be parsed."""

    kind = "Embedding format"


class CorpusFormatError(_LineError):
    """Raised when a JSONL corpus line is malformed or inconsistent."""

    kind = "Corpus format"


class _SuggestingError(SenseCnnError):
    """Shared "did you mean" formatting for lookups by name."""

    what = "Item"

    def __init__(
        self,
        name: str,
        suggestions: Optional[List[str]] = None,
        available: Optional[List[str]] = None,
        context: Optional[Dict[str, Any]] = None
    ):
        self.name = name
        self.suggestions = suggestions or []
        self.available = available or []
        super().__init__(f"{self.what} '{name}' not found", context)

    def _format_message(self) -> str:
        """Format error message with suggestions."""
        lines = [f"{self.what} '{self.name}' not found"]

        if self.suggestions:
            lines.append("")
            if len(self.suggestions) == 1:
                lines.append(f"Did you mean '{self.suggestions[0]}'?")
            else:
                lines.append("Did you mean one of these?")
                for i, suggestion in enumerate(self.suggestions[:3], 1):
                    lines.append(f"  {i}. {suggestion}")
        elif self.available:
            lines.append("")
            lines.append(f"Available: {', '.join(self.available[:10])}")
            if len(self.available) > 10:
                lines.append(f"  ... and {len(self.available) - 10} more")

        if self.context:
            lines.append("")
            lines.append("Context:")
            for key, value in self.context.items():
                lines.append(f"  {key}: {value}")

        return "\n".join(lines)


class UnknownFilterError(_SuggestingError):
    """Raised when a filter id does not exist in a trained CNN."""

    what = "Filter"


class UnknownModelError(_SuggestingError):
    """Raised when a model kind is not registered."""

    what = "Model kind"


class ConfigurationError(SenseCnnError):
    """
    Raised when an experiment or model configuration is invalid.

    Provides guidance on correct configuration.
    """
    pass


class CheckpointError(SenseCnnError):
    """Raised when a checkpoint cannot be written, read or applied."""
    pass


class ReportWriteError(SenseCnnError):
    """Raised when an output file cannot be written."""

    def __init__(self, path: Any, reason: str):
        self.path = str(path)
        super().__init__(f"Could not write '{self.path}': {reason}", {"path": self.path})
