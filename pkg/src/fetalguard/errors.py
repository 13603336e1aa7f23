"""Exception hierarchy shared across the package."""

from __future__ import annotations


class FetalGuardError(Exception):
    """Base class for all package errors."""


class ParseError(FetalGuardError):
    """A malformed row or cell in an input file; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class StructureError(FetalGuardError):
    """A file parsed but violates a structural requirement (e.g. non-monotone time)."""


class EmptyInputError(FetalGuardError):
    """No usable data in the input at all."""


class LabelingError(FetalGuardError):
    """A record cannot be labeled (missing pH or Apgar1)."""


class PreprocessError(FetalGuardError):
    """A record cannot be turned into a feature vector."""


class ConfigError(FetalGuardError):
    """Invalid configuration value or unknown configuration key."""


class SplitError(FetalGuardError):
    """A requested split would leave a class without samples."""


class TrainingDataError(FetalGuardError):
    """The training view is unusable (e.g. no normal samples)."""


class TrainingError(FetalGuardError):
    """Training aborted (non-finite loss or inconsistent inputs); carries diagnostics."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class ShapeError(FetalGuardError):
    """Dimension mismatch between arrays, layers, or models."""


class TestIsolationError(FetalGuardError):
    """The held-out test partition was accessed out of protocol."""

    __test__ = False  # not a pytest class despite the name
