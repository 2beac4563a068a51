"""Exception types shared across the toolkit."""

from __future__ import annotations


class KgenrichError(Exception):
    """Base class for all toolkit errors."""


class ParseError(KgenrichError):
    """A text input (triple file, rule file, config file) is malformed."""

    def __init__(self, message: str, *, source: str = "", line: int = 0):
        location = f"{source}:{line}: " if source or line else ""
        super().__init__(f"{location}{message}")
        self.source = source
        self.line = line


class VocabularyError(KgenrichError):
    """A label or id is unknown under a fixed vocabulary."""


class ConfigError(KgenrichError):
    """A configuration value violates its invariants."""


class ContractError(KgenrichError):
    """Caller broke an API precondition (e.g. misaligned batches)."""


class DataError(KgenrichError):
    """Input data is structurally valid but unusable (empty test set, bad split)."""


class UndefinedMetricError(KgenrichError):
    """A rule metric has no value (zero-size denominator, missing functionality)."""


class NumericalError(KgenrichError):
    """Training produced NaN/Inf; aborted rather than clamped."""


class PipelineError(KgenrichError):
    """A pipeline stage failed; earlier artifacts are left on disk."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
