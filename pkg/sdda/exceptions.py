"""Exception hierarchy.

Every error raised on purpose by the package derives from ``SDDAError`` and
carries a stable ``code`` that the command line prints and tests match on.
"""
from typing import Any, Optional


class SDDAError(Exception):
    """Base class for all package errors."""

    code = "sdda_error"

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def __str__(self) -> str:
        return self.message


class ConfigError(SDDAError, ValueError):
    code = "invalid_config"


class ShapeError(SDDAError, ValueError):
    """Input shapes incompatible with a kernel, model or state."""

    code = "shape_mismatch"


class ArchitectureError(ShapeError):
    """A layer chain collapses a dimension to zero or below."""

    code = "architecture"

    def __init__(self, message: str, layer: Optional[str] = None, **details: Any):
        super().__init__(message, layer=layer, **details)
        self.layer = layer


class NonFiniteError(SDDAError, FloatingPointError):
    code = "non_finite"


class TapeError(SDDAError, RuntimeError):
    code = "tape"


class FilterDesignError(SDDAError, ValueError):
    code = "filter_design"


class LabelError(SDDAError, ValueError):
    code = "label_out_of_range"


class MissingClassError(SDDAError, ValueError):
    code = "missing_class"


class SessionSplitError(SDDAError, ValueError):
    code = "session_split"


class CsvImportError(SDDAError, ValueError):
    code = "csv_import"


class ContainerError(SDDAError, ValueError):
    code = "container"


class BadMagicError(ContainerError):
    code = "bad_magic"


class UnsupportedVersionError(ContainerError):
    code = "unsupported_version"


class TruncatedPayloadError(ContainerError):
    code = "truncated_payload"


class LabelRangeError(ContainerError):
    code = "label_out_of_range"


class DivergenceError(SDDAError, RuntimeError):
    """Training produced a non-finite loss. ``record`` holds the run up to the failure."""

    code = "divergence"

    def __init__(self, message: str, record: Any = None, **details: Any):
        super().__init__(message, **details)
        self.record = record


class GridSearchError(SDDAError, RuntimeError):
    """Every cell of a trade-off grid failed."""

    code = "grid_search"
