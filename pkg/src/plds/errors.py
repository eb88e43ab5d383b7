"""Error types with machine-readable codes.

Two failure families matter to callers: validation failures (bad inputs,
bad configs, structurally impossible requests) and numerical failures
(factorizations or responsibilities collapsing at runtime).  The CLI maps
them to exit codes 2 and 3 respectively.
"""

from __future__ import annotations


class PLDSError(Exception):
    """Base class; `code` is stable and machine-readable."""

    code = "PLDS_ERROR"

    def __init__(self, message: str = "", **context):
        self.context = context
        if context:
            detail = ", ".join(f"{k}={v!r}" for k, v in context.items())
            message = f"{message} ({detail})" if message else detail
        super().__init__(f"[{self.code}] {message}")


class ValidationFailure(PLDSError):
    code = "VALIDATION_FAILURE"


class NumericalFailure(PLDSError):
    code = "NUMERICAL_FAILURE"


class InvalidModelError(ValidationFailure):
    code = "INVALID_MODEL"

    def __init__(self, report, message="model parameters failed validation"):
        self.report = list(report)
        lines = "; ".join(f"{v.code}: {v.message}" for v in self.report)
        super().__init__(f"{message}: {lines}")


class DimensionMismatchError(ValidationFailure):
    code = "DIMENSION_MISMATCH"


class LengthMismatchError(ValidationFailure):
    code = "LENGTH_MISMATCH"


class MissingLatentsError(ValidationFailure):
    code = "MISSING_LATENTS"


class NotSingleModeError(ValidationFailure):
    code = "NOT_SINGLE_MODE"


class EmptyMixtureError(ValidationFailure):
    code = "EMPTY_MIXTURE"


class EnumerationTooLargeError(ValidationFailure):
    code = "ENUMERATION_TOO_LARGE"


class UnknownMethodError(ValidationFailure):
    code = "UNKNOWN_METHOD"


class BadConfigError(ValidationFailure):
    code = "BAD_CONFIG"


class SingularMatrixError(NumericalFailure):
    code = "SINGULAR_MATRIX"


class DegenerateResponsibilitiesError(NumericalFailure):
    code = "DEGENERATE_RESPONSIBILITIES"
