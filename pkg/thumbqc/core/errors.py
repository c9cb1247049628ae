"""
Structured Errors

Every failure thumbqc reports on purpose is a ThumbQCError. Each one carries
a ``detail`` dict with a stable error code, a message and a suggested action,
and the process exit code the CLI should use when the error reaches it.
"""

from typing import Any, Dict, Optional


class ThumbQCError(Exception):
    """Base exception with a structured, JSON-serialisable detail."""

    error_code = "thumbqc_error"
    exit_code = 1

    def __init__(self, message: str, action: Optional[str] = None, **extra: Any):
        super().__init__(message)
        self.message = message
        self.detail: Dict[str, Any] = {"error": self.error_code, "message": message}
        if action:
            self.detail["action"] = action
        self.detail.update(extra)


class InvalidInputError(ThumbQCError, ValueError):
    """Raised when an image, tensor or argument is malformed."""
    error_code = "invalid_input"


class PreconditionError(ThumbQCError, ValueError):
    """Raised when an operation is called on an input it does not accept."""
    error_code = "precondition_failed"


class ConfigurationError(ThumbQCError, ValueError):
    """Raised when a run config is malformed or internally inconsistent."""
    error_code = "invalid_config"
    exit_code = 2


class WeightFormatError(ThumbQCError, ValueError):
    """Raised when a weight container is truncated, corrupt or of another version."""
    error_code = "weight_format"
    exit_code = 2


class WeightSchemaError(ThumbQCError, ValueError):
    """Raised when a weight container does not match the expected parameter schema."""
    error_code = "weight_schema"
    exit_code = 2

    def __init__(self, message: str, tensor: str, **extra: Any):
        super().__init__(
            message,
            action="Load weights produced for the same backbone configuration",
            tensor=tensor,
            **extra,
        )
        self.tensor = tensor


class ModelBundleError(ThumbQCError):
    """Raised when a model bundle directory is missing or unreadable."""
    error_code = "model_bundle"
    exit_code = 2


class EmptyInputError(ThumbQCError):
    """Raised when a command receives no slides to process."""
    error_code = "empty_input"
    exit_code = 3


class UndefinedMetricError(ThumbQCError, ValueError):
    """Raised when a metric is undefined for the given samples (e.g. single-class AUROC)."""
    error_code = "undefined_metric"


class StudyResumeError(ThumbQCError):
    """Raised when a study log cannot be replayed against the current study."""
    error_code = "study_resume"
    exit_code = 2
