"""Exceptions raised by posevo."""

import typing


class PosevoError(Exception):
    """Base class for all posevo errors."""


class SkeletonError(PosevoError, ValueError):
    """Raised when a skeleton document fails validation.

    Attributes:
        issues: List of problems, each a dict with 'link_id', 'field' and 'message'
    """

    def __init__(self, issues: list[dict[str, typing.Any]]) -> None:
        """Initialize SkeletonError with issue details.

        Args:
            issues: Problems found, each containing 'link_id' (or None for
                    document-level problems), 'field' and 'message'
        """
        self.issues = issues
        error_msg = "; ".join(
            f"{_where(issue)}: {issue['message']}" for issue in issues
        )
        super().__init__(f"Skeleton validation failed: {error_msg}")


def _where(issue: dict[str, typing.Any]) -> str:
    link_id = issue.get("link_id")
    field = issue.get("field") or "document"
    if link_id is None:
        return field
    return f"link {link_id}.{field}"


class PoseError(PosevoError, ValueError):
    """Raised when a pose vector does not fit its skeleton or is not finite."""


class ModelMismatchError(PosevoError, ValueError):
    """Raised when poses or posed models from different skeletons are combined."""


class GeometryError(PosevoError, ValueError):
    """Raised for geometric queries that have no answer (e.g. an empty model)."""


class EmptyCloudError(PosevoError, ValueError):
    """Raised when a point cloud would contain no points."""


class DepthFormatError(PosevoError, ValueError):
    """Raised when a depth image or its intrinsics sidecar cannot be parsed."""


class CloudFormatError(PosevoError, ValueError):
    """Raised when a point cloud file cannot be parsed.

    Attributes:
        line_number: 1-based line of the offending token, if known
    """

    def __init__(self, message: str, line_number: int | None = None) -> None:
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class RenderError(PosevoError, RuntimeError):
    """Raised when a synthetic render produces no foreground pixels."""


class ConfigError(PosevoError, ValueError):
    """Raised when optimizer configuration is invalid.

    Attributes:
        errors: Mapping of field name to message
    """

    def __init__(self, errors: dict[str, str]) -> None:
        self.errors = errors
        error_msg = ", ".join(f"{field}: {msg}" for field, msg in errors.items())
        super().__init__(f"Invalid configuration: {error_msg}")


class BatchEvaluationError(PosevoError):
    """Raised when one pose of a batch fails to evaluate.

    Attributes:
        index: Position of the failing pose in the batch
    """

    def __init__(self, index: int, cause: Exception) -> None:
        self.index = index
        super().__init__(f"pose {index}: {cause}")
        self.__cause__ = cause
