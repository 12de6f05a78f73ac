"""
Error types for the adaptive QA orchestration harness.
Library code raises these; the CLI turns them into machine-readable documents.
"""

from typing import Any, Dict, Optional


class AQAError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(AQAError, ValueError):
    """Invalid configuration or constructor arguments."""


class UnknownActionError(AQAError, KeyError):
    """An action identifier that is not part of the model."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown action"


class DimensionMismatchError(AQAError, ValueError):
    """A context vector whose length differs from the model dimension."""


class NonFiniteError(AQAError, ValueError):
    """NaN or infinite values where finite numbers are required."""


class GraphError(AQAError, ValueError):
    """Malformed strategy graph or agent set."""


class DatasetError(AQAError, ValueError):
    """Malformed dataset file."""

    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        self.line = line
        self.field = field
        location = f"line {line}: " if line is not None else ""
        super().__init__(f"{location}{message}")


class AgentError(AQAError):
    """An agent backend could not produce an answer."""

    def __init__(self, message: str, elapsed_s: float = 0.0):
        self.elapsed_s = elapsed_s
        super().__init__(message)


class AgentTimeoutError(AgentError):
    """The remote agent did not answer within the timeout."""


class AgentProtocolError(AgentError):
    """The remote agent answered with a malformed response."""


def create_error_response(error: Exception, command: str) -> Dict[str, Any]:
    """Create a standardized error document for CLI failures."""
    response: Dict[str, Any] = {
        "error": str(error),
        "type": type(error).__name__,
        "command": command,
    }
    if isinstance(error, DatasetError):
        response["line"] = error.line
        response["field"] = error.field
    if isinstance(error, AgentError):
        response["elapsed_s"] = error.elapsed_s
    return response
