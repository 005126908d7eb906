"""Shared error hierarchy.

Every error carries a stable machine code (the class name) and a category
that the CLI and HTTP surfaces map onto exit codes and status codes.
"""

from __future__ import annotations

from typing import Any, Optional

# Error categories. The interface surfaces derive exit/status codes from
# these, never from individual error classes.
VALIDATION = "validation"
NOT_FOUND = "not-found"
PRECONDITION = "precondition"
UPSTREAM = "upstream"
IO = "io"


class ModernkitError(Exception):
    """Base class for all tool errors."""

    category = VALIDATION

    def __init__(self, message: str, detail: Optional[dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.detail = detail or {}

    @property
    def code(self) -> str:
        return type(self).__name__


# --- repo scanner ---

class RootNotFound(ModernkitError):
    category = NOT_FOUND


class NotADirectory(ModernkitError):
    category = VALIDATION


class IoError(ModernkitError):
    category = IO


# --- prompt library ---

class UnknownTemplate(ModernkitError):
    category = NOT_FOUND


class MissingPlaceholder(ModernkitError):
    category = VALIDATION

    def __init__(self, name: str):
        super().__init__(f"context is missing required placeholder {name!r}",
                         {"placeholder": name})
        self.name = name


class EmptyContextValue(ModernkitError):
    category = VALIDATION

    def __init__(self, name: str):
        super().__init__(f"context value for {name!r} is empty",
                         {"placeholder": name})
        self.name = name


# --- llm gateway ---

class UnknownBackend(ModernkitError):
    category = NOT_FOUND


class DuplicateBackend(ModernkitError):
    category = PRECONDITION


class InvalidEndpoint(ModernkitError):
    category = VALIDATION


class Timeout(ModernkitError):
    category = UPSTREAM


class BackendError(ModernkitError):
    category = UPSTREAM

    def __init__(self, status: int, message: str):
        super().__init__(f"backend returned {status}: {message}",
                         {"status": status})
        self.status = status


class IncompleteResponse(ModernkitError):
    """Response judged incomplete (empty, or ends inside an open code fence)."""

    category = UPSTREAM


class ExhaustedRetries(ModernkitError):
    category = UPSTREAM

    def __init__(self, last_error: Exception, attempts: int):
        super().__init__(
            f"gave up after {attempts} attempts; last error: {last_error}",
            {"attempts": attempts, "last_error": str(last_error)},
        )
        self.last_error = last_error
        self.attempts = attempts


# --- pipeline engine ---

class UnknownRun(ModernkitError):
    category = NOT_FOUND


class UnknownStep(ModernkitError):
    category = NOT_FOUND


class MissingSource(ModernkitError):
    category = VALIDATION


class SourceNotApproved(ModernkitError):
    category = PRECONDITION


class OutOfOrder(ModernkitError):
    category = PRECONDITION


class AlreadyGenerated(ModernkitError):
    category = PRECONDITION


class StepNotGenerated(ModernkitError):
    category = PRECONDITION


class InvalidReview(ModernkitError):
    category = VALIDATION


class GatewayFailure(ModernkitError):
    category = UPSTREAM

    def __init__(self, cause: Exception):
        super().__init__(f"generation backend failed: {cause}",
                         {"cause": str(cause)})
        self.cause = cause


# --- verifier ---

class UnknownArtifact(ModernkitError):
    category = NOT_FOUND


class UnknownVersion(ModernkitError):
    category = NOT_FOUND


class SameBackend(ModernkitError):
    category = PRECONDITION


class StepHasNoArtifact(ModernkitError):
    category = PRECONDITION


# --- artifact store ---

class InvalidTag(ModernkitError):
    category = VALIDATION


class DanglingContextRef(ModernkitError):
    category = VALIDATION
