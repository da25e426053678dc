"""Exception types with stable machine-readable codes.

The CLI maps these onto exit statuses: DomainError -> 1 (well-formed input
outside the supported domain), ModelError -> 2 (malformed input). Library
callers can branch on the ``code`` attribute instead of parsing messages.
"""

__all__ = ["GmtreeError", "ModelError", "DomainError"]


class GmtreeError(Exception):
    """Base class for package errors; ``code`` is a stable identifier."""

    code = "error"

    def __init__(self, message: str, code: str | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code


class ModelError(GmtreeError):
    """Malformed or structurally inconsistent input model."""

    code = "model-error"


class DomainError(GmtreeError):
    """Valid input outside the supported domain (infeasible distortion, etc.)."""

    code = "domain-error"
