"""Exception hierarchy shared across the engine."""

from __future__ import annotations


class WeaveError(Exception):
    """Base class for all engine errors."""


class ValidationError(WeaveError):
    """Input violates a declared contract (illegal pair, malformed spec, ...)."""


class NotFoundError(WeaveError):
    """Referenced session, artifact, plan, or tool does not exist."""


class IntegrityError(WeaveError):
    """A reference points at something that must exist but does not."""


class ConflictError(WeaveError):
    """Attempt to register a duplicate identifier."""


class CapacityError(WeaveError):
    """Nothing fits: a tool or job exceeds every available memory budget."""


class StoreError(WeaveError):
    """Persistent store failed at the filesystem level."""


class UnplannableError(WeaveError):
    """No tool path reaches a requested goal."""

    def __init__(self, goal: tuple[str, str], message: str | None = None):
        self.goal = goal
        super().__init__(message or f"no tool path to goal {goal[0]}/{goal[1]}")


class ExecutionFailed(WeaveError):
    """Plan execution exhausted its repair budget.

    Carries the partial report so callers can surface progress made so far.
    """

    def __init__(self, message: str, report=None):
        self.report = report
        super().__init__(message)
