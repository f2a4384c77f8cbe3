"""Domain errors.

Every error carries a stable machine-readable ``code`` so that CLI and HTTP
layers can map failures without string matching.
"""

from __future__ import annotations


class GradargError(Exception):
    """Base class for all domain errors."""

    code = "ERROR"

    def __init__(self, message: str, *, detail: object = None):
        super().__init__(message)
        self.detail = detail


class UnknownArgumentError(GradargError):
    code = "UNKNOWN_ARGUMENT"


class UnknownUserError(GradargError):
    code = "UNKNOWN_USER"


class UnknownCorpusError(GradargError):
    code = "UNKNOWN_CORPUS"


class UnknownReferenceError(GradargError):
    code = "UNKNOWN_REFERENCE"


class NotAnOptionError(GradargError):
    code = "NOT_AN_OPTION"


class OptionEditError(GradargError):
    code = "OPTION_EDIT_FORBIDDEN"


class BadScoreError(GradargError):
    code = "BAD_SCORE"


class ConflictingSignError(GradargError):
    code = "CONFLICTING_SIGN"


class DuplicateIdError(GradargError):
    code = "DUPLICATE_ID"


class DuplicateRelationError(GradargError):
    code = "DUPLICATE_RELATION"


class SelfRelationError(GradargError):
    code = "SELF_RELATION"


class MissingOwnerError(GradargError):
    code = "MISSING_OWNER"


class CycleError(GradargError):
    code = "CYCLE"


class WouldCreateCycleError(GradargError):
    code = "WOULD_CREATE_CYCLE"


class EmptyFrameworkError(GradargError):
    code = "EMPTY_FRAMEWORK"


class EmptyCandidatesError(GradargError):
    code = "EMPTY_CANDIDATES"


class NoEligibleOptionError(GradargError):
    code = "NO_ELIGIBLE_OPTION"


class NotATieError(GradargError):
    code = "NOT_A_TIE"


class InvalidProfileError(GradargError):
    code = "INVALID_PROFILE"


class InvalidEventError(GradargError):
    code = "INVALID_EVENT"


class ShapeMismatchError(GradargError):
    code = "SHAPE_MISMATCH"


class TooManyTogglesError(GradargError):
    code = "TOO_MANY_TOGGLES"


class TooManyRelationsError(GradargError):
    code = "TOO_MANY_RELATIONS"


class BadGridError(GradargError):
    code = "BAD_GRID"


class ForbiddenError(GradargError):
    code = "FORBIDDEN"


class OutOfRangeError(GradargError):
    code = "OUT_OF_RANGE"


class InvalidAfError(GradargError):
    """Parse failure; ``errors`` holds the full list of ParseError records."""

    code = "INVALID_AF"

    def __init__(self, message: str, errors=()):
        super().__init__(message, detail=list(errors))
        self.errors = list(errors)
