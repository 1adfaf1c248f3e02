"""Exception hierarchy shared by every engine component."""

from __future__ import annotations


class ShiftError(Exception):
    """Base class for all engine errors."""

    kind = "ShiftError"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "message": str(self)}


# catalog
class DuplicateId(ShiftError):
    kind = "DuplicateId"


class InvalidField(ShiftError):
    kind = "InvalidField"


class UnknownId(ShiftError):
    kind = "UnknownId"


class UnknownAttribute(ShiftError):
    kind = "UnknownAttribute"


class UnknownView(ShiftError):
    kind = "UnknownView"


class TypeMismatch(ShiftError):
    kind = "TypeMismatch"


# readers
class OutOfRange(ShiftError):
    kind = "OutOfRange"


class DeltaConflict(ShiftError):
    kind = "DeltaConflict"


class ChunkingMismatch(ShiftError):
    kind = "ChunkingMismatch"


class CorruptContainer(ShiftError):
    kind = "CorruptContainer"


# extractors
class DimensionMismatch(ShiftError):
    kind = "DimensionMismatch"


class ExtractorFailure(ShiftError):
    kind = "ExtractorFailure"


class CorruptEntry(ShiftError):
    kind = "CorruptEntry"


# proxies / datasim
class DimMismatch(ShiftError):
    kind = "DimMismatch"


class EmptySplit(ShiftError):
    kind = "EmptySplit"


class UnsupportedMethod(ShiftError):
    kind = "UnsupportedMethod"


# query language
class ShiftQLSyntaxError(ShiftError):
    kind = "SyntaxError"

    def __init__(self, message: str, line: int = 0, column: int = 0, token: str | None = None):
        self.line = line
        self.column = column
        self.token = token
        where = f" at line {line}, column {column}" if line else ""
        super().__init__(f"{message}{where}")
        self.message = message

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "message": self.message,
            "line": self.line,
            "column": self.column,
            "token": self.token,
        }


class UnknownKeyword(ShiftQLSyntaxError):
    kind = "UnknownKeyword"


class UnresolvedReference(ShiftError):
    kind = "UnresolvedReference"


class UnknownScoringAlgorithm(ShiftError):
    kind = "UnknownScoringAlgorithm"


# scheduler
class CyclicPlan(ShiftError):
    kind = "CyclicPlan"


class MissingCost(ShiftError):
    kind = "MissingCost"


class TaskFailed(ShiftError):
    """One or more tasks of a plan failed; ``failures`` maps task id to error text."""

    kind = "TaskFailed"

    def __init__(self, failures: dict[str, str]):
        self.failures = dict(failures)
        first = next(iter(self.failures.items()), ("?", "?"))
        super().__init__(f"{len(self.failures)} task(s) failed; first {first[0]}: {first[1]}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "message": str(self), "failures": self.failures}


# optimizer
class InvalidPool(ShiftError):
    kind = "InvalidPool"


class BudgetTooSmall(ShiftError):
    kind = "BudgetTooSmall"


class InsufficientBudget(BudgetTooSmall):
    kind = "InsufficientBudget"


# incremental / bench
class StaleCache(ShiftError):
    kind = "StaleCache"


class NoResultsForTarget(ShiftError):
    kind = "NoResultsForTarget"


class MissingAccuracy(ShiftError):
    kind = "MissingAccuracy"
