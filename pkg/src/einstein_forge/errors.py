"""Exception hierarchy."""

from __future__ import annotations


class ForgeError(Exception):
    """Base class for all package errors."""


class DomainError(ForgeError, ValueError):
    """An expression was evaluated outside the domain where it is twice differentiable."""

    def __init__(self, message: str, function: str | None = None, value=None, point=None):
        super().__init__(message)
        self.function = function
        self.value = value
        self.point = point

    def with_point(self, point) -> "DomainError":
        self.point = [float(p) for p in point] if point is not None else None
        return self

    def __str__(self) -> str:
        msg = super().__str__()
        if self.point is not None:
            msg += f" at point {self.point}"
        return msg


class ParseError(ForgeError, ValueError):
    """Syntax or semantic error in metric/expression text."""

    def __init__(self, message: str, line: int = 1, column: int = 1):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class SingularMetricError(ForgeError, ValueError):
    """The metric is degenerate at a queried point."""

    def __init__(self, message: str, point=None):
        super().__init__(message)
        self.point = None if point is None else [float(p) for p in point]

    def __str__(self) -> str:
        msg = super().__str__()
        if self.point is not None:
            msg += f" at point {self.point}"
        return msg


class PreconditionError(ForgeError, ValueError):
    """Inputs violate an operation's stated precondition."""
