"""Exception types raised by the library.

Every error carries enough context to be serialized by the CLI.
"""

from __future__ import annotations

from typing import Any


class OrliczError(Exception):
    """Base class for computation errors (CLI exit code 1)."""

    kind = "OrliczError"

    def to_dict(self) -> dict[str, Any]:
        return {"error": self.kind, "message": str(self)}


class ExpressionSyntaxError(OrliczError, ValueError):
    kind = "SyntaxError"

    def __init__(self, message: str, position: int, text: str = ""):
        super().__init__(f"{message} at position {position}")
        self.position = position
        self.text = text

    def to_dict(self):
        d = super().to_dict()
        d["position"] = self.position
        d["expression"] = self.text
        return d


class NotOrlicz(OrliczError, ValueError):
    kind = "NotOrlicz"

    def __init__(self, message: str, report):
        super().__init__(message)
        self.report = report

    def to_dict(self):
        d = super().to_dict()
        d["report"] = self.report.to_dict()
        return d


class EvaluationOverflow(OrliczError, OverflowError):
    kind = "Overflow"


class DomainError(OrliczError, ValueError):
    kind = "DomainError"


class NoBracket(OrliczError, ArithmeticError):
    kind = "NoBracket"


class NoConvergence(OrliczError, ArithmeticError):
    kind = "NoConvergence"


class TailUnbounded(OrliczError, ArithmeticError):
    kind = "TailUnbounded"


class NotTwoConcave(OrliczError, ValueError):
    kind = "NotTwoConcave"

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report

    def to_dict(self):
        d = super().to_dict()
        if self.report is not None:
            d["report"] = self.report.to_dict()
        return d


class DegenerateBatch(OrliczError, RuntimeError):
    kind = "DegenerateBatch"


class ResourceLimit(OrliczError, ValueError):
    kind = "ResourceLimit"
