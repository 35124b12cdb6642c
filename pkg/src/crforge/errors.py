"""Exception hierarchy shared by every crforge module."""

from __future__ import annotations


class CRForgeError(Exception):
    """Base class for all errors raised by crforge."""


class JetShapeError(CRForgeError, ValueError):
    """Operands disagree on variable count, shape, or are otherwise incompatible."""


class SingularJetError(CRForgeError, ArithmeticError):
    """A jet or jet matrix has a non-invertible constant term."""

    def __init__(self, message: str, condition: float = float("inf")):
        super().__init__(message)
        self.condition = condition


class TruncationError(CRForgeError, ValueError):
    """A derivative was requested beyond the truncation order of a jet."""


class ExprSyntaxError(CRForgeError, ValueError):
    def __init__(self, message: str, line: int, column: int, expected=()):
        self.line = line
        self.column = column
        self.expected = tuple(expected)
        detail = f"{message} at line {line}, column {column}"
        if self.expected:
            detail += f" (expected one of: {', '.join(self.expected)})"
        super().__init__(detail)


class UnknownIdentifierError(CRForgeError, ValueError):
    def __init__(self, name: str, column: int, declared):
        self.name = name
        self.column = column
        self.declared = tuple(declared)
        super().__init__(
            f"unknown identifier {name!r} at column {column}; "
            f"declared coordinates: {', '.join(self.declared) or '(none)'}"
        )


class ExprDomainError(CRForgeError, ArithmeticError):
    """Evaluation left the domain of a function (log 0, 1/0, sqrt 0)."""

    def __init__(self, message: str, span=None):
        self.span = span
        if span is not None:
            message = f"{message} (columns {span[0]}-{span[1]})"
        super().__init__(message)


class ModelSchemaError(CRForgeError, ValueError):
    """A model file is missing a field or has an arity mismatch."""


class ModelValidationError(CRForgeError, ValueError):
    """A model file is well formed but geometrically invalid."""


class HypothesisViolation(CRForgeError, ValueError):
    """A map or structure fails the hypothesis an operation relies on."""


class ContractViolation(CRForgeError, ValueError):
    """An argument violates an operation's precondition beyond tolerance."""
