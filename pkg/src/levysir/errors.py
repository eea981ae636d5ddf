"""Exception hierarchy shared by every layer of the toolkit."""

from __future__ import annotations


class LevySIRError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(LevySIRError, ValueError):
    """A parameter, noise specification or configuration violates an invariant."""


class ParseError(LevySIRError, ValueError):
    """A configuration file could not be parsed."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class ChiTwoNonPositive(LevySIRError, ArithmeticError):
    """2*mu1 - sigma1^2 - sum(w * lam1^2) is not positive."""


class DegenerateDiffusion(LevySIRError, ArithmeticError):
    """sigma2 or sigma4 is zero, so the diffusion penalty term is undefined."""


class InvalidOrder(LevySIRError, ValueError):
    """Moment order p must be strictly greater than 2."""


class ThetaNonPositive(LevySIRError, ArithmeticError):
    """min(mu1, mu2 + gamma - eta, eta) is not positive."""


class NonFiniteState(LevySIRError, ArithmeticError):
    """The integrator produced NaN or infinity (usually dt is too large)."""

    def __init__(self, message: str, time: float | None = None, seed: int | None = None):
        self.time = time
        self.seed = seed
        super().__init__(message)


class EmptyWindow(LevySIRError, ValueError):
    """An averaging or regression window holds fewer than two samples."""
