"""Exception hierarchy shared by the solvers and the CLI."""

from __future__ import annotations


class SemFaithError(Exception):
    """Base class for all package errors."""


class InvalidInput(SemFaithError, ValueError):
    def __init__(self, message: str, findings: list[str] | None = None):
        super().__init__(message)
        self.findings = list(findings or [])


class EmptyText(InvalidInput):
    """All cluster counts are zero, so no distribution can be formed."""


class DimensionError(InvalidInput):
    pass


class DomainError(SemFaithError, ValueError):
    pass


class AbsoluteContinuityViolation(SemFaithError, ValueError):
    pass


class NonConvergence(SemFaithError, RuntimeError):
    """Iteration budget exhausted.

    ``trace`` carries whatever partial objective history was collected.
    """

    def __init__(self, message: str, trace: list[float] | None = None, iterations: int = 0):
        super().__init__(message)
        self.trace = list(trace or [])
        self.iterations = iterations


class DualDomainViolation(SemFaithError, RuntimeError):
    pass


class InfeasibleReverse(SemFaithError, RuntimeError):
    pass
