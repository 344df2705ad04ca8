"""Exception hierarchy shared by every module."""


class ScoringError(Exception):
    """Base class for all errors raised by effortscore."""


class DimensionError(ScoringError, ValueError):
    """Report, state or rule dimensions do not agree."""


class DomainError(ScoringError, ValueError):
    """An argument lies outside the domain an operation is defined on."""


class InfeasibleError(ScoringError):
    """A boundedness or feasibility requirement is violated."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class InstanceError(ScoringError, ValueError):
    """A problem instance is malformed (e.g. means outside the state hull)."""


class SolverError(ScoringError, RuntimeError):
    """The LP backend failed to reach a verdict (iteration cap, stall)."""
