"""Exception types raised by the solvers and the certifier."""


class StacklabError(Exception):
    """Base class for all package errors."""


class InvalidSpecError(StacklabError, ValueError):
    """A game specification violates its parameter constraints."""


class ContractViolation(StacklabError, ValueError):
    """A policy or profile is inconsistent with the game's information structure."""


class SingularProblemError(StacklabError):
    """A player's cost has no strictly positive curvature in her own action."""


class DegenerateGameError(StacklabError):
    """A linear stationarity system is singular (or a gain denominator vanishes)."""

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class DegenerateGainError(DegenerateGameError):
    """The incentive gain is undefined because the leader cannot influence the target."""


class UnsupportedParameterizationError(DegenerateGameError):
    """A closed form is not defined for this corner of parameter space."""
