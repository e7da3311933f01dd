"""Semantic exception hierarchy shared across the toolkit."""


class FreeJacobiError(Exception):
    """Base class for all toolkit errors."""


class DomainError(FreeJacobiError):
    """Input outside the mathematical domain of an operation."""


class EvaluationError(FreeJacobiError):
    """A numerical evaluation produced non-finite or invalid values."""


class BranchError(FreeJacobiError):
    """A square-root branch could not be continued unambiguously."""


class IntegrationError(FreeJacobiError):
    """A time integration violated an invariant.

    Carries the time and component index at which the violation occurred.
    """

    def __init__(self, message, t=None, n=None):
        super().__init__(message)
        self.t = t
        self.n = n


class TailCertificationError(FreeJacobiError):
    """A series functional could not certify its truncation tail.

    ``required_n``, when set, is the truncation order that would satisfy the
    requested tolerance under the worst-case geometric bound.
    """

    def __init__(self, message, required_n=None):
        super().__init__(message)
        self.required_n = required_n


class SimulationError(FreeJacobiError):
    """A Monte Carlo trial violated a structural invariant."""
