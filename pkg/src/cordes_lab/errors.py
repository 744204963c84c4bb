"""Exception hierarchy shared by every module.

Two families matter to callers: :class:`WindowError` (a parameter violates a
theorem hypothesis; the CLI exits with status 2) and :class:`NumericalFailure`
(the computation itself failed; the CLI exits with status 3).
"""


class CordesLabError(Exception):
    """Base class for all package errors."""


class WindowError(CordesLabError, ValueError):
    """A parameter lies outside the admissible window of a theorem case."""

    def __init__(self, message, hypothesis=None):
        super().__init__(message)
        self.hypothesis = hypothesis or message


class IntegrabilityError(WindowError):
    """Data are not integrable against the Green kernel (beta_k^- + sigma >= 0)."""


class DomainError(CordesLabError, ValueError):
    """An argument lies outside the domain of a pointwise operation."""


class NumericalFailure(CordesLabError, RuntimeError):
    """A numerical procedure did not deliver a usable result."""


class NoSignChangeError(NumericalFailure):
    pass


class KernelEncounteredError(NumericalFailure):
    pass


class NoContractionError(NumericalFailure):
    pass


class ModeBudgetError(NumericalFailure):
    pass


class NewtonFailure(NumericalFailure):
    pass
