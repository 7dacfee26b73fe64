"""Exception hierarchy shared by the numerical modules and the CLI."""


class DcovError(Exception):
    """Base class for package errors."""


class NumericalError(DcovError):
    """A numerical routine failed (CLI exit code 3)."""


class ConvergenceError(NumericalError):
    """An iterative solver did not reach its tolerance.

    ``best_residual`` carries the smallest residual seen over all attempts.
    """

    def __init__(self, message, best_residual=float("nan")):
        super().__init__(message)
        self.best_residual = best_residual


class BranchError(NumericalError):
    """A solution converged but lies outside the admissible branch."""


class DomainError(NumericalError, ValueError):
    """An argument lies outside the domain of a real-axis function."""


class EvaluationError(NumericalError, ValueError):
    """A function evaluated to a non-finite value."""
