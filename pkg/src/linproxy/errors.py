"""Exception hierarchy shared across the package."""


class ProxyAuditError(Exception):
    """Base class for every error raised by linproxy."""


class DataError(ProxyAuditError, ValueError):
    """Malformed, missing or non-numeric input data."""


class NotCovarianceError(ProxyAuditError, ValueError):
    """Matrix is not symmetric positive semidefinite within tolerance."""


class ConstantProtectedError(ProxyAuditError, ValueError):
    """The protected attribute has zero variance."""


class DegenerateModelError(ProxyAuditError, ValueError):
    """The model output has zero variance, so influence is undefined."""


class SolverError(ProxyAuditError, RuntimeError):
    """The conic solver failed to certify a solution.

    ``best`` holds the best iterate found before giving up, if any.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class AuditError(ProxyAuditError):
    """A pipeline phase failed; ``phase`` names it."""

    def __init__(self, phase: str, message: str):
        super().__init__(f"[{phase}] {message}")
        self.phase = phase
