"""Exception hierarchy shared by every module."""


class SparseLabError(Exception):
    """Base class for all package errors."""


class ValidationError(SparseLabError, ValueError):
    """A documented precondition was violated.

    ``module`` and ``parameter`` name the offending input so that the CLI can
    report it verbatim.
    """

    def __init__(self, message, module=None, parameter=None):
        self.module = module
        self.parameter = parameter
        prefix = ""
        if module or parameter:
            prefix = f"[{module or '?'}.{parameter or '?'}] "
        super().__init__(prefix + message)


class InadmissibleParameters(ValidationError):
    """(p, beta, a) fail the admissibility chain v^2 < a(sqrt(beta)-1) < v_c^2, a < 4."""

    def __init__(self, message, inequality):
        self.inequality = inequality
        super().__init__(message, module="theory", parameter=inequality)


class ComputeError(SparseLabError, RuntimeError):
    """A numerical stage failed (iteration cap, overflow, budget)."""
