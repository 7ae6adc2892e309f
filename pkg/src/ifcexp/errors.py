"""Exception types carrying a short machine-readable error code."""


class IfcError(Exception):
    """Base class. ``code`` is a stable identifier such as ``ROW_SUM``."""

    code = "ERROR"

    def __init__(self, message, code=None):
        super().__init__(message)
        if code is not None:
            self.code = code

    def __str__(self):
        return f"{self.code}: {super().__str__()}"


class ValidationError(IfcError, ValueError):
    """Bad input: malformed tables, shapes, axes or parameters."""

    code = "INVALID"


class InfeasibleMarginals(IfcError, ValueError):
    """The requested marginal constraints admit no joint distribution."""

    code = "INFEASIBLE_MARGINALS"


class ComputeGuardError(IfcError, RuntimeError):
    """A search or enumeration would exceed its configured size guard."""

    code = "GUARD_EXCEEDED"
