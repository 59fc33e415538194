"""Exception hierarchy shared by every module."""


class NcbError(Exception):
    """Base class for library errors."""


class InvalidInput(NcbError, ValueError):
    """Malformed or inconsistent input data."""


class StarViolation(InvalidInput):
    """A generator that should be hermitian is not."""


class UnitViolation(InvalidInput):
    """Generators do not sum to the identity."""


class PreconditionError(InvalidInput):
    """Input is well formed but outside the operation's domain."""


class DegenerateSpectrum(NcbError):
    """Random elements failed to split blocks within the retry budget."""


class SolverError(NcbError):
    """The conic solver did not return a usable answer."""


class Infeasible(SolverError):
    """The spectrahedron is empty.

    ``certificate`` holds the dual ray reported by the solver, if any.
    """

    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class InternalConsistencyError(NcbError):
    """Two independent computations disagree; signals a tolerance bug."""


class StructureViolation(InternalConsistencyError):
    """A constructed system does not have the structure its certificates promise.

    ``report`` holds whatever was computed before the check failed.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
