"""Exception hierarchy shared by all modules."""


class EinsteinLabError(Exception):
    """Base class for every error raised by this package."""


class DomainError(EinsteinLabError, ValueError):
    """A radial coordinate or matrix lies outside the region where a formula is valid."""


class InconsistentCoefficientsError(EinsteinLabError, ValueError):
    pass


class DegenerateFiberError(EinsteinLabError, ValueError):
    """The fibre quadratic form q B q^T is not positive."""


class PreconditionError(EinsteinLabError, ValueError):
    pass


class SolverError(EinsteinLabError, RuntimeError):
    """A root finder failed; ``diagnostics`` carries whatever was learned."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class OutOfModelError(EinsteinLabError, ValueError):
    """Topological input for which the invariants are undefined (e.g. q1*q2 == 0)."""


class SchemaVersionError(EinsteinLabError, ValueError):
    pass
