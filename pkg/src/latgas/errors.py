"""Exception types shared across the package."""


class LatgasError(Exception):
    """Base class for all package errors."""


class SymmetryError(LatgasError):
    """Velocity set fails a required closure or moment identity."""


class ConvergenceError(LatgasError):
    """An iterative solve (Newton inversion, eigensolver) did not converge."""


class NegativeRateError(LatgasError):
    """A jump kernel entry came out negative for the requested (N, a, M)."""


class InvalidParamsError(LatgasError):
    """Simulation parameters violate a hard requirement."""


class ExponentError(InvalidParamsError):
    """Scaling exponents (a, b) fail the admissibility inequalities."""


class CFLError(LatgasError):
    """Requested PDE time step exceeds the stability bound."""


class NonSolenoidalError(LatgasError):
    """Vector field handed to the incompressible solver has divergence."""


class DomainError(LatgasError):
    """Argument outside the admissible range of a combinatorial function."""


class InfeasibleSectorError(LatgasError):
    """No configuration realizes the requested conserved vector."""


class ConsistencyError(LatgasError):
    """Internal audit found incremental state out of sync with a recount."""


class ConfigError(LatgasError):
    """Malformed configuration file or command-line override."""
