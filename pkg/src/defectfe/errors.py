"""Exception types shared across the package."""


class DefectFEError(Exception):
    """Base class for package errors."""


class ConfigError(DefectFEError):
    """Invalid or unreadable run configuration (CLI exit code 2)."""


class NumericalError(DefectFEError):
    """A solver or quadrature failed to converge (CLI exit code 3)."""


class QuadratureError(NumericalError):
    pass


class SolverError(NumericalError):
    pass
