"""Exception hierarchy shared by all modules."""


class ClockStabError(Exception):
    """Base class for every error raised by this package."""


class DomainError(ClockStabError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConvergenceError(ClockStabError, ArithmeticError):
    """A root finder or quadrature failed to converge."""


class DegenerateStateError(ClockStabError, ValueError):
    """The spin state has (numerically) vanishing contrast."""


class ResourceError(ClockStabError):
    """Requested computation exceeds a cost guard."""


class NumericFault(ClockStabError, ArithmeticError):
    """Non-finite values appeared during a simulation."""


class ConfigError(ClockStabError, ValueError):
    """Malformed or unresolvable run configuration."""
