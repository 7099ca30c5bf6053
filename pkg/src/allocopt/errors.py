"""Exception hierarchy shared by the solvers and the CLI."""


class AllocError(ValueError):
    """Base class for every error raised by :mod:`allocopt`."""


class DomainError(AllocError):
    """An argument lies outside the domain of the operation."""


class DegenerateParameterError(DomainError):
    """Access probability of 0 or 1 makes the normal relaxation undefined."""


class InfeasibleError(AllocError):
    """No allocation exists for the requested budget / memory profile."""


class EnumerationSizeError(AllocError):
    """An exhaustive enumeration would exceed its desk-scale bound."""


class NoRootError(AllocError):
    """The crossover equation has no sign change on the search bracket."""


class SecondObjectInfeasibleError(InfeasibleError):
    """The residual memory left by the first object cannot hold the second."""
