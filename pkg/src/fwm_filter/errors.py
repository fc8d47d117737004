"""Exception types raised across the package.

Numerical failures derive from :class:`NumericalError` and configuration
problems from :class:`ConfigError`; the CLI maps the two families onto
distinct exit codes.
"""


class FWMError(Exception):
    """Base class for all package errors."""


class NumericalError(FWMError):
    """A computation could not produce a trustworthy result."""


class SingularSystem(NumericalError):
    """The trace-constrained Liouvillian is rank deficient."""


class NotConverged(NumericalError):
    def __init__(self, residual: float, t_max: float):
        self.residual = residual
        self.t_max = t_max
        super().__init__(
            f"time evolution did not reach steady state by t = {t_max:g} us "
            f"(|drho/dt| = {residual:.3e})"
        )


class PerturbativeBreakdown(NumericalError):
    def __init__(self, message: str, full=None, halved=None, delta_2=None):
        self.full = full
        self.halved = halved
        self.delta_2 = delta_2
        if delta_2 is not None:
            message = f"{message} (delta_2 = {delta_2:g} MHz)"
        super().__init__(message)


class NoHalfCrossing(NumericalError):
    """The spectrum never falls below half maximum on one side of its peak."""


class EmptySpectrum(NumericalError):
    """A spectrum carries no nonzero amplitude."""


class GridMismatch(NumericalError):
    """Two objects were sampled on incompatible grids."""


class EdgeOutsideGrid(FWMError, ValueError):
    """A pulse edge lies outside the time grid."""


class WindowOutsideGrid(FWMError, ValueError):
    """A requested time window extends past the grid."""


class BoundaryEnergyError(NumericalError):
    """Too much energy near the grid ends; circular convolution would wrap."""


class NoOffGap(FWMError, ValueError):
    """The coupling channel does not contain exactly one off-gap."""


class GapOutsidePulse(UserWarning):
    """The storage gate misses the generated signal; retrieval is ~zero."""


class SweepError(NumericalError):
    """A sweep row failed. ``partial`` holds the rows completed before it."""

    def __init__(self, param: float, cause: Exception, partial):
        self.param = param
        self.cause = cause
        self.partial = partial
        super().__init__(f"sweep failed at param = {param:g}: {cause}")


class ConfigError(FWMError):
    """Base class for configuration problems."""


class ParseError(ConfigError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        self.line = line
        self.key = key
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)


class ValidationError(ConfigError):
    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


class IndexOutOfRange(FWMError, IndexError):
    """A density-matrix index outside 1..4 was requested."""
