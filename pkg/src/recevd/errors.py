"""Exception types shared across the package.

Each exception maps onto one CLI exit code (see :mod:`recevd.cli`).
"""


class RecevdError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(RecevdError, ValueError):
    """Invalid parameters or configuration."""

    exit_code = 2


class DivergedOrbit(RecevdError):
    """An orbit left the escape bound (typically a non-attractor start)."""

    exit_code = 3


class NoReturn(RecevdError):
    """A flow orbit failed to cross the Poincare section within the time budget."""

    exit_code = 3


class InsufficientData(RecevdError):
    """Too few usable points for a fit or an interval estimate."""

    exit_code = 4


class EmptyBall(InsufficientData):
    """A ball (or exceedance event) received no orbit visits."""
