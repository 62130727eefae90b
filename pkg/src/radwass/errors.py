"""Exception types raised across the package."""


class RadwassError(Exception):
    """Base class for all package errors."""


class InvalidParameter(RadwassError, ValueError):
    pass


class InvalidDomain(RadwassError, ValueError):
    pass


class MassMismatch(RadwassError, ValueError):
    pass


class InvalidMap(RadwassError, ValueError):
    pass


class DivisionGuard(RadwassError, ArithmeticError):
    """A density touched zero where a velocity field needs to divide by it."""


class StepFailure(RadwassError, RuntimeError):
    """Newton iterations failed even after the allowed number of dt halvings."""


class CFLViolation(RadwassError, RuntimeError):
    pass


class MollificationError(RadwassError, RuntimeError):
    pass


class ConfigError(RadwassError, ValueError):
    pass
