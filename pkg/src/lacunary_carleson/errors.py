"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid sizes, parameters, or experiment configuration."""


class FrequencyOverflowError(ValueError):
    """A requested frequency does not fit below the grid's Nyquist limit N/2."""


class GaugeError(ArithmeticError):
    """The Luxemburg bisection could not bracket a root for the given gauge."""


class InvariantViolation(AssertionError):
    """A theorem-shaped property failed on a concrete instance.

    Raised for coverage gaps in the tile classification and for covering
    rounds that break the round inequality. These are not recoverable states.
    """
