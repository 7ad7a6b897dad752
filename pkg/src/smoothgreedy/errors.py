"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Array shapes disagree with a declared parameter shape."""


class DomainError(ValueError):
    """A scalar argument lies outside its admissible range."""


class InputError(ValueError):
    """Non-finite or otherwise unusable numeric input."""


class EmptyErrorSetError(ValueError):
    """The error set around the true parameter is the single point {0}."""


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""


class SolverDivergenceError(RuntimeError):
    """The projected-gradient objective became non-finite."""


class SamplingError(RuntimeError):
    """A Monte Carlo conditioning event is too rare to sample by rejection."""
