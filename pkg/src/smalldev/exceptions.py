"""Exception hierarchy shared by all modules."""


class SmallDevError(Exception):
    """Base class for every error raised by this package."""


class ModelError(SmallDevError, ValueError):
    """Invalid or degenerate moving-average or weight definition."""


class DomainError(SmallDevError, ValueError):
    """Argument outside the mathematical domain of a formula."""


class RegimeError(SmallDevError, ValueError):
    """The requested level is not a small deviation for the given spectrum."""


class NumericError(SmallDevError, ArithmeticError):
    """A numerical procedure failed to reach its tolerance."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class ResourceError(SmallDevError, MemoryError):
    """A dense object would exceed the configured memory budget."""


class EstimateFailure(SmallDevError, RuntimeError):
    """A Monte Carlo estimator produced no usable samples."""


class UnsupportedError(SmallDevError, NotImplementedError):
    """Input shape not handled by a closed-form routine."""


class ConfigError(SmallDevError, ValueError):
    """Malformed run configuration."""
