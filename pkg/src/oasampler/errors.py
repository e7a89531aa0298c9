"""Exception types raised across the package."""


class ParameterDomainError(ValueError):
    """A prior or kernel hyperparameter lies outside its admissible range."""


class ResourceLimitError(RuntimeError):
    """An enumeration or truncation would exceed its configured size cap."""


class StateInvariantError(RuntimeError):
    """A sampler state violates one of its structural invariants."""


class UnsupportedPriorError(TypeError):
    """The requested operation is not available for this mixing prior."""


class TruncationOverflowError(RuntimeError):
    """The slice sampler needed more sticks than its hard cap allows."""


class ConfigError(ValueError):
    """Invalid experiment configuration."""


class IngestionError(ValueError):
    """Malformed observation file."""
