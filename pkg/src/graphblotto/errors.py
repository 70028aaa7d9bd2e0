"""Exception types shared across the package."""


class BlottoError(Exception):
    """Base class for all package errors."""


class ConfigError(BlottoError):
    """Bad or inconsistent configuration (graph, counts, scheme, checkpoint metadata)."""


class GraphFormatError(ConfigError):
    """Malformed graph spec file or adjacency matrix."""


class InvalidActionError(BlottoError):
    """An action vector violates move validity for the current distribution."""


class CapExceededError(BlottoError):
    """An enumeration or action-space size exceeds the configured cap."""


class EpisodeOverError(BlottoError):
    """step() called on a terminal state."""


class CheckpointError(ConfigError):
    """Checkpoint file rejected: version, shape, or metadata mismatch."""


class NumericalFaultError(BlottoError):
    """Non-finite values encountered where finite numbers are required."""
