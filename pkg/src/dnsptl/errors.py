"""Exception hierarchy shared by all modules."""


class DnsptlError(Exception):
    """Base class."""


class ConfigError(DnsptlError, ValueError):
    """Invalid configuration or architecture."""


class InputError(DnsptlError, ValueError):
    """Bad arguments: shape mismatch, out-of-range values."""


class MetricError(DnsptlError, ValueError):
    """A metric is undefined for the given inputs (e.g. zero reference)."""


class TrainingError(DnsptlError, RuntimeError):
    """Training diverged."""


class DependencyError(DnsptlError, RuntimeError):
    """A pipeline stage ran before the artifact it needs exists."""


class ContainerError(DnsptlError, IOError):
    """Model or dataset file is corrupt, truncated or of an unknown version."""
