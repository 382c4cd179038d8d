"""Error types shared across the package.

The CLI maps these onto exit codes, so raising the right class matters more
than the message text.
"""


class TransitNetError(Exception):
    """Base class for all package errors."""


class ConfigError(TransitNetError):
    """Bad or contradictory configuration (CLI exit code 2)."""


class MissingArtifactError(TransitNetError):
    """A required workspace artifact is absent or stale (CLI exit code 3)."""


class DataError(TransitNetError):
    """Input data violates its schema or invariants beyond repair (CLI exit code 4)."""
