"""Exception types shared across the package.

Each category mirrors one failure mode of the public API so callers can
distinguish bad configuration from bad data from numerical breakdown.
"""


class SaccadeError(Exception):
    """Base class for all package errors."""


class ConfigurationError(SaccadeError):
    """Invalid plant, cost, or run configuration."""


class ContractError(SaccadeError):
    """Dimension or index mismatch between otherwise valid objects."""


class SynthesisError(SaccadeError):
    """Gain synthesis broke down (ill-conditioned control-cost factor)."""


class VerificationError(SaccadeError):
    """A self-consistency check exceeded its tolerance."""


class IngestionError(SaccadeError):
    """Recording file could not be parsed or failed validation."""


class DetectionError(SaccadeError):
    """No usable movement found in a velocity trace."""


class AnalysisError(SaccadeError):
    """Data pipeline or sweep could not produce a result."""


class MetricError(SaccadeError):
    """Error metric undefined for the given inputs."""


class FitWarning(UserWarning):
    """Non-fatal oddity during parameter estimation (flat objective etc.)."""
