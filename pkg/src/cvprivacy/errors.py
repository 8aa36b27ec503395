"""Exception types shared across the package."""


class CVPrivacyError(Exception):
    """Base class for all package errors."""


class MixedStateError(CVPrivacyError, ValueError):
    """A pure-state formula was called on a mixed state."""


class IllConditionedError(CVPrivacyError, ValueError):
    """A covariance matrix is too close to singular to invert reliably."""


class InsensitiveProbeError(CVPrivacyError, ValueError):
    """The QFIm has (numerically) zero trace, so the privacy measure is undefined."""


class InvariantViolation(CVPrivacyError, RuntimeError):
    """A numerical invariant (symplecticity, PSD, dual-route agreement) failed."""


class ConfigError(CVPrivacyError, ValueError):
    """A scenario configuration is malformed."""
