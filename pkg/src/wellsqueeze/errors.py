"""Exception types raised across the package."""


class InvalidLevelError(ValueError):
    """Level index outside the allowed range."""


class InvalidCarrierError(ValueError):
    """No carrier exists for the requested level (e.g. the ground state)."""


class ProfileError(ValueError):
    """Inhomogeneity profile produced non-finite values."""


class InvalidTargetError(ValueError):
    pass


class TruncationError(RuntimeError):
    """Residual spectral weight could not be pushed below the requested bound."""


class SymmetryError(ValueError):
    """A target coefficient is nonzero on a mode that the field cannot couple to."""


class NormalizationError(ValueError):
    pass


class ConfigError(ValueError):
    """Scenario configuration failed validation."""


class IntegrationError(RuntimeError):
    """Adaptive integration failed; ``time`` holds the point of failure."""

    def __init__(self, message, time):
        super().__init__(f"{message} (t = {time!r})")
        self.time = time
