"""Exception types and process exit codes."""


class KoopstabError(Exception):
    """Base class for all package errors."""


class GridMismatchError(KoopstabError):
    """Two sampled functions do not live on the same grid."""


class ParameterError(KoopstabError):
    """Invalid parameter value (bad config, omega = 0, ...)."""


class IntegrationError(KoopstabError):
    """Time integration failed before reaching the next output time."""

    def __init__(self, msg, last_time=None, last_state=None):
        super().__init__(msg)
        self.last_time = last_time
        self.last_state = last_state


class BlowUpError(KoopstabError):
    """A simulation hit the blow-up detector where that is not allowed."""

    def __init__(self, msg, blowup_time=None, sample=None):
        super().__init__(msg)
        self.blowup_time = blowup_time
        self.sample = sample


class DataError(KoopstabError):
    """Non-finite or degenerate data (names the offending sample if known)."""


class SelectionError(KoopstabError):
    """Principal eigenpair selection could not produce n candidates."""


class EstimateError(KoopstabError):
    """A scalar estimate is singular (e.g. rho denominator below tolerance)."""


class SynthesisError(KoopstabError):
    """Controller synthesis failed (uncontrollable pair, bad targets)."""


class ResonanceError(KoopstabError):
    """A homological divisor fell below tolerance."""

    def __init__(self, msg, component=None, multi_index=None):
        super().__init__(msg)
        self.component = component
        self.multi_index = multi_index


class NumericalError(KoopstabError):
    """Generic numerical failure (eigensolver breakdown, ...)."""


# CLI exit codes
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_ACCEPTANCE = 4
