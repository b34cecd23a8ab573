"""Exception types raised by the alignment schemes and the evaluation layer."""


class RelayIAError(Exception):
    """Base class for every error raised by this package."""


class IllConditioned(RelayIAError):
    """A linear system failed the row-rank test; the channel should be resampled."""


class DegenerateDenominator(RelayIAError):
    """A channel-dependent divisor is numerically zero; the channel should be resampled."""


class InfeasibleRelayCount(RelayIAError):
    """Too few relay variables for the number of alignment equations."""

    def __init__(self, required, message=None):
        self.required = required
        super().__init__(message or f"required relays: {required}")


class AlignmentNotVerified(RelayIAError):
    """Rates were requested for an effective channel whose alignment check did not pass."""


class TooManySkipped(RelayIAError):
    """A sweep skipped more trials than the allowed fraction."""

    def __init__(self, skipped, trials, reasons):
        self.skipped = skipped
        self.trials = trials
        self.reasons = dict(reasons)
        super().__init__(
            f"{skipped} of {trials} trials skipped ({self.reasons})"
        )


# Failures that mean "draw another channel", not "the scheme is wrong".
RESAMPLE_ERRORS = (IllConditioned, DegenerateDenominator)
