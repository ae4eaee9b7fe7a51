"""Exception types shared across the package."""


class SpaceKeyError(Exception):
    pass


class BudgetExceeded(SpaceKeyError):
    """An enumeration ran out of its step or wall-clock quota.

    Distinct from an infinite complexity value: a truncated search never
    yields a complexity.
    """


class NoProgram(SpaceKeyError):
    pass


class DimensionMismatch(SpaceKeyError, ValueError):
    pass


class SearchExhausted(SpaceKeyError):
    pass


class ReconciliationExhausted(SpaceKeyError):
    pass


class PrefixNotCertified(SpaceKeyError):
    pass


class MalformedTranscript(SpaceKeyError, ValueError):
    pass


class InputTooLarge(SpaceKeyError, ValueError):
    pass
