"""Exception hierarchy shared by all kneetex modules."""


class KneeTexError(ValueError):
    """Base class for user-facing errors (bad inputs, degenerate data)."""


class DegenerateFrameError(KneeTexError):
    pass


class OutOfBoundsError(KneeTexError):
    pass


class PatchSizeError(KneeTexError):
    pass


class UndefinedRoughnessError(KneeTexError):
    pass


class InsufficientDataError(KneeTexError):
    pass


class SingleClassError(KneeTexError):
    pass


class UnreachableTargetError(KneeTexError):
    pass


class ParseError(KneeTexError):
    pass


class FeatureVectorError(KneeTexError):
    """Raised when one or more ROIs fail; ``failures`` maps ROI name to message."""

    def __init__(self, failures):
        self.failures = dict(failures)
        detail = "; ".join(f"{k}: {v}" for k, v in self.failures.items())
        super().__init__(f"{len(self.failures)} ROI failure(s): {detail}")
