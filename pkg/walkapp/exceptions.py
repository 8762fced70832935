"""Error types raised by the walkapp simulation modules.

Two families matter to callers: ``InvalidArgumentError`` (bad input, maps to a
configuration error) and ``NumericalError`` (the computation itself cannot
proceed, e.g. at a gap closing).
"""


class WalkError(Exception):
    """Base class of every error raised by walkapp."""


class InvalidArgumentError(WalkError, ValueError):
    pass


class CombinatorialLimitError(InvalidArgumentError):
    pass


class EmptyImageError(InvalidArgumentError):
    pass


class NumericalError(WalkError):
    pass


class NumericalDomainError(NumericalError):
    pass


class DegeneratePointError(NumericalError):
    def __init__(self, message, q=None):
        super().__init__(message)
        self.q = q


class NearCriticalError(NumericalError):
    def __init__(self, message, delta=None, min_gap=None):
        super().__init__(message)
        self.delta = delta
        self.min_gap = min_gap


class WindowOverflowError(NumericalError):
    pass


class EdgeTrackingError(NumericalError):
    """Branch tracking on a strip spectrum was ambiguous; use a finer q_y sampling."""


class CalibrationError(NumericalError):
    pass
