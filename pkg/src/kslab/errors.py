"""Exception types raised by the kslab modules."""


class KSError(Exception):
    """Base class for all kslab errors."""


class NonPositiveParameter(KSError, ValueError):
    def __init__(self, name, value=None):
        self.name = name
        self.value = value
        super().__init__(f"parameter {name!r} must be > 0 (got {value!r})")


class BadDimension(KSError, ValueError):
    pass


class GridTooCoarse(KSError, ValueError):
    pass


class TruncationTooSmall(KSError, ValueError):
    pass


class BadAmplitude(KSError, ValueError):
    pass


class StableRegime(KSError, ValueError):
    pass


class InsufficientSamples(KSError, ValueError):
    pass


class NumericalContradiction(KSError, ArithmeticError):
    """A quantity that is provably well-behaved came out degenerate."""


class DegenerateEigenbasis(NumericalContradiction):
    pass


class PropagationOverflow(KSError, OverflowError):
    pass


class NonFinite(KSError, FloatingPointError):
    pass


class BlowUp(KSError):
    """Raised by the solver when the state stops being finite or bounded.

    ``last_time`` is the last time with a good state and ``trajectory`` holds
    everything recorded up to that point.
    """

    def __init__(self, last_time, trajectory=None, message=""):
        self.last_time = last_time
        self.trajectory = trajectory
        super().__init__(message or f"blow-up detected after t={last_time:.6g}")
