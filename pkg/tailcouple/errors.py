"""
Exception hierarchy shared by the library, the CLI and the HTTP surface.

Every error carries the CLI exit code it maps to: 2 for invalid input or an
unsupported request, 3 when the fitted tail makes an integral diverge.
"""


class TailCoupleError(Exception):
    exit_code = 2


class InputError(TailCoupleError, ValueError):
    """Invalid argument or data."""


class EmptyInput(InputError):
    def __init__(self, message: str = "no observations supplied"):
        super().__init__(message)


class NonFiniteValue(InputError):
    def __init__(self, index: int):
        self.index = index
        super().__init__(f"non-finite value at index {index}")


class NegativeValue(InputError):
    def __init__(self, index: int):
        self.index = index
        super().__init__(f"negative value at index {index}")


class TooFewObservations(InputError):
    pass


class RankOutOfRange(InputError):
    pass


class ProbabilityOutOfRange(InputError):
    pass


class ArgumentOutOfRange(InputError):
    pass


class MalformedInput(InputError):
    def __init__(self, line: int, text: str):
        self.line = line
        super().__init__(f"line {line}: cannot parse {text!r} as a number")


class SpecStringError(InputError):
    pass


class ZeroThreshold(InputError):
    pass


class ThresholdConflict(InputError):
    pass


class BothZero(InputError):
    pass


class GridTooCoarse(InputError):
    pass


class DivisionByZero(TailCoupleError, ZeroDivisionError):
    pass


class UndefinedBias(TailCoupleError):
    pass


class VarianceUnavailable(TailCoupleError):
    pass


class VarianceUndefined(TailCoupleError):
    pass


class TailDivergence(TailCoupleError):
    exit_code = 3
