"""Exception hierarchy shared by every module."""


class LindynError(Exception):
    """Base class for all errors raised by lindyn."""


class IndexBeyondValidity(LindynError, IndexError):
    """An operation would read entries past a vector's valid prefix."""


class MatrixRangeExceeded(LindynError, IndexError):
    """A Koethe matrix window is too small for the requested evaluation."""


class SpaceMismatch(LindynError, ValueError):
    """Vectors or operators from incompatible spaces were combined."""


class WeightLengthMismatch(LindynError, ValueError):
    """Operator weights do not cover the vector's valid range."""


class ValidityExhausted(LindynError):
    """Not enough valid coordinates remain for the requested applications.

    ``achieved`` is the largest horizon that could be reached; ``partial``
    carries whatever partial result the raising operation produced.
    """

    def __init__(self, message, achieved=0, partial=None):
        super().__init__(message)
        self.achieved = achieved
        self.partial = partial


class HorizonTooSmall(LindynError, ValueError):
    pass


class UnboundedInput(LindynError, ValueError):
    pass


class ConstructionFailed(LindynError, RuntimeError):
    """A deterministic builder produced output that fails its own validator."""


class StarFamilyExhausted(LindynError, ValueError):
    pass


class LengthBudgetExceeded(LindynError, OverflowError):
    pass


class NotInvertible(LindynError, ValueError):
    pass


class ModulusUnavailable(LindynError):
    pass


class EmptyReturnSet(LindynError, ValueError):
    pass


class NoConvergentSubsequence(LindynError):
    def __init__(self, message, depth=0):
        super().__init__(message)
        self.depth = depth


class WindowOutOfRange(LindynError, IndexError):
    pass


class HypothesisFailed(LindynError):
    def __init__(self, message, index):
        super().__init__(message)
        self.index = index


class BoundViolation(LindynError, ValueError):
    """A test functional returned a value outside its declared bound."""


class ConfigError(LindynError):
    """Invalid experiment configuration, located by section/field/line."""

    def __init__(self, message, section=None, field=None, line=None):
        where = ".".join(p for p in (section, field) if p)
        loc = f"[{where}]" if where else ""
        if line is not None:
            loc += f" (line {line})"
        super().__init__(f"{loc} {message}".strip())
        self.section = section
        self.field = field
        self.line = line
