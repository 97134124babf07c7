"""Exception hierarchy shared by every module."""


class VcnkError(Exception):
    """Base class for all library errors."""


class ExplosionGuard(VcnkError):
    """An enumeration would exceed the configured point cap."""


class NotInjective(VcnkError, ValueError):
    pass


class MissingPoint(VcnkError, KeyError):
    """A hypothesis table has no value at the requested configuration."""


class DomainError(VcnkError, ValueError):
    pass


class NormalizationError(VcnkError, ValueError):
    """Probability weights are negative or do not sum to exactly 1."""


class NotACover(VcnkError):
    """A collection of subsets does not cover the cube at the given radius."""


class NotRealizable(VcnkError):
    pass


class EmptyClass(VcnkError, ValueError):
    pass


class NoCover(VcnkError):
    """Some member is not within precision of any member of the class."""


class NotInImage(VcnkError, ValueError):
    """A partite table is not the partization of any k-ary hypothesis."""


class InvalidCenters(VcnkError):
    pass


class IndexCollision(VcnkError):
    pass


class BudgetExhausted(VcnkError):
    """A sample-size search hit its cap without meeting the criterion."""


class ParseError(VcnkError):
    """Instance-file error, positioned by JSON path (and line/column when known)."""

    def __init__(self, message, path="$", line=None, column=None):
        self.path = path
        self.line = line
        self.column = column
        where = path if line is None else f"line {line}, column {column}"
        super().__init__(f"{where}: {message}")
