"""Exception hierarchy shared by every module."""


class LpFormsError(Exception):
    """Base class for all library errors."""


class DegreeError(LpFormsError, ValueError):
    """Form degree outside ``0..n`` or a wedge overflowing the dimension."""


class ShapeError(LpFormsError, ValueError):
    pass


class NumericError(LpFormsError, ArithmeticError):
    """Non-finite values met during a computation.

    ``location`` carries the offending point when one is known.
    """

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class ArgumentError(LpFormsError, ValueError):
    pass


class MetricDegenerateError(NumericError):
    """Metric tensor is not symmetric positive definite at ``location``."""


class OrientationError(NumericError):
    """Coordinate Jacobian has non-positive determinant at ``location``."""


class DegenerateMapError(NumericError):
    """Smallest singular value fell below the degeneracy cutoff."""


class EmptySupportError(LpFormsError, ValueError):
    """A support mask selected none of the sample points."""


class ConfigError(LpFormsError):
    """Scenario file could not be parsed or validated."""

    def __init__(self, message, line=None, column=None, field=None, witness=None):
        super().__init__(message)
        self.line = line
        self.column = column
        self.field = field
        self.witness = witness


class OutputError(LpFormsError, OSError):
    """A report or export file could not be written; ``path`` names it."""

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path
