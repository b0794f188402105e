"""Exception hierarchy shared by every gridosc module.

The CLI maps these onto exit codes: ``UsageError``/``ParameterError`` -> 1,
``FormatError``/``DataError``/``RangeError`` -> 2, ``NumericalError`` -> 3.
"""


class GridOscError(Exception):
    """Base class for all package errors."""


class ParameterError(GridOscError, ValueError):
    """An argument is outside its allowed domain."""


class FormatError(GridOscError, ValueError):
    """An input file does not follow the expected layout."""


class DataError(GridOscError, ValueError):
    """Sample data violates a precondition (NaN gaps, bad timestamps...)."""


class RangeError(GridOscError, ValueError):
    """A time/frequency range falls outside the available data."""


class NumericalError(GridOscError, ArithmeticError):
    """A numerical procedure cannot produce a meaningful result."""


class ShapeReferenceError(GridOscError, ValueError):
    """The chosen mode-shape reference channel carries (almost) no mode."""
