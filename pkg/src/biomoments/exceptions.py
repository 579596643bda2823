"""Exception hierarchy shared by every biomoments module."""


class BiomomentsError(Exception):
    """Base class for all data-level errors raised by the package."""


class DataFormatError(BiomomentsError, ValueError):
    """Input text does not follow the expected CSV layout."""


class RowError(DataFormatError):
    """A single CSV row failed to parse or violated a sample invariant."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class SequenceError(RowError):
    """Timestamps are not strictly increasing."""


class DomainError(BiomomentsError, ValueError):
    """An argument lies outside the domain of the operation."""


class InsufficientDataError(BiomomentsError, ValueError):
    """Too few samples or points for the requested statistic."""


class NoAnalyzableWindowsError(InsufficientDataError):
    """Windowing produced no window with enough samples."""


class DegenerateError(BiomomentsError, ValueError):
    """A column or series is constant where variation is required."""

    def __init__(self, name: str, message: str = "constant values"):
        super().__init__(f"{name}: {message}")
        self.name = name


class UndefinedShapeError(DomainError):
    """Skewness/kurtosis are undefined (zero-variance window); exclude the window."""
