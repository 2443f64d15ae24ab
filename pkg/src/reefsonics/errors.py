"""Exception types shared across the pipeline, plus the CLI exit-code map."""

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_DATA = 4


class SonificationError(Exception):
    """Base class for every error raised by this package."""


class ConfigInvalid(SonificationError):
    """A config file, CLI flag combination, or parameter set is unusable."""


class DataError(SonificationError):
    """Input data violates the dataset contract (exit code 4)."""


class MissingColumn(DataError):
    """The schema names a column that is absent from the CSV header."""


class BadValue(DataError):
    """A field failed to parse or is out of range.

    `row` is the 1-based data row number (header excluded), `field` the
    semantic field name.
    """

    def __init__(self, message: str, *, row: int | None = None, field: str | None = None):
        super().__init__(message)
        self.row = row
        self.field = field


class EmptyDataset(DataError):
    """A stage received or produced zero usable records."""


class EmptyInput(DataError):
    """An algorithm was called with no points."""


class LengthMismatch(DataError):
    """Two parallel sequences differ in length."""


class DegenerateRange(SonificationError):
    """A normalization range has zero width (defensive; widened upstream)."""


class IndexOutOfRange(SonificationError):
    """A day index falls outside the timeline."""


class EmptyBank(SonificationError):
    """A grain bank contains no grains."""
