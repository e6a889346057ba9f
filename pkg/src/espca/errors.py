"""Exception and warning types shared across the package."""


class EspcaError(Exception):
    """Base class for all package errors."""


class InvalidDataError(EspcaError, ValueError):
    """Input contains non-finite values or otherwise unusable data."""


class InsufficientRowsError(EspcaError, ValueError):
    pass


class ShapeError(EspcaError, ValueError):
    pass


class ConfigError(EspcaError, ValueError):
    pass


class UnknownLevelError(EspcaError, ValueError):
    """A categorical or ordinal value is not in the schema's level set."""

    def __init__(self, column, value, row=None):
        self.column = column
        self.value = value
        self.row = row
        where = f" at row {row}" if row is not None else ""
        super().__init__(f"unknown level {value!r} in column {column!r}{where}")


class DataLoadError(EspcaError, ValueError):
    pass


class UnsupportedSchemaError(EspcaError, ValueError):
    pass


class NumericalWarning(UserWarning):
    """Non-finite values were dropped or replaced during a computation."""
