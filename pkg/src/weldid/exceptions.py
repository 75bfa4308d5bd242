"""Exception hierarchy.

Everything raised on bad input data derives from :class:`DataError`, and
everything raised on bad parameters from :class:`ConfigError`; the CLI maps
the two families to exit codes 1 and 2.
"""


class WeldIdError(Exception):
    """Base class for all package errors."""


class DataError(WeldIdError, ValueError):
    """Input data violates a format or content contract."""


class ConfigError(WeldIdError, ValueError):
    """Parameters or configuration are invalid."""


# -- ingest ------------------------------------------------------------------

class MissingColumn(DataError):
    def __init__(self, column):
        self.column = column
        super().__init__(f"header lacks required column {column!r}")


class UnknownColumn(DataError):
    def __init__(self, column):
        self.column = column
        super().__init__(f"column {column!r} is not part of the schema")


class DuplicateAttribute(DataError):
    def __init__(self, column):
        self.column = column
        super().__init__(f"column {column!r} declared more than once")


class NonNumericCell(DataError):
    def __init__(self, row, column, text):
        self.row = row
        self.column = column
        self.text = text
        super().__init__(f"row {row}, column {column!r}: {text!r} is not numeric")


class ArityMismatch(DataError):
    def __init__(self, row, expected, got):
        self.row = row
        self.expected = expected
        self.got = got
        where = f"row {row}: " if row is not None else ""
        super().__init__(f"{where}expected {expected} fields, got {got}")


class MissingDataSection(DataError):
    pass


class UnknownNominalValue(DataError):
    def __init__(self, row, value):
        self.row = row
        self.value = value
        super().__init__(f"row {row}: label {value!r} is not one of S, N")


class UnsupportedArff(DataError):
    pass


class UnlabeledRow(DataError):
    def __init__(self, row):
        self.row = row
        super().__init__(f"row {row} has no weld label")


# -- preprocess --------------------------------------------------------------

class NotSorted(DataError):
    def __init__(self, row):
        self.row = row
        super().__init__(f"odometer decreases at row {row}")


class WindowTooWide(ConfigError):
    pass


class InsufficientNegatives(DataError):
    pass


class OverlapWithTraining(DataError):
    pass


# -- models / evaluation -----------------------------------------------------

class EmptyClass(DataError):
    pass


class EmptySubset(ConfigError):
    pass


class TooManyFeatures(ConfigError):
    pass


class LengthMismatch(DataError):
    pass


class NoConvergence(WeldIdError, RuntimeError):
    pass


class ClassTooSmall(DataError):
    pass


class EmptyMatrix(DataError):
    pass


class UndefinedRate(DataError):
    pass


class OneClassOnly(DataError):
    pass


class InvalidConfig(ConfigError):
    pass
