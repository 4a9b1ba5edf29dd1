"""Exception taxonomy. Every failure surfaced to callers carries one of these names."""


class TabdiffError(Exception):
    """Base class for all library errors."""


# --- ingestion ---

class EmptyFile(TabdiffError):
    pass


class MissingColumn(TabdiffError):
    pass


class UnknownCategory(TabdiffError):
    def __init__(self, column, row, value):
        super().__init__(f"column {column!r}, row {row}: value {value!r} not in vocabulary")
        self.column = column
        self.row = row
        self.value = value


class UnparseableNumeric(TabdiffError):
    def __init__(self, column, row, value):
        super().__init__(f"column {column!r}, row {row}: {value!r} is not a finite number")
        self.column = column
        self.row = row
        self.value = value


class VocabularyOverflow(TabdiffError):
    pass


class InvalidFraction(TabdiffError):
    pass


class SchemaNotFound(TabdiffError):
    pass


class SchemaError(TabdiffError):
    """Schema file or schema invariant violation."""


# --- transforms ---

class ConstantColumn(TabdiffError):
    pass


# --- network / training ---

class OddDimension(TabdiffError):
    pass


class NonFiniteLoss(TabdiffError):
    pass


class InvalidRange(TabdiffError):
    pass


class StepOutOfRange(TabdiffError):
    pass


# --- evaluation ---

class EmptyColumn(TabdiffError):
    pass


class EmptyDataset(TabdiffError):
    pass


class SchemaMismatch(TabdiffError):
    pass


class MissingLabelColumn(TabdiffError):
    pass


# --- checkpoint / cli ---

class UnknownLabel(TabdiffError):
    pass


class CorruptCheckpoint(TabdiffError):
    pass
