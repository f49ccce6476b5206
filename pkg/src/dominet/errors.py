"""Exception hierarchy shared across the package.

DataError maps to CLI exit code 2, NumericError to exit code 3.
"""


class DominetError(Exception):
    pass


class DataError(DominetError):
    """Malformed, inconsistent, or degenerate input data."""


class ParseError(DataError):
    """CSV or config syntax problem; message carries row/column location."""


class ValidationError(DataError):
    """Structurally parseable input violating a contract (duplicates, order, labels)."""


class DegenerateDataError(DataError):
    """Zero-variance column, degenerate variance, all-zero norms, and similar."""


class DimensionError(DataError):
    """Shape or length mismatch between related inputs."""


class NumericError(DominetError):
    """Numerical failure: NaN/Inf inputs, invalid probability levels."""
