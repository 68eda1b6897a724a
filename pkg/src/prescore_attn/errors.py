"""Exception hierarchy shared by every module of the package."""


class PrescoreError(Exception):
    """Base class for all errors raised by prescore_attn."""


class EmptyDimensionError(PrescoreError, ValueError):
    pass


class DimensionMismatchError(PrescoreError, ValueError):
    pass


class DegenerateRowError(PrescoreError, ValueError):
    def __init__(self, row: int):
        super().__init__(f"row {row} is the zero vector and cannot be normalized")
        self.row = row


class SingularGramError(PrescoreError, ArithmeticError):
    pass


class NumericError(PrescoreError, ArithmeticError):
    pass


class ClusteringError(PrescoreError, RuntimeError):
    pass


class ConfigError(PrescoreError, ValueError):
    """Invalid configuration; ``field`` names the offending key when known."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field
