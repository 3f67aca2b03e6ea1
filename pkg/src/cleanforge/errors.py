"""Exception hierarchy shared by all cleanforge modules."""


class CleanforgeError(Exception):
    """Base class for every error raised by the engine."""


class DataError(CleanforgeError):
    """Bad input data or files (CLI exit code 2)."""


class IoError(DataError, OSError):
    pass


class ParseError(DataError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class SchemaMismatch(DataError):
    pass


class UnknownAttribute(DataError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its argument otherwise
        return Exception.__str__(self)


class TypeMismatch(DataError, TypeError):
    pass


class NonNumeric(TypeMismatch):
    pass


class FormatError(DataError, ValueError):
    def __init__(self, message: str, pointer: str = ""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer


class InconsistentDelta(CleanforgeError):
    pass


class UnknownOperator(CleanforgeError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class DegenerateTraining(CleanforgeError):
    pass


class DimensionMismatch(CleanforgeError, ValueError):
    pass


class EmptyPool(CleanforgeError):
    pass


class PoolClosed(CleanforgeError):
    pass


class WorkerPanic(CleanforgeError):
    def __init__(self, worker_id: int, cause: BaseException):
        super().__init__(f"worker {worker_id} failed: {cause!r}")
        self.worker_id = worker_id
        self.cause = cause


class WordlistTooSmall(CleanforgeError):
    pass


class ConfigError(CleanforgeError):
    """Invalid run configuration (CLI exit code 1)."""
