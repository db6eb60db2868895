"""Exception categories shared by every module; the CLI maps each to an exit code."""


class DFRError(Exception):
    category = "error"


class ConfigurationError(DFRError, ValueError):
    category = "configuration error"


class DataError(DFRError, ValueError):
    category = "data error"


class NumericError(DFRError, ArithmeticError):
    category = "numeric error"


class StorageError(DFRError, OSError):
    category = "i/o error"
