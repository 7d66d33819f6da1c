"""Exception types shared across the package."""


class SpmvTuneError(Exception):
    """Base class for all spmvtune errors."""


class MatrixMarketError(SpmvTuneError):
    """Malformed or unsupported Matrix Market input."""


class FormatInapplicableError(SpmvTuneError):
    """A storage format cannot represent this matrix within resource caps."""


class UnsupportedConfigError(SpmvTuneError):
    """The (format, library, lane) combination is not in the kernel table."""


class ModelSchemaError(SpmvTuneError):
    """A model file violates the portable ensemble schema."""


class SolverNumericalError(SpmvTuneError):
    """The iterative solve produced non-finite values."""


class StagnationError(SolverNumericalError):
    """Arnoldi breakdown without the residual meeting the tolerance."""
