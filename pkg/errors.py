"""
Errors module for the multiple-testing laboratory
Every failure raised by the library derives from LabError
"""


class LabError(Exception):
    """Base class for laboratory errors"""


class DomainError(LabError, ValueError):
    """Argument outside the mathematical domain of an operation"""


class UnsupportedOperationError(LabError):
    """Operation not defined for this model variant"""


class InfiniteVarianceError(LabError):
    """Variance of the disturbance law does not exist"""


class ParameterError(LabError, ValueError):
    """Parameters produce an invalid model (e.g. negative coefficients)"""


class ModelError(LabError):
    """Gaussian window model could not be constructed"""


class DegenerateSampleError(LabError):
    """A group of replicates has zero variance"""

    def __init__(self, row, message=None):
        self.row = row
        super().__init__(message or f'Row {row} has zero within-row variance')


class InsufficientTailMassError(LabError):
    """Monte Carlo budget too small for the requested tail probability"""


class CalibrationError(LabError):
    """Threshold ladder could not be calibrated"""


class NumericalError(LabError, ArithmeticError):
    """A computed distribution lost mass beyond tolerance"""


class ConfigError(LabError):
    """Experiment configuration is invalid"""


class WindowRangeError(LabError, IndexError):
    """Window extends beyond the series"""


class OutputError(LabError):
    """Writing an output file failed"""

    def __init__(self, path, reason):
        self.path = path
        super().__init__(f'{path}: {reason}')


# CLI exit codes
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def exit_code_for(exc):
    """Map an exception to the CLI exit code"""
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    return EXIT_RUNTIME
