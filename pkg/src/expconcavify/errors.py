class ExpConcavifyError(Exception):
    """Base class for every error raised by the package."""


# --- Validation failures (CLI exit code 2) ---

class InvalidInputError(ExpConcavifyError, ValueError):
    pass


class OutOfRangeError(InvalidInputError):
    """A value fell outside a link range; `nearest` is the closest admissible endpoint."""

    def __init__(self, message, nearest):
        super().__init__(message)
        self.nearest = nearest


class ConfigurationError(InvalidInputError):
    pass


class DataFormatError(InvalidInputError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


# --- Runtime failures (CLI exit code 1) ---

class ComputationError(ExpConcavifyError, RuntimeError):
    pass


class SolverError(ComputationError):
    pass


class SubstitutionError(ComputationError):
    pass


class WeightCollapseError(ComputationError):
    pass


class GameError(ComputationError):
    def __init__(self, message, round_index):
        super().__init__(f"round {round_index}: {message}")
        self.round = round_index
