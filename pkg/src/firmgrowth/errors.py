"""Exception hierarchy.

Configuration problems (bad parameters) and data problems (bad or
insufficient input data) are kept apart so the command line can map them
to distinct exit codes.
"""


class FirmGrowthError(Exception):
    """Base class for all package errors."""


class ConfigurationError(FirmGrowthError, ValueError):
    """Invalid model or experiment parameters."""


class DomainError(ConfigurationError):
    """Argument outside the domain of a closed-form expression."""


class InvalidRatesError(ConfigurationError):
    """Generalized birth/death rates with a nonpositive net growth."""


class DataError(FirmGrowthError, ValueError):
    """Malformed or unusable input data."""


class InsufficientDataError(DataError):
    """Not enough observations for a statistic to be defined."""


class CollapseError(DataError):
    """Curves could not be brought onto a common scaling curve."""


class IngestionError(DataError):
    """CSV input rejected; ``problems`` lists ``(row_number, message)``."""

    def __init__(self, message, problems=()):
        super().__init__(message)
        self.problems = list(problems)

    def __str__(self):
        base = super().__str__()
        if not self.problems:
            return base
        lines = [f"  row {row}: {msg}" for row, msg in self.problems]
        return "\n".join([base, *lines])


class FormatError(DataError):
    """Input file does not follow the expected layout (e.g. wrong header)."""
