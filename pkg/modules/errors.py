# modules/errors.py
from typing import Optional


class UffsiError(Exception):
    """Base class for every error raised by the simulator"""


class ParameterError(UffsiError, ValueError):
    """Invalid structure, pattern, sampling or noise parameters"""


class DimensionError(UffsiError, ValueError):
    """Array shapes that do not fit the grid, lattice or plan they are used with"""


class IncompleteMeasurementError(UffsiError):
    """A planned frequency is missing one or more phase readings"""


class SceneError(UffsiError):
    """Scene image could not be read or does not fit the grid"""


class FormatError(UffsiError):
    """Binary container with a bad magic, version or length"""


class NumericError(UffsiError):
    """Non-finite values in readings, spectra or images"""


class ConfigError(UffsiError):
    """Run config syntax or schema error, located by field and line when known"""

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        self.message = message
        self.field = field
        self.line = line
        super().__init__(self.__str__())

    def __str__(self) -> str:
        where = []
        if self.line is not None:
            where.append(f"line {self.line}")
        if self.field:
            where.append(self.field)
        if where:
            return f"{', '.join(where)}: {self.message}"
        return self.message
