"""Exception hierarchy for morphoprot."""
from typing import Optional


class MorphoprotError(Exception):
    """Base class for every error raised by morphoprot."""


class NoAtoms(MorphoprotError):
    """Input contained no parsable ATOM/HETATM record."""


class MalformedRecord(MorphoprotError):
    """An ATOM/HETATM line whose fixed columns failed to parse."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class InvalidId(MorphoprotError):
    """Structure id does not look like a PDB id."""


class NetworkUnavailable(MorphoprotError):
    """Cache miss and the remote repository could not be reached."""


class NotFound(MorphoprotError):
    """Remote repository has no entry for the requested id."""


class EmptySelection(MorphoprotError):
    """Atom selector matched nothing."""


class UnsupportedSize(MorphoprotError):
    """Structuring element shape does not support the requested size."""


class DimensionMismatch(MorphoprotError):
    """Two grids that must share dimensions do not."""


class EmptyGrid(MorphoprotError):
    """Operation needs at least one set pixel."""


class TooFewScales(MorphoprotError):
    """Not enough box sizes for a regression."""


class ParamsMismatch(MorphoprotError):
    """Signatures computed with different parameters cannot be compared."""


class ConfigError(MorphoprotError):
    """Invalid configuration value or unknown configuration key."""

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key
