"""Exception hierarchy shared by every module."""


class MagnonCavityError(Exception):
    """Base class for all toolkit errors."""


class DomainError(MagnonCavityError, ValueError):
    """Input lies outside the validity range of a model."""


class SingularTransmissionError(MagnonCavityError, ZeroDivisionError):
    """The transmission denominator vanishes (lossless double resonance)."""


class MissingParameterError(MagnonCavityError, ValueError):
    """An optional parameter required by this operation was not set."""


class DimensionError(MagnonCavityError, ValueError):
    """A requested grid or Hilbert-space block exceeds the documented cap."""


class ConvergenceError(MagnonCavityError, RuntimeError):
    """An iterative numerical routine did not converge."""


class ConfigError(MagnonCavityError, ValueError):
    """A configuration document is missing a key or holds an invalid value."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class SpectrumFormatError(MagnonCavityError, ValueError):
    """A spectrum file could not be parsed."""

    def __init__(self, message, line=None, offset=None):
        self.line = line
        self.offset = offset
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {offset}" if offset is not None else "") + ")"
        super().__init__(message + where)


class SpectrumStructureError(SpectrumFormatError):
    """A spectrum file parsed but its grid is inconsistent."""


class NoAnticrossingError(MagnonCavityError):
    """Branch data shows no resolvable avoided crossing."""
