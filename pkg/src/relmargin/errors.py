"""Exception hierarchy shared by all relmargin modules."""


class RelmarginError(Exception):
    """Base class for every error raised deliberately by this package."""


class DegenerateVectorError(RelmarginError, ValueError):
    """A zero-norm (or non-finite) embedding reached a cosine computation."""


class ShapeError(RelmarginError, ValueError):
    """Inputs with mismatched dimensions or batch sizes."""


class DataFormatError(RelmarginError, ValueError):
    """Malformed or inconsistent input file / dataset."""


class ConfigError(RelmarginError, ValueError):
    """Invalid experiment configuration (unknown key, bad value)."""


class DivergenceError(RelmarginError, RuntimeError):
    """Training produced a non-finite loss or a degenerate embedding.

    ``record`` carries the diagnostic telemetry row of the failing step and
    ``telemetry`` everything recorded before it.
    """

    def __init__(self, message, record=None, telemetry=None):
        super().__init__(message)
        self.record = record
        self.telemetry = telemetry if telemetry is not None else []
