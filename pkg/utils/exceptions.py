"""Exception hierarchy shared by the simulator, the analysis engine and the CLI."""


class ESError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(ESError, ValueError):
    """Invalid parameters, malformed config documents or unknown presets."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NotPositiveDefiniteError(ConfigError):
    pass


class NonQuadraticObjectiveError(ConfigError):
    pass


class DivergenceError(ESError):
    """Every trajectory of an ensemble became non-finite."""

    def __init__(self, message, n_diverged=None):
        self.n_diverged = n_diverged
        super().__init__(message)


class CurvatureError(ESError):
    pass


class MomentBoundError(ESError):
    """The variance bound went negative beyond the numerical guard."""


class BracketError(ESError):
    """A lower bracket exceeded its upper bracket."""
