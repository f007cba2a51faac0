"""Exception types raised across the package."""


class AOPathError(Exception):
    pass


class DimensionError(AOPathError, ValueError):
    """Operand shapes do not conform."""


class EmptySequenceError(AOPathError, ValueError):
    pass


class NonFiniteError(AOPathError, FloatingPointError):
    """A NaN or Inf showed up in a forward value or a gradient."""


class InvariantError(AOPathError, RuntimeError):
    pass


class ConfigError(AOPathError, ValueError):
    pass


class LexiconError(AOPathError, ValueError):
    """Dictionary or embedding table could not be loaded."""


class UnknownTokenError(LexiconError, KeyError):
    pass


class DataError(AOPathError, ValueError):
    """Malformed QA record or dataset file."""
