"""Exception hierarchy shared by the library and the CLI exit codes."""


class BlockSketchError(Exception):
    """Base class for every error raised by blocksketch."""


class ConfigError(BlockSketchError, ValueError):
    """A parameter or precondition was violated (CLI exit status 2)."""


class NumericalError(BlockSketchError, ArithmeticError):
    """A computation broke down at runtime (CLI exit status 3)."""


class LeastSquaresError(NumericalError):
    """The least-squares solver inside recovery failed."""
