"""Exception types raised across the package."""


class GridshieldError(Exception):
    """Base class for all package errors."""


class OutOfBounds(GridshieldError, ValueError):
    pass


class InvalidIndex(GridshieldError, IndexError):
    pass


class ConfigMismatch(GridshieldError, ValueError):
    pass


class SingularFit(GridshieldError, ArithmeticError):
    pass


class Degenerate(GridshieldError, ValueError):
    pass


class UndefinedTransform(GridshieldError, ValueError):
    pass


class Uncontrollable(GridshieldError):
    """The shield allows no action at the queried state."""


class UncontrollableStart(Uncontrollable):
    """An episode was asked to start outside the controllable set."""


class CorruptFile(GridshieldError, ValueError):
    pass


class VersionMismatch(GridshieldError, ValueError):
    pass


class ConfigError(GridshieldError, ValueError):
    """Invalid run configuration. ``path`` names the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message
