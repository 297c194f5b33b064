class LevelGeomError(Exception):
    """Base class for every error raised by levelgeom."""


class DomainError(LevelGeomError, ValueError):
    pass


class FieldSyntaxError(LevelGeomError, SyntaxError):

    def __init__(self, message, offset, text=""):
        super().__init__(f"{message} at offset {offset}")
        self.message = message
        self.offset = offset
        self.text = text


class NearCriticalError(LevelGeomError, ArithmeticError):
    pass


class CriticalValueError(LevelGeomError, ValueError):

    def __init__(self, message, value):
        super().__init__(message)
        self.value = value


class NotMorseError(LevelGeomError, ArithmeticError):

    def __init__(self, message, location):
        super().__init__(message)
        self.location = location


class TopologyError(LevelGeomError, RuntimeError):
    pass


class UnsupportedDimensionError(LevelGeomError, ValueError):
    pass


class PreconditionError(LevelGeomError, ValueError):
    pass


class ConfigError(LevelGeomError, ValueError):
    pass
