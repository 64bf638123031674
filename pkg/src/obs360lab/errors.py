"""Exception types raised across the package."""


class InvalidArgument(ValueError):
    pass


class InvalidDecision(ValueError):
    """A policy emitted a bitrate vector outside the feasible set."""


class HorizonExceeded(RuntimeError):
    """The capacity trace ran out before a download finished."""


class InstanceTooLarge(ValueError):
    pass


class ParseError(ValueError):
    def __init__(self, message, lineno=None, path=None):
        self.lineno = lineno
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if lineno is not None:
            where += f"{lineno}:"
        super().__init__(f"{where} {message}" if where else message)


class ValidationError(ValueError):
    pass


class ConfigError(ValueError):
    pass
