"""Exception hierarchy. Each class carries the CLI exit status it maps to."""


class EsgenError(Exception):
    exit_code = 3


class ConfigError(EsgenError, ValueError):
    """Invalid or inconsistent configuration (unknown names, bad params, parse errors)."""

    exit_code = 2


class PreconditionError(ConfigError):
    """A stated hypothesis of a bound or theorem does not hold for the given inputs."""


class InputError(ConfigError):
    pass


class DomainError(EsgenError, ValueError):
    pass


class NumericError(EsgenError, ArithmeticError):
    pass


class ModelError(NumericError):
    """The model violates its own declared data, e.g. J(x) below the declared minimum."""


class DivergenceError(NumericError):
    def __init__(self, msg, t_last=None):
        super().__init__(msg)
        self.t_last = t_last


class EscapeError(NumericError):
    def __init__(self, msg, t_exit=None):
        super().__init__(msg)
        self.t_exit = t_exit
