"""Exception types shared across the simulator."""


class InvalidArgumentError(ValueError):
    """Raised when an operation's preconditions are violated."""


class ConfigError(ValueError):
    """A configuration file or section could not be validated.

    ``field`` is the dotted path of the offending entry when known, and
    ``line`` the 1-based source line when the parser reports one.
    """

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.message = message
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field:
            where.append(f"field '{field}'")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
