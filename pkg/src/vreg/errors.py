"""Exception types shared by all modules."""


class VregError(Exception):
    pass


class InvalidArgument(VregError, ValueError):
    pass


class UnsupportedError(VregError, NotImplementedError):
    pass


class ConfigError(VregError):
    """Raised by the config parser; carries an optional line number and field."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)
