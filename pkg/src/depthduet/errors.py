"""Exception types shared across modules (the CLI maps each to an exit code)."""


class ShapeMismatchError(ValueError):
    pass


class ConfigError(ValueError):
    pass
