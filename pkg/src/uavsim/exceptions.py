"""Exception types raised by the simulator."""


class ConfigError(ValueError):
    """Invalid scenario or study configuration."""


class NumericalError(RuntimeError):
    """A numerical routine failed in a way the caller cannot recover from."""
