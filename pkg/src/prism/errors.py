"""Exception hierarchy shared across the package.

CLI exit-code mapping: ConfigError (and subclasses) exit with 2,
NumericalError with 3. SsqOverflowError is a hard simulation fault and is
never swallowed: it signals a queue-sizing violation, not bad user input.
"""


class PrismError(Exception):
    """Base class for all package errors."""


class ConfigError(PrismError):
    """Invalid configuration, preset name, flag value, or input file."""


class TraceFormatError(ConfigError):
    """Malformed activation-trace line; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"trace line {line_no}: {message}")
        self.line_no = line_no


class NumericalError(PrismError):
    """A numerical routine failed to converge or left its domain."""


class SsqOverflowError(PrismError):
    """Sampled Slot Queue exceeded its capacity.

    The queue is sized so this cannot happen under the supported protocol
    parameters; hitting it means the configuration violates the sizing bound
    and the simulation result would be meaningless.
    """
