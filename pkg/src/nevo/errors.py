"""Exception types shared across the package."""


class NevoError(Exception):
    pass


class ConfigError(NevoError, ValueError):
    """Invalid configuration or malformed descriptor."""


class ContractError(NevoError, RuntimeError):
    """An operation was called outside its precondition."""


class DatasetError(NevoError):
    pass


class ProtocolError(NevoError):
    """Worker protocol failure: timeout, bad frame, failed transfer."""


class FormatError(NevoError, ValueError):
    """A file could not be parsed."""
