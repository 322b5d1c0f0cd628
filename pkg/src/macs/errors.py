"""Exception hierarchy shared across the package."""


class MacsError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(MacsError):
    """Invalid attribute space, partition, schema, or campaign configuration."""


class ContractViolation(MacsError):
    """A caller broke an operation precondition (range, dimension, alignment)."""


class InputError(MacsError):
    """A sequence input is empty, has the wrong length, or uses a bad alphabet."""


class ProtocolError(MacsError):
    """An external worker violated the wire protocol."""


class BridgeError(MacsError):
    """Transport failure talking to an external worker (launch, timeout, EOF)."""
