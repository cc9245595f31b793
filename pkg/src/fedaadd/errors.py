"""Exception types shared across the simulator."""


class ConfigurationError(Exception):
    """Raised when a configuration value or combination is invalid."""


class ProtocolError(Exception):
    """Raised when exchanged parameter vectors violate the round protocol,
    e.g. mismatched shapes in an aggregate."""


class AllClientsBlacklistedError(RuntimeError):
    """Raised when a round is requested but every client has been blacklisted."""
