"""Exception types raised by decaykit."""


class DecayKitError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(DecayKitError, ValueError):
    """Malformed input file; message carries the file and line number."""


class ValidationError(DecayKitError, ValueError):
    """Input violates a data-model invariant or parameter range."""


class InsufficientDataError(DecayKitError, ValueError):
    """Too little usable data for an estimate to be defined."""
