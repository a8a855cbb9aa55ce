"""Exception types shared across the package."""


class UplatError(Exception):
    """Base class for all errors raised by this package."""


class MalformedLineError(UplatError):
    """A trace line is not parseable as a record."""


class MissingKeyError(UplatError):
    """A record lacks a key that its event kind requires."""


class DomainError(UplatError):
    """A field value is outside its legal domain."""


class ConfigError(UplatError):
    """An experiment configuration violates an invariant."""


class UnknownGrantError(UplatError):
    """No TBS table entry for the requested (PRBs, MCS) pair."""


class UnsortableStreamError(UplatError):
    """Event stream is out of order beyond the re-sort window."""


class NoMatchError(UplatError):
    """No decode event matches a transmission attempt."""


class AmbiguousMatchError(UplatError):
    """More than one decode event matches a transmission attempt."""


class InvalidJourneyError(UplatError):
    """A packet journey violates its ordering or consistency invariants."""


class EmptyInputError(UplatError):
    """An analytics operation received an empty sample set."""


class NoViolationsError(UplatError):
    """No sample exceeds the requested delay target."""
