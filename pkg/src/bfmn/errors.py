"""Exception hierarchy.

``DataError`` subclasses map to CLI exit code 2, ``EndpointError`` subclasses
to exit code 3.
"""


class BfmnError(Exception):
    pass


class DataError(BfmnError):
    pass


class MissingColumn(DataError):
    pass


class BadRating(DataError):
    pass


class DuplicateParticipantRow(DataError):
    pass


class BadScore(DataError):
    pass


class BadFlagRow(DataError):
    pass


class NodeNotFound(DataError, KeyError):
    pass


class EmptyGraph(DataError):
    pass


class EmptyFrame(DataError):
    pass


class EmptyAfterLookup(DataError):
    pass


class KTooLarge(DataError):
    pass


class SampleTooLarge(DataError):
    pass


class InsufficientTwins(DataError):
    pass


class UnknownGroup(DataError):
    pass


class MissingReport(DataError):
    pass


class EndpointError(BfmnError):
    pass


class AuthError(EndpointError):
    pass


class RateLimited(EndpointError):
    pass


class MalformedAfterRetries(EndpointError):
    pass
