"""Error types shared across the domain, ingestion, search and API layers.

Each error carries a stable machine code (the class name) so the HTTP layer
can map it to a (status, code) pair without string matching on messages.
"""

from __future__ import annotations


class WebarcError(Exception):
    """Base class; ``code`` is the stable machine-readable name."""

    @property
    def code(self) -> str:
        return type(self).__name__


# -- validation (422) ---------------------------------------------------------

class EmptyTitle(WebarcError):
    pass


class EmptyValue(WebarcError):
    pass


class InvalidUrl(WebarcError):
    pass


class FieldNotEditable(WebarcError):
    pass


class FewerThanTwoSources(WebarcError):
    pass


class NestingTooDeep(WebarcError):
    pass


class InvalidFacetField(WebarcError):
    pass


# -- authorization (401/403) --------------------------------------------------

class InvalidCredentials(WebarcError):
    pass


class SessionExpired(WebarcError):
    pass


class ReadOnlyGroup(WebarcError):
    pass


class NotAMember(WebarcError):
    pass


# -- not found (404) ----------------------------------------------------------

class UnknownUser(WebarcError):
    pass


class UnknownGroup(WebarcError):
    pass


class UnknownResource(WebarcError):
    pass


class UnknownCollection(WebarcError):
    pass


# -- conflicts (409) ----------------------------------------------------------

class DuplicateUrlInGroup(WebarcError):
    pass


class DuplicateTag(WebarcError):
    pass


class AlreadyMember(WebarcError):
    pass


class SoleOwnerCannotLeave(WebarcError):
    pass


# -- wire-protocol parsing ----------------------------------------------------

class ParseError(WebarcError):
    pass


class UnsupportedMediaType(ParseError):
    pass


class MalformedLinkFormat(ParseError):
    pass


class MissingOriginalRelation(ParseError):
    pass


class MalformedResponse(ParseError):
    pass


class TransportError(WebarcError):
    pass


class ProviderUnavailable(WebarcError):
    pass
