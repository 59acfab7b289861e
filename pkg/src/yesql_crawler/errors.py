"""Exception hierarchy shared across the crawler."""


class CrawlerError(Exception):
    pass


class MalformedUrl(CrawlerError, ValueError):
    pass


class UnsupportedScheme(MalformedUrl):
    pass


class StoreError(CrawlerError):
    pass


class StoreUnavailable(StoreError):
    pass


class InsufficientPrivilege(StoreError):
    pass


class SchemaTooNew(StoreError):
    pass


class ClaimError(StoreError):
    pass


class UnknownToken(ClaimError):
    pass


class ExpiredClaim(ClaimError):
    pass


class InvalidSpec(CrawlerError, ValueError):
    pass


class EmptyTargets(CrawlerError, ValueError):
    pass


class AddressInUse(CrawlerError, OSError):
    pass
