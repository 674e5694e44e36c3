"""Exception hierarchy shared by all firmscan stages."""


class FirmscanError(Exception):
    """Base class for every error raised by firmscan."""


class ManifestFormatError(FirmscanError, ValueError):
    pass


class FetchError(FirmscanError):
    pass


class UnsupportedSchemeError(FetchError):
    pass


class IntegrityError(FetchError):
    """Fetched bytes do not hash to the checksum recorded in the manifest."""


class DictionaryFormatError(FirmscanError, ValueError):
    pass


class FeedFormatError(FirmscanError, ValueError):
    pass


class CpeFormatError(FirmscanError, ValueError):
    pass


class NotIndexedError(FirmscanError, KeyError):
    pass


class IncompleteRecordError(FirmscanError, ValueError):
    pass


class ConfigError(FirmscanError, ValueError):
    pass
