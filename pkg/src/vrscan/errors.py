"""Exception hierarchy shared by every analysis stage."""


class VrScanError(Exception):
    """Base class for all scanner errors."""


# apk container
class ApkError(VrScanError):
    pass


class NotZip(ApkError):
    pass


class MissingManifest(ApkError):
    pass


class TruncatedArchive(ApkError):
    pass


class EncryptedEntry(TruncatedArchive):
    pass


class NoSuchMember(ApkError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class CorruptEntry(ApkError):
    pass


# binary xml / manifest
class AxmlError(VrScanError):
    pass


class NotAxml(AxmlError):
    pass


class MalformedChunk(AxmlError):
    pass


class StringPoolOverflow(AxmlError):
    pass


class MissingPackageName(VrScanError):
    pass


# dex
class DexError(VrScanError):
    pass


class BadMagic(DexError):
    pass


class UnsupportedVersion(DexError):
    pass


class OffsetOutOfBounds(DexError):
    pass


# rules
class RuleError(VrScanError):
    pass


class DuplicateRuleId(RuleError):
    pass


class BadPattern(RuleError, ValueError):
    pass


class UnknownCategory(RuleError):
    pass


class ConfigError(VrScanError):
    pass


# unity / CIL
class CilError(VrScanError):
    pass


class NotPe(CilError):
    pass


class NoCliHeader(CilError):
    pass


class MalformedMetadata(CilError):
    pass


class EmptyCorpus(VrScanError):
    pass
