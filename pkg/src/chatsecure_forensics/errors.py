"""Exception hierarchy. ``exit_code`` is the CLI status each error maps to."""


class ForensicsError(Exception):
    exit_code = 1


class InputError(ForensicsError):
    """Malformed or missing input."""


class CryptoError(ForensicsError):
    """A cryptographic check failed (wrong key or passphrase, or tampering)."""

    exit_code = 2


# secret_vault
class XmlMalformed(InputError):
    pass


class NoSecretEntry(InputError):
    pass


class BlobTooShort(InputError):
    pass


class SecretFormatError(InputError):
    pass


class AuthFailure(CryptoError):
    pass


# cipher_pages
class BadKeyLength(InputError):
    pass


class PageSizeMismatch(InputError):
    pass


class TruncatedFile(InputError):
    pass


class HmacMismatch(CryptoError):
    def __init__(self, page_no, message=None):
        self.page_no = page_no
        super().__init__(message or f"HMAC mismatch on page {page_no}")


# sqlite_reader
class BadMagic(InputError):
    pass


class UnsupportedFeature(InputError):
    pass


class NoSuchTable(InputError):
    pass


class CorruptCell(InputError):
    def __init__(self, page, cell, reason=""):
        self.page = page
        self.cell = cell
        msg = f"corrupt cell {cell} on page {page}"
        super().__init__(f"{msg}: {reason}" if reason else msg)


# artifact_model
class NoForensicTables(InputError):
    pass


# vfs_store
class VfsError(ForensicsError):
    exit_code = 3


class NoSuchFile(VfsError):
    pass


class MissingBlock(VfsError):
    def __init__(self, block_no, path=None):
        self.block_no = block_no
        self.path = path
        where = f" of {path}" if path else ""
        super().__init__(f"MissingBlock({block_no}){where}")


class SizeOverflow(VfsError):
    pass


class DuplicateBlock(VfsError):
    pass
