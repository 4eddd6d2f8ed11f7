"""SQLCipher page layer: key derivation, per-page AES-CBC + HMAC, whole-file transforms.

Defaults follow the SQLCipher 3.x generation: PBKDF2-HMAC-SHA1 with 64000
iterations for textual keys, HMAC-SHA1 page MACs, 48 reserved bytes per page
(16-byte IV, 20-byte MAC, padding to the AES block size). A raw 32-byte key
(the ``x'...'`` PRAGMA form) bypasses the passphrase KDF.

Page layout::

    page 1:  salt(16) | ciphertext | IV(16) | HMAC(20) | pad
    page n:  ciphertext | IV(16) | HMAC(20) | pad

The MAC covers ``ciphertext || IV || page_no`` (page number little-endian).
"""

import hashlib
import hmac
import random
from dataclasses import dataclass, replace

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .errors import BadKeyLength, HmacMismatch, PageSizeMismatch, TruncatedFile

SQLITE_MAGIC = b"SQLite format 3\x00"
SALT_SIZE = 16
IV_SIZE = 16
BLOCK_SIZE = 16
KEY_SIZE = 32
HMAC_SALT_MASK = 0x3A
HMAC_KDF_ITERATIONS = 2

_DIGEST_SIZES = {"sha1": 20, "sha256": 32, "sha512": 64}

IMPSENC_PAGE_SIZE = 1024
MEDIA_PAGE_SIZE = 8192
DEFAULT_KDF_ITERATIONS = 64000


@dataclass(frozen=True)
class RawKey:
    """32 key bytes used directly as the AES key."""

    key: bytes

    def __post_init__(self):
        if len(self.key) != KEY_SIZE:
            raise BadKeyLength(f"raw key must be {KEY_SIZE} bytes, got {len(self.key)}")

    @classmethod
    def from_hex(cls, text):
        text = text.strip()
        if text[:2].lower() == "x'" and text.endswith("'"):
            text = text[2:-1]
        try:
            key = bytes.fromhex(text)
        except ValueError:
            raise BadKeyLength(f"raw key is not hexadecimal: {text!r}") from None
        return cls(key)


@dataclass(frozen=True)
class TextKey:
    """Passphrase run through PBKDF2 with the file salt."""

    text: str


@dataclass(frozen=True)
class CipherProfile:
    page_size: int = IMPSENC_PAGE_SIZE
    kdf_iterations: int = DEFAULT_KDF_ITERATIONS
    hmac_enabled: bool = True
    reserve_size: int = 48
    key: object = None
    kdf_algorithm: str = "sha1"
    hmac_algorithm: str = "sha1"

    def __post_init__(self):
        ps = self.page_size
        if not (512 <= ps <= 65536 and ps & (ps - 1) == 0):
            raise ValueError(f"page size must be a power of two in [512, 65536], got {ps}")
        if self.reserve_size % BLOCK_SIZE:
            raise ValueError(f"reserve size must be a multiple of {BLOCK_SIZE}")
        if self.reserve_size < self.min_reserve:
            raise ValueError(f"reserve size must be >= {self.min_reserve}")
        if self.hmac_algorithm not in _DIGEST_SIZES:
            raise ValueError(f"unsupported HMAC algorithm {self.hmac_algorithm!r}")
        if isinstance(self.key, TextKey) and self.kdf_iterations < 1:
            raise ValueError("textual keys need kdf_iterations >= 1")

    @property
    def hmac_size(self):
        return _DIGEST_SIZES[self.hmac_algorithm] if self.hmac_enabled else 0

    @property
    def min_reserve(self):
        need = IV_SIZE + self.hmac_size
        return -(-need // BLOCK_SIZE) * BLOCK_SIZE

    @classmethod
    def impsenc(cls, key_bytes, **overrides):
        """Main database recipe: raw 32-byte key, default page size."""
        return cls(key=RawKey(bytes(key_bytes)), **overrides)

    @classmethod
    def media(cls, key_bytes=None, text=None, **overrides):
        """Virtual-disk recipe: textual key (hex cut to 32 chars), 8192-byte pages."""
        if text is None:
            text = bytes(key_bytes).hex()[:32]
        overrides.setdefault("page_size", MEDIA_PAGE_SIZE)
        return cls(key=TextKey(text), **overrides)

    def with_key(self, key):
        return replace(self, key=key)


@dataclass(frozen=True)
class PageKeys:
    enc_key: bytes
    hmac_key: bytes


@dataclass(frozen=True)
class EncryptedDbFile:
    raw: bytes
    page_size: int

    def __post_init__(self):
        if not self.raw:
            raise TruncatedFile("encrypted database is empty")
        if len(self.raw) % self.page_size:
            raise TruncatedFile(
                f"file length {len(self.raw)} is not a multiple of page size {self.page_size}"
            )

    @property
    def file_salt(self):
        return self.raw[:SALT_SIZE]

    @property
    def page_count(self):
        return len(self.raw) // self.page_size

    def page(self, page_no):
        start = (page_no - 1) * self.page_size
        return self.raw[start:start + self.page_size]


def derive_page_keys(profile, file_salt):
    """Encryption and MAC keys for one database file."""
    key = profile.key
    if key is None:
        raise BadKeyLength("cipher profile carries no key")
    if isinstance(key, RawKey):
        enc_key = key.key
    elif isinstance(key, TextKey):
        enc_key = hashlib.pbkdf2_hmac(
            profile.kdf_algorithm, key.text.encode("utf-8"), bytes(file_salt),
            profile.kdf_iterations, KEY_SIZE,
        )
    else:
        raise TypeError(f"unknown key mode {type(key).__name__}")
    if len(enc_key) != KEY_SIZE:
        raise BadKeyLength(f"encryption key must be {KEY_SIZE} bytes")
    hmac_salt = bytes(b ^ HMAC_SALT_MASK for b in file_salt)
    hmac_key = hashlib.pbkdf2_hmac(
        profile.kdf_algorithm, enc_key, hmac_salt, HMAC_KDF_ITERATIONS, KEY_SIZE
    )
    return PageKeys(enc_key, hmac_key)


def _content_start(page_no):
    return SALT_SIZE if page_no == 1 else 0


def _page_mac(profile, keys, page_no, data):
    mac = hmac.new(keys.hmac_key, data, profile.hmac_algorithm)
    mac.update(page_no.to_bytes(4, "little"))
    return mac.digest()


def decrypt_page(profile, keys, page_no, page_bytes, verify=True):
    """Decrypt one page. Page 1 comes back prefixed with the SQLite magic.

    The returned page has the same length as the input; the reserved tail is
    zero-filled.
    """
    ps = profile.page_size
    if len(page_bytes) != ps:
        raise TruncatedFile(f"page {page_no} has {len(page_bytes)} bytes, expected {ps}")
    start = _content_start(page_no)
    end = ps - profile.reserve_size
    iv = page_bytes[end:end + IV_SIZE]
    if profile.hmac_enabled and verify:
        stored = page_bytes[end + IV_SIZE:end + IV_SIZE + profile.hmac_size]
        computed = _page_mac(profile, keys, page_no, page_bytes[start:end + IV_SIZE])
        if not hmac.compare_digest(stored, computed):
            raise HmacMismatch(page_no)
    dec = Cipher(algorithms.AES(keys.enc_key), modes.CBC(iv)).decryptor()
    plain = dec.update(bytes(page_bytes[start:end])) + dec.finalize()
    head = SQLITE_MAGIC if page_no == 1 else b""
    return head + plain + bytes(profile.reserve_size)


def encrypt_page(profile, keys, page_no, plain_page, iv, file_salt=None):
    """Inverse of :func:`decrypt_page`. Page 1 needs ``file_salt``."""
    ps = profile.page_size
    if len(plain_page) != ps:
        raise PageSizeMismatch(f"page {page_no} has {len(plain_page)} bytes, expected {ps}")
    start = _content_start(page_no)
    end = ps - profile.reserve_size
    enc = Cipher(algorithms.AES(keys.enc_key), modes.CBC(bytes(iv))).encryptor()
    ct = enc.update(bytes(plain_page[start:end])) + enc.finalize()
    body = ct + bytes(iv)
    mac = _page_mac(profile, keys, page_no, body) if profile.hmac_enabled else b""
    pad = bytes(profile.reserve_size - IV_SIZE - len(mac))
    head = bytes(file_salt) if page_no == 1 else b""
    return head + body + mac + pad


def _header_geometry(image):
    if image[:16] != SQLITE_MAGIC:
        raise PageSizeMismatch("input is not a plaintext SQLite image")
    ps = int.from_bytes(image[16:18], "big")
    return (65536 if ps == 1 else ps), image[20]


def encrypt_database(plain, profile, rng=None):
    """Encrypt a plaintext SQLite image; re-pages it first if its geometry differs."""
    plain = bytes(plain)
    ps, reserve = _header_geometry(plain)
    if ps != profile.page_size or reserve != profile.reserve_size:
        from . import _native_sqlite
        try:
            plain = _native_sqlite.repage(plain, profile.page_size, profile.reserve_size)
        except OSError as exc:
            raise PageSizeMismatch(
                f"input has page size {ps}/reserve {reserve}, profile wants "
                f"{profile.page_size}/{profile.reserve_size}, and re-paging failed: {exc}"
            ) from exc
        ps, reserve = _header_geometry(plain)
        if ps != profile.page_size or reserve != profile.reserve_size:
            raise PageSizeMismatch(f"re-paging produced page size {ps}/reserve {reserve}")
    if len(plain) % ps:
        raise PageSizeMismatch("plaintext length is not a multiple of its page size")
    rng = rng or random.SystemRandom()
    salt = rng.randbytes(SALT_SIZE)
    if salt == SQLITE_MAGIC:
        salt = rng.randbytes(SALT_SIZE)
    keys = derive_page_keys(profile, salt)
    out = bytearray()
    for i in range(len(plain) // ps):
        page = plain[i * ps:(i + 1) * ps]
        out += encrypt_page(profile, keys, i + 1, page, rng.randbytes(IV_SIZE), salt)
    return EncryptedDbFile(bytes(out), ps)


def _as_file(file, profile):
    if isinstance(file, EncryptedDbFile):
        return file
    return EncryptedDbFile(bytes(file), profile.page_size)


def decrypt_database(file, profile):
    """Decrypt every page and return a plaintext SQLite image any reader accepts."""
    f = _as_file(file, profile)
    keys = derive_page_keys(profile, f.file_salt)
    out = bytearray()
    for n in range(1, f.page_count + 1):
        out += decrypt_page(profile, keys, n, f.page(n))
    # the decrypted header is kept as is: engines may reserve more bytes per
    # page in the b-tree layer than the codec uses, and the header records that
    return bytes(out)


def verify_first_page(file, profile):
    """True when page 1 authenticates under ``profile``'s key (no full decryption)."""
    try:
        f = _as_file(file, profile)
        keys = derive_page_keys(profile, f.file_salt)
        page = decrypt_page(profile, keys, 1, f.page(1))
    except (HmacMismatch, TruncatedFile):
        return False
    # payload fractions are fixed at 64/32/32; catches wrong keys when MACs are off
    return page[21:24] == b"\x40\x20\x20"
