"""CacheWord serialized secret: parsing, wrapping and unwrapping the database key.

The stored value is Base64 of ``IC || salt || IV || AES-GCM(key)`` where IC is
a 32-bit iteration count, salt is 16 bytes, IV is 12 bytes and the wrapped key
is the 32-byte database key followed by the 16-byte GCM tag. The
passphrase-derived wrapping key is PBKDF2 over the UTF-8 passphrase.
"""

import base64
import binascii
import hashlib
import random
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from xml.sax.saxutils import escape, quoteattr

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .errors import AuthFailure, BlobTooShort, NoSecretEntry, SecretFormatError, XmlMalformed

PREFS_FILENAME = "info.guardianproject.cacheword.prefs.xml"
DEFAULT_ENTRY_NAME = "encrypted_secret"

IC_SIZE = 4
SALT_SIZE = 16
IV_SIZE = 12
KEY_SIZE = 32
TAG_SIZE = 16
WRAPPED_SIZE = KEY_SIZE + TAG_SIZE
BLOB_SIZE = IC_SIZE + SALT_SIZE + IV_SIZE + WRAPPED_SIZE

DEFAULT_IC = 100
DEFAULT_KDF_HASH = "sha1"
DEFAULT_IC_BYTEORDER = "big"


@dataclass(frozen=True)
class SerializedSecret:
    ic: int
    salt: bytes
    iv: bytes
    wrapped_key: bytes

    def __post_init__(self):
        if not 1 <= self.ic <= 0xFFFFFFFF:
            raise SecretFormatError(f"iteration count out of range: {self.ic}")
        if len(self.salt) != SALT_SIZE:
            raise SecretFormatError(f"salt must be {SALT_SIZE} bytes, got {len(self.salt)}")
        if len(self.iv) != IV_SIZE:
            raise SecretFormatError(f"IV must be {IV_SIZE} bytes, got {len(self.iv)}")
        if len(self.wrapped_key) != WRAPPED_SIZE:
            raise SecretFormatError(
                f"wrapped key must be {WRAPPED_SIZE} bytes, got {len(self.wrapped_key)}"
            )

    def encode(self, byteorder=DEFAULT_IC_BYTEORDER):
        return self.ic.to_bytes(IC_SIZE, byteorder) + self.salt + self.iv + self.wrapped_key

    def to_base64(self, byteorder=DEFAULT_IC_BYTEORDER):
        return base64.b64encode(self.encode(byteorder)).decode("ascii")

    @classmethod
    def decode(cls, blob, byteorder=DEFAULT_IC_BYTEORDER):
        """Slice a raw blob at byte offsets 0, 4, 20 and 32."""
        if len(blob) < BLOB_SIZE:
            raise BlobTooShort(f"serialized secret is {len(blob)} bytes, need {BLOB_SIZE}")
        return cls(
            ic=int.from_bytes(blob[0:4], byteorder),
            salt=bytes(blob[4:20]),
            iv=bytes(blob[20:32]),
            wrapped_key=bytes(blob[32:]),
        )


def _check_key(key):
    if len(key) != KEY_SIZE:
        raise ValueError(f"database key must be {KEY_SIZE} bytes, got {len(key)}")


def _check_passphrase(passphrase):
    if not passphrase:
        raise ValueError("passphrase must be non-empty")


def _b64decode(text):
    try:
        return base64.b64decode("".join(text.split()), validate=True)
    except (binascii.Error, ValueError):
        return None


def _string_entries(prefs_xml):
    if hasattr(prefs_xml, "read"):
        prefs_xml = prefs_xml.read()
    if isinstance(prefs_xml, str):
        prefs_xml = prefs_xml.encode("utf-8")
    try:
        root = ET.fromstring(prefs_xml)
    except ET.ParseError as exc:
        raise XmlMalformed(f"shared-preferences XML does not parse: {exc}") from exc
    if root.tag != "map":
        raise XmlMalformed(f"expected <map> root element, found <{root.tag}>")
    return [(el.get("name"), el.text or "") for el in root.iter("string")]


def parse_serialized_secret(prefs_xml, entry_name=None, byteorder=DEFAULT_IC_BYTEORDER):
    """Extract the serialized secret from an Android shared-preferences document.

    Args:
        prefs_xml: XML as bytes, str, or a binary file object.
        entry_name: name of the ``<string>`` entry holding the secret. When
            omitted every string entry is tried and the first one that decodes
            to a well-formed secret wins.
        byteorder: byte order of the iteration count.

    Raises:
        XmlMalformed, NoSecretEntry, BlobTooShort, SecretFormatError
    """
    entries = _string_entries(prefs_xml)
    if entry_name is not None:
        for name, text in entries:
            if name == entry_name:
                blob = _b64decode(text)
                if blob is None:
                    raise SecretFormatError(f"entry {entry_name!r} is not valid Base64")
                return SerializedSecret.decode(blob, byteorder)
        raise NoSecretEntry(f"no <string name={entry_name!r}> entry")

    longest_short = 0
    for name, text in entries:
        blob = _b64decode(text)
        if blob is None:
            continue
        if len(blob) < BLOB_SIZE:
            longest_short = max(longest_short, len(blob))
            continue
        try:
            return SerializedSecret.decode(blob, byteorder)
        except SecretFormatError:
            continue
    if longest_short >= IC_SIZE + SALT_SIZE + IV_SIZE:
        raise BlobTooShort(
            f"closest candidate decodes to {longest_short} bytes, need {BLOB_SIZE}"
        )
    raise NoSecretEntry("no string entry decodes to a serialized secret")


def write_serialized_secret(secret, entry_name=DEFAULT_ENTRY_NAME, byteorder=DEFAULT_IC_BYTEORDER):
    """Render ``secret`` as an Android shared-preferences XML document (bytes)."""
    lines = [
        "<?xml version='1.0' encoding='utf-8' standalone='yes' ?>",
        "<map>",
        f"    <string name={quoteattr(entry_name)}>{escape(secret.to_base64(byteorder))}</string>",
        "</map>",
        "",
    ]
    return "\n".join(lines).encode("utf-8")


def derive_passphrase_key(passphrase, salt, ic, hash_name=DEFAULT_KDF_HASH):
    """PBKDF2 over the UTF-8 passphrase; 32-byte output."""
    _check_passphrase(passphrase)
    if ic < 1:
        raise ValueError("iteration count must be >= 1")
    return hashlib.pbkdf2_hmac(hash_name, passphrase.encode("utf-8"), bytes(salt), ic, KEY_SIZE)


def unwrap_database_key(secret, passphrase, hash_name=DEFAULT_KDF_HASH):
    """Recover the 32-byte database key; raises AuthFailure on a wrong passphrase."""
    pk = derive_passphrase_key(passphrase, secret.salt, secret.ic, hash_name)
    try:
        key = AESGCM(pk).decrypt(secret.iv, secret.wrapped_key, None)
    except InvalidTag:
        raise AuthFailure("GCM tag check failed: wrong passphrase or corrupted secret") from None
    if len(key) != KEY_SIZE:
        raise AuthFailure(f"unwrapped key has {len(key)} bytes")
    return key


def wrap_database_key(key, passphrase, ic=DEFAULT_IC, rng=None, hash_name=DEFAULT_KDF_HASH):
    """Inverse of :func:`unwrap_database_key`; salt and IV come from ``rng``."""
    _check_key(key)
    rng = rng or random.SystemRandom()
    salt = rng.randbytes(SALT_SIZE)
    iv = rng.randbytes(IV_SIZE)
    pk = derive_passphrase_key(passphrase, salt, ic, hash_name)
    wrapped = AESGCM(pk).encrypt(iv, bytes(key), None)
    return SerializedSecret(ic=ic, salt=salt, iv=iv, wrapped_key=wrapped)


def textual_media_key(key):
    """Lower-case hex of the key cut to 32 characters (the media.db passphrase)."""
    return bytes(key).hex()[:32]
