"""Carve candidate passphrases from a raw memory dump and test them against the secret.

The passphrase lives in memory as a NUL-terminated UTF-16LE string preceded by
a fixed 16-byte signature, and the pair shows up twice in the process image.
Scanning is single-pass over fixed-size chunks with an overlap window, so
memory use depends on the window, not on the dump size.
"""

import enum
import io
import unicodedata
from dataclasses import dataclass, replace

from . import _kernels
from .cipher_pages import CipherProfile, RawKey, TextKey, verify_first_page
from .errors import AuthFailure
from .secret_vault import textual_media_key, unwrap_database_key, wrap_database_key

DEFAULT_SIGNATURE = bytes.fromhex("5099abb2000000001a00000000000000")
DEFAULT_MAX_LEN = 256
DEFAULT_CHUNK_SIZE = 16 << 20

LIME_MAGIC = 0x4C694D45
LIME_HEADER_SIZE = 32


class Validation(enum.IntEnum):
    UNTESTED = 0
    REJECTED = 1
    KEY_RECOVERED = 2
    DB_CONFIRMED = 3


@dataclass(frozen=True)
class SignaturePattern:
    bytes: bytes = DEFAULT_SIGNATURE
    mask: tuple = (True,) * 16

    def __post_init__(self):
        if len(self.bytes) != 16 or len(self.mask) != 16:
            raise ValueError("signature and mask must be 16 entries long")

    @classmethod
    def loose(cls, pattern=DEFAULT_SIGNATURE):
        """Wildcard bytes 8-15, which may depend on string length or allocator state."""
        return cls(pattern, (True,) * 8 + (False,) * 8)

    @property
    def mask_bytes(self):
        return bytes(1 if m else 0 for m in self.mask)


@dataclass(frozen=True)
class PassphraseCandidate:
    text: str
    offsets: tuple
    validation: Validation = Validation.UNTESTED
    key: bytes = None

    @property
    def occurrence_count(self):
        return len(self.offsets)

    def to_dict(self):
        return {
            "text": self.text,
            "offsets": list(self.offsets),
            "occurrence_count": self.occurrence_count,
            "validation": self.validation.name.lower(),
        }


def is_printable(text):
    """Letters, numbers, punctuation, symbols and plain spaces only."""
    for ch in text:
        cat = unicodedata.category(ch)
        if cat[0] not in "LNPS" and cat != "Zs":
            return False
    return True


def _decode_at(buf, pos, max_len):
    """Return the carved string at ``pos``, None if rejected, or ... if more data is needed."""
    n = _kernels.utf16z_length(buf, pos, max_len)
    if n == -2:
        return ...
    if n <= 0:
        return None
    try:
        text = bytes(buf[pos:pos + 2 * n]).decode("utf-16-le")
    except UnicodeDecodeError:
        return None
    return text if is_printable(text) else None


def _lime_ranges(fh):
    """(file_offset, length) of each LiME data range, or None when not LiME framed."""
    start = fh.tell()
    head = fh.read(LIME_HEADER_SIZE)
    fh.seek(start)
    if len(head) < LIME_HEADER_SIZE or int.from_bytes(head[:4], "little") != LIME_MAGIC:
        return None
    ranges = []
    pos = start
    while True:
        fh.seek(pos)
        head = fh.read(LIME_HEADER_SIZE)
        if len(head) < LIME_HEADER_SIZE or int.from_bytes(head[:4], "little") != LIME_MAGIC:
            break
        s_addr = int.from_bytes(head[8:16], "little")
        e_addr = int.from_bytes(head[16:24], "little")
        length = e_addr - s_addr + 1
        ranges.append((pos + LIME_HEADER_SIZE, length))
        pos += LIME_HEADER_SIZE + length
    fh.seek(start)
    return ranges


def _scan_stream(fh, base, length, sig, max_len, chunk_size, found):
    """Scan ``length`` bytes (None = to EOF) starting at file offset ``base``."""
    pattern, mask = sig.bytes, sig.mask_bytes
    window = 16 + 2 * (max_len + 1)
    fh.seek(base)
    carry = b""
    carry_base = base
    remaining = length
    while True:
        want = chunk_size if remaining is None else min(chunk_size, remaining)
        chunk = fh.read(want) if want > 0 else b""
        if remaining is not None:
            remaining -= len(chunk)
        eof = not chunk or (remaining is not None and remaining <= 0)
        buf = carry + chunk
        # matches starting in [0, limit) are handled now; later ones wait for more data
        limit = len(buf) if eof else max(0, len(buf) - window + 1)
        for off in _kernels.find_signature(buf, pattern, mask, 0, limit):
            text = _decode_at(buf, off + 16, max_len)
            if text is None or text is ...:
                continue
            found.setdefault(text, []).append(carry_base + off)
        if eof:
            return
        carry = buf[limit:]
        carry_base += limit


def merge_candidates(*groups):
    """Order-independent union of candidate lists keyed by text."""
    merged = {}
    for group in groups:
        for c in group:
            merged.setdefault(c.text, set()).update(c.offsets)
    return [PassphraseCandidate(t, tuple(sorted(o))) for t, o in sorted(merged.items(), key=lambda kv: min(kv[1]))]


def scan_dump(dump, sig=SignaturePattern(), max_len=DEFAULT_MAX_LEN, chunk_size=DEFAULT_CHUNK_SIZE):
    """Carve signature-prefixed UTF-16LE strings from a dump (path, bytes or binary file).

    LiME-framed dumps are detected and only their data ranges are scanned;
    reported offsets are always file offsets.
    """
    if chunk_size < 1:
        raise ValueError("chunk_size must be positive")
    if isinstance(dump, (bytes, bytearray, memoryview)):
        fh, close = io.BytesIO(bytes(dump)), True
    elif hasattr(dump, "read"):
        fh, close = dump, False
    else:
        fh, close = open(dump, "rb"), True
    found = {}
    try:
        ranges = _lime_ranges(fh)
        if ranges is None:
            _scan_stream(fh, fh.tell(), None, sig, max_len, chunk_size, found)
        else:
            for start, length in ranges:
                _scan_stream(fh, start, length, sig, max_len, chunk_size, found)
    finally:
        if close:
            fh.close()
    return [
        PassphraseCandidate(text, tuple(sorted(offs)))
        for text, offs in sorted(found.items(), key=lambda kv: min(kv[1]))
    ]


def prune_candidates(cands, min_occurrences=2):
    return [c for c in cands if c.occurrence_count >= min_occurrences]


def _confirm(key, db, db_profile):
    if db_profile is None:
        db_profile = CipherProfile()
    if isinstance(db_profile.key, TextKey):
        profile = db_profile.with_key(TextKey(textual_media_key(key)))
    else:
        profile = db_profile.with_key(RawKey(key))
    return verify_first_page(db, profile)


def evaluate_candidates(cands, secret, db=None, db_profile=None):
    """Test each candidate; returns new candidates carrying status and recovered key.

    ``db_profile`` describes the encrypted database: a profile whose key is a
    :class:`TextKey` (any text) selects the media.db recipe, anything else the
    raw-key main database recipe.
    """
    out = []
    for c in cands:
        try:
            key = unwrap_database_key(secret, c.text)
        except AuthFailure:
            out.append(replace(c, validation=Validation.REJECTED, key=None))
            continue
        status = Validation.KEY_RECOVERED
        if db is not None and _confirm(key, db, db_profile):
            status = Validation.DB_CONFIRMED
        out.append(replace(c, validation=status, key=key))
    return out


def best_candidate(evaluated):
    """Highest status, then earliest offset, among already evaluated candidates."""
    ok = [c for c in evaluated if c.validation >= Validation.KEY_RECOVERED]
    if not ok:
        return None
    return min(ok, key=lambda c: (-c.validation, min(c.offsets) if c.offsets else 0))


def validate_candidates(cands, secret, db=None, db_profile=None):
    """Best validated candidate, or None."""
    return best_candidate(evaluate_candidates(cands, secret, db, db_profile))


def rewraps(candidate, secret):
    """Soundness check: the recovered key re-wraps into a blob that authenticates."""
    if candidate.key is None:
        return False
    blob = wrap_database_key(candidate.key, candidate.text, ic=secret.ic)
    return unwrap_database_key(blob, candidate.text) == candidate.key
