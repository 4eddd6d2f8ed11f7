"""INI configuration for cipher, secret and carving defaults.

Example::

    [secret]
    kdf_hash = sha1
    ic_byteorder = big
    entry_name = encrypted_secret

    [impsenc]
    page_size = 1024
    kdf_iterations = 64000
    hmac = yes
    reserve_size = 48

    [media]
    page_size = 8192

    [memscan]
    signature = 5099abb2000000001a00000000000000
    mask = strict            ; strict | loose | 32 hex digits
    max_len = 256
    min_occurrences = 2

Every key is optional. Unknown sections and keys raise ``ValueError`` so that
typos do not silently fall back to defaults.
"""

import configparser
from dataclasses import dataclass, field

from .cipher_pages import CipherProfile, IMPSENC_PAGE_SIZE, MEDIA_PAGE_SIZE
from .memscan import DEFAULT_MAX_LEN, DEFAULT_SIGNATURE, SignaturePattern
from .secret_vault import DEFAULT_IC_BYTEORDER, DEFAULT_KDF_HASH

_PROFILE_KEYS = {"page_size", "kdf_iterations", "hmac", "reserve_size", "kdf_algorithm", "hmac_algorithm"}
_KNOWN = {
    "secret": {"kdf_hash", "ic_byteorder", "entry_name"},
    "impsenc": _PROFILE_KEYS,
    "media": _PROFILE_KEYS,
    "memscan": {"signature", "mask", "max_len", "min_occurrences"},
}


def _profile_kwargs(sec, default_page_size):
    kw = {"page_size": sec.getint("page_size", default_page_size)}
    if "kdf_iterations" in sec:
        kw["kdf_iterations"] = sec.getint("kdf_iterations")
    if "hmac" in sec:
        kw["hmac_enabled"] = sec.getboolean("hmac")
    if "reserve_size" in sec:
        kw["reserve_size"] = sec.getint("reserve_size")
    for k in ("kdf_algorithm", "hmac_algorithm"):
        if k in sec:
            kw[k] = sec[k].strip().lower()
    CipherProfile(**kw)  # validate early
    return kw


def _mask(text):
    t = text.strip().lower()
    if t == "strict":
        return (True,) * 16
    if t == "loose":
        return SignaturePattern.loose().mask
    raw = bytes.fromhex(t)
    if len(raw) != 16:
        raise ValueError("memscan mask must be 16 bytes of hex, 'strict' or 'loose'")
    return tuple(b != 0 for b in raw)


@dataclass
class Settings:
    kdf_hash: str = DEFAULT_KDF_HASH
    ic_byteorder: str = DEFAULT_IC_BYTEORDER
    entry_name: str = None
    impsenc: dict = field(default_factory=lambda: {"page_size": IMPSENC_PAGE_SIZE})
    media: dict = field(default_factory=lambda: {"page_size": MEDIA_PAGE_SIZE})
    signature: SignaturePattern = field(default_factory=SignaturePattern)
    max_len: int = DEFAULT_MAX_LEN
    min_occurrences: int = 2

    def impsenc_profile(self, key_bytes, **overrides):
        return CipherProfile.impsenc(key_bytes, **{**self.impsenc, **overrides})

    def media_profile(self, key_bytes=None, text=None, **overrides):
        return CipherProfile.media(key_bytes, text, **{**self.media, **overrides})


def parse_settings(text):
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.read_string(text)
    for name in cp.sections():
        if name not in _KNOWN:
            raise ValueError(f"unknown config section [{name}]")
        extra = set(cp[name]) - _KNOWN[name]
        if extra:
            raise ValueError(f"unknown key(s) in [{name}]: {', '.join(sorted(extra))}")
    s = Settings()
    if cp.has_section("secret"):
        sec = cp["secret"]
        s.kdf_hash = sec.get("kdf_hash", s.kdf_hash).strip().lower()
        s.ic_byteorder = sec.get("ic_byteorder", s.ic_byteorder).strip().lower()
        if s.ic_byteorder not in ("big", "little"):
            raise ValueError("ic_byteorder must be 'big' or 'little'")
        s.entry_name = sec.get("entry_name", "").strip() or None
    if cp.has_section("impsenc"):
        s.impsenc = _profile_kwargs(cp["impsenc"], IMPSENC_PAGE_SIZE)
    if cp.has_section("media"):
        s.media = _profile_kwargs(cp["media"], MEDIA_PAGE_SIZE)
    if cp.has_section("memscan"):
        sec = cp["memscan"]
        pattern = bytes.fromhex(sec.get("signature", DEFAULT_SIGNATURE.hex()))
        s.signature = SignaturePattern(pattern, _mask(sec.get("mask", "strict")))
        s.max_len = sec.getint("max_len", s.max_len)
        s.min_occurrences = sec.getint("min_occurrences", s.min_occurrences)
    return s


def load_settings(path=None):
    if path is None:
        return Settings()
    with open(path, encoding="utf-8") as fh:
        return parse_settings(fh.read())
