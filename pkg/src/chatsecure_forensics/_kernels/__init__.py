"""Hot inner loops: signature search, UTF-16 terminator scan, SQLite record decoding.

The compiled extension is used when it was built and importable; otherwise the
pure-Python implementation in ``_fallback`` is used. Set
``CHATSECURE_FORENSICS_PURE=1`` to force the fallback.
"""

import os

from . import _fallback

try:
    if os.environ.get("CHATSECURE_FORENSICS_PURE"):
        raise ImportError("pure-Python kernels forced by environment")
    from . import _speedups as _impl
    BACKEND = "cython"
except ImportError:
    _impl = _fallback
    BACKEND = "python"

find_signature = _impl.find_signature
utf16z_length = _impl.utf16z_length
read_varint = _impl.read_varint
decode_record = _impl.decode_record


def backends():
    """All importable kernel implementations, keyed by name."""
    found = {"python": _fallback}
    try:
        from . import _speedups
    except ImportError:
        pass
    else:
        found["cython"] = _speedups
    return found
