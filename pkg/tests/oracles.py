"""Independent reference implementations used only by the tests.

None of this imports the package under test. PBKDF2 is written out from its
definition on top of ``hmac``; SQLCipher behaviour comes from the external
``sqlcipher3`` binding; SQLite rows come from the stdlib engine.
"""

import hmac
import sqlite3
import struct


def pbkdf2_reference(password, salt, iterations, dklen, digest="sha1"):
    """PBKDF2 built block by block from HMAC (no hashlib.pbkdf2_hmac)."""
    hlen = hmac.new(b"", b"", digest).digest_size
    blocks = -(-dklen // hlen)
    out = b""
    for i in range(1, blocks + 1):
        u = hmac.new(password, salt + struct.pack(">I", i), digest).digest()
        t = bytearray(u)
        for _ in range(iterations - 1):
            u = hmac.new(password, u, digest).digest()
            for j, b in enumerate(u):
                t[j] ^= b
        out += bytes(t)
    return out[:dklen]


def sqlite_rows(path_or_bytes, table):
    """Rows of ``table`` as (rowid, tuple) read by the stdlib SQLite engine."""
    import os
    import tempfile
    tmp = None
    path = path_or_bytes
    if isinstance(path_or_bytes, (bytes, bytearray)):
        fd, tmp = tempfile.mkstemp(suffix=".db")
        with os.fdopen(fd, "wb") as fh:
            fh.write(path_or_bytes)
        path = tmp
    try:
        con = sqlite3.connect(f"file:{path}?mode=ro", uri=True)
        try:
            cols = [r[1] for r in con.execute(f'PRAGMA table_info("{table}")')]
            without_rowid = "without rowid" in (con.execute(
                "SELECT sql FROM sqlite_master WHERE name = ?", (table,)).fetchone()[0] or "").lower()
            if without_rowid:
                q = f'SELECT NULL, {", ".join(chr(34) + c + chr(34) for c in cols)} FROM "{table}"'
            else:
                q = f'SELECT rowid, {", ".join(chr(34) + c + chr(34) for c in cols)} FROM "{table}"'
            return [(r[0], tuple(r[1:])) for r in con.execute(q)]
        finally:
            con.close()
    finally:
        if tmp:
            os.unlink(tmp)


def sqlcipher_connect(path, key_hex=None, key_text=None, page_size=None, compat_first=False):
    """Open ``path`` in the reference SQLCipher engine with v3 defaults.

    ``compat_first`` issues the compatibility pragma before the key; the
    engine then also lays out new files with the v3 reserve in the b-tree.
    """
    import sqlcipher3
    con = sqlcipher3.connect(str(path))
    if compat_first:
        con.execute("PRAGMA cipher_compatibility = 3")
    if key_hex is not None:
        con.execute(f"PRAGMA key = \"x'{key_hex}'\"")
    else:
        con.execute("PRAGMA key = '%s'" % key_text.replace("'", "''"))
    con.execute("PRAGMA cipher_compatibility = 3")
    if page_size:
        con.execute(f"PRAGMA cipher_page_size = {int(page_size)}")
    return con
