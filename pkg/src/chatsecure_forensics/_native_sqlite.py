"""Re-page a plaintext SQLite image through the system libsqlite3.

Only fixture generation needs this: SQLCipher pages carry a reserved tail
(IV + HMAC), so a plain database must be rewritten with that much reserve
before it can be encrypted page by page. The stdlib ``sqlite3`` module does
not expose the reserve-bytes file control, hence ctypes.
"""

import ctypes
import ctypes.util
import os
import tempfile

SQLITE_OPEN_READWRITE = 0x2
SQLITE_FCNTL_RESERVE_BYTES = 38

_lib = None


def _load():
    global _lib
    if _lib is None:
        name = ctypes.util.find_library("sqlite3")
        if not name:
            raise OSError("libsqlite3 not found")
        lib = ctypes.CDLL(name)
        lib.sqlite3_open_v2.argtypes = [
            ctypes.c_char_p, ctypes.POINTER(ctypes.c_void_p), ctypes.c_int, ctypes.c_char_p,
        ]
        lib.sqlite3_exec.argtypes = [
            ctypes.c_void_p, ctypes.c_char_p, ctypes.c_void_p, ctypes.c_void_p, ctypes.c_void_p,
        ]
        lib.sqlite3_file_control.argtypes = [
            ctypes.c_void_p, ctypes.c_char_p, ctypes.c_int, ctypes.c_void_p,
        ]
        lib.sqlite3_close.argtypes = [ctypes.c_void_p]
        lib.sqlite3_errmsg.argtypes = [ctypes.c_void_p]
        lib.sqlite3_errmsg.restype = ctypes.c_char_p
        _lib = lib
    return _lib


def repage(image, page_size, reserve):
    """Return ``image`` rebuilt with the given page size and reserved bytes per page."""
    lib = _load()
    fd, path = tempfile.mkstemp(suffix=".db")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(image)
        db = ctypes.c_void_p()
        if lib.sqlite3_open_v2(path.encode(), ctypes.byref(db), SQLITE_OPEN_READWRITE, None):
            raise OSError("sqlite3_open_v2 failed")
        try:
            def run(sql):
                if lib.sqlite3_exec(db, sql, None, None, None):
                    raise OSError(f"{sql.decode()}: {lib.sqlite3_errmsg(db).decode()}")

            run(b"PRAGMA journal_mode=DELETE")
            run(b"PRAGMA secure_delete=ON")
            run(f"PRAGMA page_size={int(page_size)}".encode())
            n = ctypes.c_int(int(reserve))
            lib.sqlite3_file_control(db, b"main", SQLITE_FCNTL_RESERVE_BYTES, ctypes.byref(n))
            run(b"VACUUM")
        finally:
            lib.sqlite3_close(db)
        with open(path, "rb") as fh:
            return fh.read()
    finally:
        os.unlink(path)
