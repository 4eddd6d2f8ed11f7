"""Compare the compiled and pure-Python kernels on representative inputs.

Usage::

    python benchmarks/bench_kernels.py [--dump-mib 16] [--repeat 3]
"""

import argparse
import random
import sqlite3
import tempfile
import timeit
from pathlib import Path

from chatsecure_forensics import _kernels
from chatsecure_forensics._kernels import backends
from chatsecure_forensics.memscan import DEFAULT_SIGNATURE, SignaturePattern
from chatsecure_forensics.sqlite_reader import DbImage


def _dump(mib, rng):
    buf = bytearray(rng.randbytes(mib << 20))
    for _ in range(64):
        pos = rng.randrange(0, len(buf) - 64)
        buf[pos:pos + len(DEFAULT_SIGNATURE)] = DEFAULT_SIGNATURE
    return bytes(buf)


def _table_image(rng):
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "b.db"
        con = sqlite3.connect(path)
        con.execute("CREATE TABLE t (a INTEGER, b TEXT, c REAL, d BLOB, e INTEGER)")
        con.executemany("INSERT INTO t VALUES (?, ?, ?, ?, ?)",
                        [(rng.getrandbits(40), "x" * rng.randint(0, 60), rng.random(),
                          rng.randbytes(rng.randint(0, 40)), None) for _ in range(5000)])
        con.commit()
        con.close()
        return DbImage(path.read_bytes())


def _scan_with(img, mod):
    # the reader looks the decoder up on the package at scan time
    saved = _kernels.decode_record
    _kernels.decode_record = mod.decode_record
    try:
        return sum(1 for _ in img.scan_table("t"))
    finally:
        _kernels.decode_record = saved


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dump-mib", type=int, default=16)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    rng = random.Random(0)
    dump = _dump(args.dump_mib, rng)
    img = _table_image(rng)
    mask = SignaturePattern.loose().mask_bytes
    utf16 = ("passphrase".encode("utf-16-le") + b"\0\0") * 20000
    mods = backends()
    if "cython" not in mods:
        print("compiled kernels not available; showing pure-Python timings only")

    cases = {
        f"find_signature ({args.dump_mib} MiB)":
            lambda m: m.find_signature(dump, DEFAULT_SIGNATURE, mask),
        "decode_record (5000-row table scan)":
            lambda m: _scan_with(img, m),
        "utf16z_length (20000 strings)":
            lambda m: [m.utf16z_length(utf16, i * 22, 64) for i in range(20000)],
    }
    print(f"{'kernel':40s} " + " ".join(f"{name:>10s}" for name in mods) + "   speedup")
    for label, fn in cases.items():
        times = {name: min(timeit.repeat(lambda: fn(m), number=1, repeat=args.repeat))
                 for name, m in mods.items()}
        speed = f"{times['python'] / times['cython']:8.1f}x" if "cython" in times else ""
        print(f"{label:40s} " + " ".join(f"{t * 1e3:8.1f}ms" for t in times.values()) + "  " + speed)


if __name__ == "__main__":
    main()
