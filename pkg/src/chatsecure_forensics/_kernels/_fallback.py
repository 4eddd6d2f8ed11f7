"""Pure-Python kernels. Behaviour is the reference for the compiled twin."""

import struct

_FLOAT = struct.Struct(">d")
_INT_WIDTHS = (0, 1, 2, 3, 4, 6, 8)


def _anchor(mask):
    """Longest run of exactly-matched positions, as (start, length)."""
    best_start, best_len = 0, 0
    run_start = None
    for i, m in enumerate(list(mask) + [0]):
        if m:
            if run_start is None:
                run_start = i
        elif run_start is not None:
            if i - run_start > best_len:
                best_start, best_len = run_start, i - run_start
            run_start = None
    return best_start, best_len


def find_signature(buf, pattern, mask, start=0, stop=None):
    """Offsets ``o`` in ``[start, stop)`` where ``pattern`` matches ``buf`` under ``mask``.

    ``mask`` holds one byte per pattern byte: non-zero means the byte must
    match, zero means any value is accepted.
    """
    n = len(pattern)
    last = len(buf) - n
    if stop is None or stop > last + 1:
        stop = last + 1
    if start < 0:
        start = 0
    if stop <= start:
        return []
    a_off, a_len = _anchor(mask)
    if a_len == 0:
        return list(range(start, stop))
    anchor = bytes(pattern[a_off:a_off + a_len])
    checks = [(i, pattern[i]) for i in range(n) if mask[i] and not (a_off <= i < a_off + a_len)]
    view = bytes(buf) if not isinstance(buf, (bytes, bytearray)) else buf
    hits = []
    pos = start + a_off
    while True:
        h = view.find(anchor, pos, stop + a_off + a_len - 1)
        if h < 0:
            break
        o = h - a_off
        if all(view[o + i] == b for i, b in checks):
            hits.append(o)
        pos = h + 1
    return hits


def utf16z_length(buf, pos, max_units):
    """Number of UTF-16 code units before a 16-bit NUL at ``pos``.

    Returns -1 when no terminator occurs within ``max_units`` units, and -2
    when the buffer ends first (caller may retry with more data).
    """
    end = len(buf)
    for k in range(max_units + 1):
        p = pos + 2 * k
        if p + 2 > end:
            return -2
        if buf[p] == 0 and buf[p + 1] == 0:
            return k
    return -1


def read_varint(buf, pos):
    """Decode an SQLite varint at ``pos``; returns ``(value, next_pos)``."""
    value = 0
    for i in range(8):
        b = buf[pos + i]
        value = (value << 7) | (b & 0x7F)
        if b < 0x80:
            return value, pos + i + 1
    value = (value << 8) | buf[pos + 8]
    return value, pos + 9


def decode_record(payload, text_encoding="utf-8"):
    """Decode one SQLite record payload into a list of Python values."""
    try:
        header_len, p = read_varint(payload, 0)
        types = []
        while p < header_len:
            t, p = read_varint(payload, p)
            types.append(t)
    except IndexError:
        raise ValueError("record header runs past payload") from None
    if p != header_len:
        raise ValueError("record header length mismatch")
    out = []
    q = header_len
    size = len(payload)
    for t in types:
        if t == 0:
            out.append(None)
        elif t <= 6:
            w = _INT_WIDTHS[t]
            if q + w > size:
                raise ValueError("integer runs past payload")
            out.append(int.from_bytes(payload[q:q + w], "big", signed=True))
            q += w
        elif t == 7:
            if q + 8 > size:
                raise ValueError("float runs past payload")
            out.append(_FLOAT.unpack_from(payload, q)[0])
            q += 8
        elif t == 8:
            out.append(0)
        elif t == 9:
            out.append(1)
        elif t < 12:
            raise ValueError(f"reserved serial type {t}")
        else:
            w = (t - 12) >> 1
            if q + w > size:
                raise ValueError("string or blob runs past payload")
            chunk = bytes(payload[q:q + w])
            q += w
            out.append(chunk if t % 2 == 0 else chunk.decode(text_encoding, "replace"))
    return out
