# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled twins of the kernels in ``_fallback``; same signatures and results."""

from libc.string cimport memchr
from libc.stdint cimport uint8_t, uint64_t, int64_t

import struct

_FLOAT = struct.Struct(">d")


def find_signature(const uint8_t[:] buf, const uint8_t[:] pattern, const uint8_t[:] mask,
                   Py_ssize_t start=0, stop=None):
    cdef Py_ssize_t n = pattern.shape[0]
    cdef Py_ssize_t size = buf.shape[0]
    cdef Py_ssize_t last = size - n
    cdef Py_ssize_t end
    cdef Py_ssize_t first = -1
    cdef Py_ssize_t i, o
    cdef const uint8_t* base
    cdef const uint8_t* hit
    cdef uint8_t fb
    cdef bint ok
    if stop is None or stop > last + 1:
        end = last + 1
    else:
        end = stop
    if start < 0:
        start = 0
    hits = []
    if end <= start:
        return hits
    for i in range(n):
        if mask[i]:
            first = i
            break
    if first < 0:
        return list(range(start, end))
    fb = pattern[first]
    base = &buf[0]
    o = start
    while o < end:
        hit = <const uint8_t*> memchr(base + o + first, fb, end - o)
        if hit == NULL:
            break
        o = (hit - base) - first
        ok = True
        for i in range(first + 1, n):
            if mask[i] and buf[o + i] != pattern[i]:
                ok = False
                break
        if ok:
            hits.append(o)
        o += 1
    return hits


def utf16z_length(const uint8_t[:] buf, Py_ssize_t pos, Py_ssize_t max_units):
    cdef Py_ssize_t end = buf.shape[0]
    cdef Py_ssize_t k, p
    for k in range(max_units + 1):
        p = pos + 2 * k
        if p + 2 > end:
            return -2
        if buf[p] == 0 and buf[p + 1] == 0:
            return k
    return -1


cdef inline Py_ssize_t _varint(const uint8_t[:] buf, Py_ssize_t pos, uint64_t* out) except -1:
    cdef uint64_t v = 0
    cdef int i
    cdef uint8_t b
    cdef Py_ssize_t size = buf.shape[0]
    for i in range(8):
        if pos + i >= size:
            raise IndexError("varint runs past buffer")
        b = buf[pos + i]
        v = (v << 7) | (b & 0x7F)
        if b < 0x80:
            out[0] = v
            return pos + i + 1
    if pos + 8 >= size:
        raise IndexError("varint runs past buffer")
    v = (v << 8) | buf[pos + 8]
    out[0] = v
    return pos + 9


def read_varint(const uint8_t[:] buf, Py_ssize_t pos):
    cdef uint64_t v
    cdef Py_ssize_t nxt = _varint(buf, pos, &v)
    return v, nxt


cdef inline int64_t _be_int(const uint8_t[:] buf, Py_ssize_t q, int w):
    cdef uint64_t v = 0
    cdef int i
    for i in range(w):
        v = (v << 8) | buf[q + i]
    if w < 8 and (v >> (8 * w - 1)) & 1:
        v |= (<uint64_t> 0xFFFFFFFFFFFFFFFF) << (8 * w)
    return <int64_t> v


def decode_record(payload, text_encoding="utf-8"):
    cdef const uint8_t[:] buf = payload
    cdef Py_ssize_t size = buf.shape[0]
    cdef uint64_t header_len, t
    cdef Py_ssize_t p, q
    cdef int w
    cdef list types = []
    cdef list out = []
    cdef bytes chunk
    try:
        p = _varint(buf, 0, &header_len)
        while <uint64_t> p < header_len:
            p = _varint(buf, p, &t)
            types.append(t)
    except IndexError:
        raise ValueError("record header runs past payload") from None
    if <uint64_t> p != header_len:
        raise ValueError("record header length mismatch")
    q = p
    for pt in types:
        t = pt
        if t == 0:
            out.append(None)
        elif t <= 6:
            w = (0, 1, 2, 3, 4, 6, 8)[t]
            if q + w > size:
                raise ValueError("integer runs past payload")
            out.append(_be_int(buf, q, w))
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
            w = <int> ((t - 12) >> 1)
            if q + w > size:
                raise ValueError("string or blob runs past payload")
            chunk = bytes(buf[q:q + w])
            q += w
            if t % 2 == 0:
                out.append(chunk)
            else:
                out.append(chunk.decode(text_encoding, "replace"))
    return out
