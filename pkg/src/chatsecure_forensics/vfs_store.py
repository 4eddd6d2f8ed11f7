"""Reassemble files stored in the libsqlfs block store of the IOCipher virtual disk."""

import hashlib
import json
import os
import re
from dataclasses import dataclass, field

from .artifact_model import VfsType, decode_epoch_s, format_utc
from .errors import DuplicateBlock, MissingBlock, NoSuchFile, SizeOverflow, VfsError


@dataclass
class VfsNode:
    path: str
    meta: object = None  # VfsMeta, or None for a directory implied by a child path
    children: dict = field(default_factory=dict)

    @property
    def kind(self):
        if self.meta is None:
            return "dir"
        t = self.meta.type
        return t.value if isinstance(t, VfsType) else str(t)

    def walk(self):
        yield self
        for name in sorted(self.children):
            yield from self.children[name].walk()


def _epoch_s(n):
    return format_utc(decode_epoch_s(n), millis=False) if isinstance(n, int) and n >= 0 else None


def meta_to_dict(meta):
    t = meta.type
    return {
        "path": meta.key,
        "type": t.value if isinstance(t, VfsType) else t,
        "size": meta.size,
        "block_size": meta.block_size,
        "ctime": meta.ctime,
        "mtime": meta.mtime,
        "atime": meta.atime,
        "ctime_utc": _epoch_s(meta.ctime),
        "mtime_utc": _epoch_s(meta.mtime),
        "atime_utc": _epoch_s(meta.atime),
    }


def list_vfs(media):
    """Build a path tree from ``meta_data``. Symlinks are listed, never followed."""
    root = VfsNode("/")
    for meta in sorted(media.meta, key=lambda m: m.key or ""):
        key = meta.key or ""
        parts = [p for p in key.split("/") if p]
        node = root
        path = ""
        for p in parts:
            path += "/" + p
            node = node.children.setdefault(p, VfsNode(path))
        node.meta = meta
    return root


def find_meta(media, path):
    for m in media.meta:
        if m.key == path:
            return m
    return None


def expected_blocks(size, block_size):
    if block_size <= 0:
        raise VfsError(f"invalid block size {block_size}")
    return -(-size // block_size)


def extract_file(media, path):
    """Concatenate the blocks of ``path`` in ``block_no`` order, truncated to the recorded size."""
    meta = find_meta(media, path)
    if meta is None:
        raise NoSuchFile(f"no meta_data row for {path!r}")
    if meta.type != VfsType.BLOB:
        raise NoSuchFile(f"{path!r} is a {getattr(meta.type, 'value', meta.type)}, not a file")
    size = meta.size or 0
    count = expected_blocks(size, meta.block_size)
    blocks = media.blocks_for(path)
    by_no = {}
    for b in blocks:
        if b.block_no in by_no:
            raise DuplicateBlock(f"block {b.block_no} of {path!r} stored twice")
        by_no[b.block_no] = b.data_block
    for n in range(count):
        if n not in by_no:
            raise MissingBlock(n, path)
    data = b"".join(by_no[n] for n in range(count))
    if len(data) < size:
        raise SizeOverflow(f"{path!r}: blocks hold {len(data)} bytes, meta_data says {size}")
    return data[:size]


def split_blocks(data, block_size):
    """Fixture-side inverse of :func:`extract_file`: the block payloads for ``data``."""
    return [data[i:i + block_size] for i in range(0, len(data), block_size)]


_UNSAFE = re.compile(r"[^A-Za-z0-9._@+=-]")


def sanitize_path(path):
    """Relative, traversal-free file system path for a virtual-disk key."""
    parts = []
    for p in (path or "").split("/"):
        if p in ("", ".", ".."):
            continue
        parts.append(_UNSAFE.sub("_", p))
    return os.path.join(*parts) if parts else "_"


def extract_all(media, out_dir, correlation=None):
    """Extract every blob to ``out_dir`` and write ``manifest.json``.

    Each file gets a ``.meta.json`` sidecar with its original path, timestamps
    and SHA-256. ``correlation`` maps a virtual path to extra manifest fields
    (message type, MIME type, date) taken from the main database.

    Returns the manifest dict; ``manifest["failures"]`` lists paths that could
    not be fully reassembled.
    """
    os.makedirs(out_dir, exist_ok=True)
    entries, failures = [], []
    for meta in sorted(media.meta, key=lambda m: m.key or ""):
        if meta.type != VfsType.BLOB:
            continue
        entry = meta_to_dict(meta)
        entry["output"] = sanitize_path(meta.key)
        if correlation and meta.key in correlation:
            entry["message"] = correlation[meta.key]
        try:
            data = extract_file(media, meta.key)
        except VfsError as exc:
            entry["status"] = "error"
            entry["error"] = str(exc)
            failures.append(meta.key)
            entries.append(entry)
            continue
        target = os.path.join(out_dir, entry["output"])
        os.makedirs(os.path.dirname(target) or out_dir, exist_ok=True)
        with open(target, "wb") as fh:
            fh.write(data)
        entry["status"] = "extracted"
        entry["sha256"] = hashlib.sha256(data).hexdigest()
        entry["blocks"] = expected_blocks(meta.size or 0, meta.block_size)
        with open(target + ".meta.json", "w", encoding="utf-8") as fh:
            json.dump(entry, fh, indent=2, sort_keys=True)
            fh.write("\n")
        entries.append(entry)
    manifest = {"files": entries, "failures": failures}
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
