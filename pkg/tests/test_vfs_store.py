import json
import os
import random

import pytest

from chatsecure_forensics.artifact_model import MediaDb, VfsBlock, VfsMeta, VfsType
from chatsecure_forensics.errors import DuplicateBlock, MissingBlock, NoSuchFile, SizeOverflow
from chatsecure_forensics.vfs_store import (
    expected_blocks, extract_all, extract_file, list_vfs, sanitize_path, split_blocks,
)


def media_with(files, block_size=8192, drop=(), dup=(), shrink=()):
    meta = [VfsMeta("/", VfsType.DIR, 0, 0, 0, 0, block_size)]
    blocks = []
    for path, data in files.items():
        meta.append(VfsMeta(path, VfsType.BLOB, 1, 2, 3, len(data), block_size))
        for i, b in enumerate(split_blocks(data, block_size)):
            if (path, i) in drop:
                continue
            if (path, i) in shrink:
                b = b[:-1]
            blocks.append(VfsBlock(path, i, b))
            if (path, i) in dup:
                blocks.append(VfsBlock(path, i, b))
    random.Random(0).shuffle(blocks)
    return MediaDb(tuple(meta), tuple(blocks))


@pytest.mark.parametrize("size", [0, 1, 8191, 8192, 8193, 3 * 8192, 143584])
def test_roundtrip_sizes(size):
    data = random.Random(size).randbytes(size)
    m = media_with({"/f": data})
    assert extract_file(m, "/f") == data
    assert len(m.blocks_for("/f")) == expected_blocks(size, 8192)


def test_published_geometry():
    assert expected_blocks(143584, 8192) == 18
    assert len(split_blocks(bytes(143584), 8192)[-1]) == 4320


def test_errors():
    data = bytes(range(256)) * 100
    with pytest.raises(MissingBlock) as ei:
        extract_file(media_with({"/f": data}, block_size=1000, drop={("/f", 1)}), "/f")
    assert ei.value.block_no == 1 and str(ei.value).startswith("MissingBlock(1)")
    with pytest.raises(DuplicateBlock):
        extract_file(media_with({"/f": data}, block_size=1000, dup={("/f", 0)}), "/f")
    with pytest.raises(SizeOverflow):
        extract_file(media_with({"/f": data}, block_size=1000, shrink={("/f", 25)}), "/f")
    with pytest.raises(NoSuchFile):
        extract_file(media_with({}), "/nope")
    with pytest.raises(NoSuchFile):
        extract_file(media_with({}), "/")


def test_tree_listing():
    m = media_with({"/2/download/a": b"x", "/2/upload/b": b"y"})
    root = list_vfs(m)
    paths = [n.path for n in root.walk()]
    assert paths == ["/", "/2", "/2/download", "/2/download/a", "/2/upload", "/2/upload/b"]
    assert root.children["2"].kind == "dir" and root.children["2"].children["upload"].children["b"].kind == "blob"


@pytest.mark.parametrize("path,expect", [
    ("/2/download/58278", os.path.join("2", "download", "58278")),
    ("/../../etc/passwd", os.path.join("etc", "passwd")),
    ("/a b/c:d", os.path.join("a_b", "c_d")),
    ("", "_"),
])
def test_sanitize(path, expect):
    assert sanitize_path(path) == expect


def test_extract_all_manifest(tmp_path):
    good = os.urandom(20000)
    m = media_with({"/ok/file": good, "/bad/file": os.urandom(20000)}, drop={("/bad/file", 1)})
    manifest = extract_all(m, str(tmp_path), {"/ok/file": {"mime_type": "image/jpeg"}})
    assert manifest["failures"] == ["/bad/file"]
    assert (tmp_path / "ok" / "file").read_bytes() == good
    assert not (tmp_path / "bad" / "file").exists()
    side = json.loads((tmp_path / "ok" / "file.meta.json").read_text())
    assert side["message"]["mime_type"] == "image/jpeg" and side["size"] == 20000
    on_disk = json.loads((tmp_path / "manifest.json").read_text())
    bad = [e for e in on_disk["files"] if e["path"] == "/bad/file"][0]
    assert bad["status"] == "error" and "MissingBlock(1)" in bad["error"]
