"""Read-only parser for the SQLite 3 main database file format.

Walks table b-trees (interior 0x05, leaf 0x0D), follows overflow chains and
decodes records without any database engine. Index b-trees are not read.
"""

import re
from dataclasses import dataclass

from . import _kernels
from .errors import BadMagic, CorruptCell, NoSuchTable, UnsupportedFeature

SQLITE_MAGIC = b"SQLite format 3\x00"
HEADER_SIZE = 100

PAGE_INTERIOR_INDEX = 0x02
PAGE_INTERIOR_TABLE = 0x05
PAGE_LEAF_INDEX = 0x0A
PAGE_LEAF_TABLE = 0x0D

_ENCODINGS = {1: "utf-8", 2: "utf-16-le", 3: "utf-16-be"}
_TABLE_CONSTRAINTS = ("constraint", "primary", "unique", "check", "foreign")


def encode_varint(n):
    """SQLite varint encoding (big-endian, 1 to 9 bytes) of an unsigned 64-bit value."""
    if n < 0:
        n &= 0xFFFFFFFFFFFFFFFF
    if n > 0x00FFFFFFFFFFFFFF:
        out = [n & 0xFF]
        n >>= 8
        for _ in range(8):
            out.append((n & 0x7F) | 0x80)
            n >>= 7
        return bytes(reversed(out))
    out = [n & 0x7F]
    n >>= 7
    while n:
        out.append((n & 0x7F) | 0x80)
        n >>= 7
    return bytes(reversed(out))


def read_varint(buf, pos=0):
    return _kernels.read_varint(buf, pos)


@dataclass(frozen=True)
class Row:
    rowid: int
    values: tuple

    def as_dict(self, columns):
        return dict(zip(columns, self.values))


@dataclass(frozen=True)
class TableInfo:
    name: str
    root_page: int
    columns: tuple
    sql: str
    rowid_alias: int = None
    defaults: tuple = ()
    without_rowid: bool = False


@dataclass(frozen=True)
class FreeSpaceReport:
    """Result of the freed-space diagnostic: counts of non-zero bytes left behind.

    ``wiped`` looks at freelist pages and freeblocks, where deleted cells end
    up. The unallocated gap between the cell pointers and the content area is
    reported but not judged: b-tree rebalancing leaves stale pointer and cell
    copies there even in databases that never saw a delete.
    """

    freelist_pages: int
    nonzero_freelist_pages: list
    freeblock_bytes: int
    nonzero_freeblock_bytes: int
    unallocated_bytes: int
    nonzero_unallocated_bytes: int

    @property
    def wiped(self):
        return not self.nonzero_freelist_pages and self.nonzero_freeblock_bytes == 0

    def to_dict(self):
        return {
            "freelist_pages": self.freelist_pages,
            "nonzero_freelist_pages": list(self.nonzero_freelist_pages),
            "freeblock_bytes": self.freeblock_bytes,
            "nonzero_freeblock_bytes": self.nonzero_freeblock_bytes,
            "unallocated_bytes": self.unallocated_bytes,
            "nonzero_unallocated_bytes": self.nonzero_unallocated_bytes,
            "wiped": self.wiped,
        }


def _strip_ident(tok):
    tok = tok.strip()
    if len(tok) >= 2 and tok[0] in "\"'`[":
        return tok[1:-1]
    return tok


def _split_top_level(body):
    parts, depth, cur, quote = [], 0, [], None
    for ch in body:
        if quote:
            cur.append(ch)
            if ch == quote:
                quote = None
            continue
        if ch in "\"'`[":
            quote = "]" if ch == "[" else ch
        elif ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
            continue
        cur.append(ch)
    parts.append("".join(cur))
    return [p.strip() for p in parts if p.strip()]


_IDENT = r'(?:"[^"]*"|`[^`]*`|\[[^\]]*\]|\'[^\']*\'|[^\s(,]+)'
_DEFAULT = re.compile(r"\bdefault\s+(\(?\s*[-+]?[\w.]+|'(?:[^']|'')*')", re.IGNORECASE)


def _literal(text):
    text = text.strip().lstrip("(").strip()
    if text.startswith("'"):
        return text[1:-1].replace("''", "'")
    if text.upper() == "NULL":
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def parse_create_table(sql):
    """Column names, INTEGER PRIMARY KEY position, defaults and WITHOUT ROWID flag."""
    start = sql.find("(")
    end = sql.rfind(")")
    if start < 0 or end < start:
        return (), None, (), False
    tail = sql[end + 1:]
    without_rowid = bool(re.search(r"without\s+rowid", tail, re.IGNORECASE))
    columns, defaults, alias = [], [], None
    table_pk = None
    for part in _split_top_level(sql[start + 1:end]):
        m = re.match(_IDENT, part)
        first = m.group(0) if m else part.split()[0]
        if first.lower() in _TABLE_CONSTRAINTS and not first[0] in "\"'`[":
            pk = re.match(r"primary\s+key\s*\(\s*(" + _IDENT + r")\s*\)", part, re.IGNORECASE)
            if pk:
                table_pk = _strip_ident(pk.group(1))
            continue
        name = _strip_ident(first)
        rest = part[len(first):]
        typ = re.match(r"\s*([A-Za-z]+)", rest)
        is_int = bool(typ) and typ.group(1).upper() == "INTEGER"
        if is_int and re.search(r"primary\s+key", rest, re.IGNORECASE) and not re.search(
            r"primary\s+key\s+desc", rest, re.IGNORECASE
        ):
            alias = len(columns)
        d = _DEFAULT.search(rest)
        defaults.append(_literal(d.group(1)) if d else None)
        columns.append(name)
    if alias is None and table_pk is not None:
        for i, c in enumerate(columns):
            if c.lower() == table_pk.lower():
                decl = _split_top_level(sql[start + 1:end])[i]
                if re.match(_IDENT + r"\s+INTEGER\b", decl, re.IGNORECASE):
                    alias = i
    return tuple(columns), alias, tuple(defaults), without_rowid


class DbImage:
    """Immutable, parsed view of a plaintext SQLite database image."""

    def __init__(self, data):
        data = bytes(data)
        if len(data) < HEADER_SIZE or data[:16] != SQLITE_MAGIC:
            raise BadMagic("not an SQLite 3 database (magic mismatch)")
        ps = int.from_bytes(data[16:18], "big")
        self.page_size = 65536 if ps == 1 else ps
        if self.page_size < 512 or self.page_size & (self.page_size - 1):
            raise BadMagic(f"invalid page size {ps}")
        if data[18] == 2 or data[19] == 2:
            raise UnsupportedFeature("WAL journal mode databases are not supported")
        if data[18] > 2 or data[19] > 2:
            raise UnsupportedFeature(f"unknown file format version {data[18]}/{data[19]}")
        self.reserve = data[20]
        self.usable_size = self.page_size - self.reserve
        enc = int.from_bytes(data[56:60], "big") or 1
        if enc not in _ENCODINGS:
            raise UnsupportedFeature(f"unknown text encoding {enc}")
        self.text_encoding = _ENCODINGS[enc]
        self.page_count = len(data) // self.page_size
        self.first_freelist_trunk = int.from_bytes(data[32:36], "big")
        self.freelist_count = int.from_bytes(data[36:40], "big")
        self._data = data
        self.tables = {}
        self._load_schema()

    @property
    def data(self):
        return self._data

    @property
    def schema(self):
        return [(t.name, t.root_page, t.columns) for t in self.tables.values()]

    def user_tables(self):
        return [n for n in self.tables if not n.startswith("sqlite_")]

    def page(self, n):
        if not 1 <= n <= self.page_count:
            raise CorruptCell(n, -1, "page number out of range")
        start = (n - 1) * self.page_size
        return memoryview(self._data)[start:start + self.page_size]

    def _load_schema(self):
        master_cols = ("type", "name", "tbl_name", "rootpage", "sql")
        for row in self._scan_btree(1):
            rec = dict(zip(master_cols, row.values))
            if rec.get("type") != "table" or not rec.get("sql"):
                continue
            cols, alias, defaults, without_rowid = parse_create_table(rec["sql"])
            self.tables[rec["name"]] = TableInfo(
                name=rec["name"], root_page=rec["rootpage"], columns=cols, sql=rec["sql"],
                rowid_alias=alias, defaults=defaults, without_rowid=without_rowid,
            )

    def columns(self, name):
        return self._table(name).columns

    def _table(self, name):
        try:
            return self.tables[name]
        except KeyError:
            for tname, info in self.tables.items():
                if tname.lower() == name.lower():
                    return info
            raise NoSuchTable(name) from None

    def has_table(self, name):
        try:
            self._table(name)
        except NoSuchTable:
            return False
        return True

    def scan_table(self, name):
        """Yield the rows of ``name`` in rowid order."""
        info = self._table(name)
        if info.without_rowid:
            raise UnsupportedFeature(f"WITHOUT ROWID table {name!r} is not supported")
        ncols = len(info.columns)
        for row in self._scan_btree(info.root_page):
            values = list(row.values)
            if len(values) < ncols:
                values.extend(info.defaults[len(values):ncols])
            elif len(values) > ncols:
                values = values[:ncols]
            if info.rowid_alias is not None and values[info.rowid_alias] is None:
                values[info.rowid_alias] = row.rowid
            yield Row(row.rowid, tuple(values))

    def _page_header(self, n):
        return HEADER_SIZE if n == 1 else 0

    def _scan_btree(self, root):
        stack = [root]
        seen = set()
        decode = _kernels.decode_record
        enc = self.text_encoding
        while stack:
            n = stack.pop()
            if n in seen:
                raise CorruptCell(n, -1, "b-tree page visited twice")
            seen.add(n)
            page = self.page(n)
            h = self._page_header(n)
            kind = page[h]
            ncells = int.from_bytes(page[h + 3:h + 5], "big")
            if kind == PAGE_LEAF_TABLE:
                ptrs = h + 8
                for i in range(ncells):
                    off = int.from_bytes(page[ptrs + 2 * i:ptrs + 2 * i + 2], "big")
                    rowid, payload = self._leaf_cell(n, i, page, off)
                    try:
                        values = decode(payload, enc)
                    except ValueError as exc:
                        raise CorruptCell(n, i, str(exc)) from None
                    yield Row(rowid, values)
            elif kind == PAGE_INTERIOR_TABLE:
                ptrs = h + 12
                children = []
                for i in range(ncells):
                    off = int.from_bytes(page[ptrs + 2 * i:ptrs + 2 * i + 2], "big")
                    if off + 4 > self.page_size:
                        raise CorruptCell(n, i, "cell offset out of page")
                    children.append(int.from_bytes(page[off:off + 4], "big"))
                children.append(int.from_bytes(page[h + 8:h + 12], "big"))
                stack.extend(reversed(children))
            else:
                raise CorruptCell(n, -1, f"unexpected page type 0x{kind:02x} in table b-tree")

    def _leaf_cell(self, pgno, idx, page, off):
        try:
            size, p = _kernels.read_varint(page, off)
            key, p = _kernels.read_varint(page, p)
        except IndexError:
            raise CorruptCell(pgno, idx, "cell header runs off page") from None
        if key >= 1 << 63:
            key -= 1 << 64
        u = self.usable_size
        x = u - 35
        if size <= x:
            if p + size > self.page_size:
                raise CorruptCell(pgno, idx, "payload runs off page")
            return key, bytes(page[p:p + size])
        m = ((u - 12) * 32 // 255) - 23
        k = m + (size - m) % (u - 4)
        local = k if k <= x else m
        if p + local + 4 > self.page_size:
            raise CorruptCell(pgno, idx, "payload runs off page")
        parts = [bytes(page[p:p + local])]
        remaining = size - local
        nxt = int.from_bytes(page[p + local:p + local + 4], "big")
        visited = set()
        while remaining > 0:
            if nxt == 0 or nxt in visited or nxt > self.page_count:
                raise CorruptCell(pgno, idx, "broken overflow chain")
            visited.add(nxt)
            ov = self.page(nxt)
            take = min(remaining, u - 4)
            parts.append(bytes(ov[4:4 + take]))
            remaining -= take
            nxt = int.from_bytes(ov[0:4], "big")
        return key, b"".join(parts)

    def check_zeroed(self):
        """Report whether freed space (freelist pages, freeblocks, gaps) is zero-filled.

        Diagnostic only: nothing is reconstructed from the freed space.
        """
        u = self.usable_size
        freelist = []
        trunk = self.first_freelist_trunk
        seen = set()
        nonzero_pages = []
        while trunk and trunk not in seen and trunk <= self.page_count:
            seen.add(trunk)
            page = self.page(trunk)
            nleaves = int.from_bytes(page[4:8], "big")
            leaves = [
                int.from_bytes(page[8 + 4 * i:12 + 4 * i], "big")
                for i in range(min(nleaves, (u - 8) // 4))
            ]
            freelist.append(trunk)
            if any(page[8 + 4 * len(leaves):u]):
                nonzero_pages.append(trunk)
            for leaf in leaves:
                if 1 <= leaf <= self.page_count:
                    freelist.append(leaf)
                    if any(self.page(leaf)[:u]):
                        nonzero_pages.append(leaf)
            trunk = int.from_bytes(page[0:4], "big")

        fb_total = fb_nonzero = gap_total = gap_nonzero = 0
        free = set(freelist)
        for n in range(1, self.page_count + 1):
            if n in free:
                continue
            page = self.page(n)
            h = self._page_header(n)
            kind = page[h]
            if kind not in (PAGE_LEAF_TABLE, PAGE_INTERIOR_TABLE, PAGE_LEAF_INDEX, PAGE_INTERIOR_INDEX):
                continue
            hdr = 8 if kind in (PAGE_LEAF_TABLE, PAGE_LEAF_INDEX) else 12
            ncells = int.from_bytes(page[h + 3:h + 5], "big")
            content = int.from_bytes(page[h + 5:h + 7], "big") or 65536
            gap_start = h + hdr + 2 * ncells
            if gap_start < content <= u:
                gap = page[gap_start:content]
                gap_total += len(gap)
                gap_nonzero += sum(1 for b in gap if b)
            fb = int.from_bytes(page[h + 1:h + 3], "big")
            hops = 0
            while fb and fb + 4 <= u and hops < u:
                size = int.from_bytes(page[fb + 2:fb + 4], "big")
                body = page[fb + 4:min(fb + size, u)]
                fb_total += len(body)
                fb_nonzero += sum(1 for b in body if b)
                fb = int.from_bytes(page[fb:fb + 2], "big")
                hops += 1
        return FreeSpaceReport(
            freelist_pages=len(freelist),
            nonzero_freelist_pages=sorted(set(nonzero_pages)),
            freeblock_bytes=fb_total,
            nonzero_freeblock_bytes=fb_nonzero,
            unallocated_bytes=gap_total,
            nonzero_unallocated_bytes=gap_nonzero,
        )


def open_image(data):
    """Parse a plaintext SQLite image (bytes or path-like)."""
    if not isinstance(data, (bytes, bytearray, memoryview)):
        with open(data, "rb") as fh:
            data = fh.read()
    return DbImage(data)


def scan_table(img, name):
    return img.scan_table(name)
