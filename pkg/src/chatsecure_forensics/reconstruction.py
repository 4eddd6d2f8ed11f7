"""Joins across the decoded tables: accounts, contacts, message chronology, file transfers."""

import csv
import hashlib
import io
import json
import os
from dataclasses import asdict, dataclass, field

from . import __version__
from .artifact_model import (
    ORIGIN_ORDER, ContactType, decode_epoch_ms, enum_name, format_utc,
)
from .vfs_store import find_meta

TOOL_NAME = "chatsecure-forensics"
REPORT_SCHEMA_VERSION = 1

DEFAULT_DOMAIN_SETTINGS = ("account-domain", "pref_account_domain")
DEFAULT_SERVICE_SETTINGS = ("account-service", "pref_account_service")
DEFAULT_SERVER_SETTINGS = ("account-server", "pref_account_server")


@dataclass(frozen=True)
class ReportConfig:
    domain_settings: tuple = DEFAULT_DOMAIN_SETTINGS
    service_settings: tuple = DEFAULT_SERVICE_SETTINGS
    server_settings: tuple = DEFAULT_SERVER_SETTINGS


@dataclass
class AccountReport:
    account_id: int
    name: str
    username: str
    password: str
    provider_id: int
    provider_name: str = None
    provider_fullname: str = None
    service: str = None
    domain: str = None
    server: str = None
    identity: str = None
    active: object = None
    locked: object = None
    keep_signed_in: object = None
    presence_status: str = "unknown"
    conn_status: str = "unknown"
    gaps: list = field(default_factory=list)


@dataclass
class AvatarSummary:
    avatar_id: int
    hash: str
    size: int
    hash_ok: object


@dataclass
class ContactReport:
    contact_id: int
    username: str
    nickname: str
    type: str
    group_chat: bool
    account_id: int
    account_name: str = None
    provider_id: int = None
    list_id: int = None
    list_name: str = None
    presence: str = "unknown"
    client_type: str = None
    status: str = None
    subscription_status: str = None
    subscription_type: str = None
    otr: str = None
    avatar: AvatarSummary = None
    gaps: list = field(default_factory=list)


@dataclass
class ChronologyEntry:
    timestamp: str
    date_ms: int
    origin: str
    message_id: int
    message_type: int
    message_type_name: str
    category: str
    kind: str
    direction: str
    encrypted: bool
    verified: bool
    deferred: bool
    account_id: int = None
    account_name: str = None
    contact_id: int = None
    contact_nickname: str = None
    contact_username: str = None
    body: str = None
    mime_type: str = None
    file_path: str = None
    delivered: object = None
    group_chat: object = None
    group_alias: str = None
    date_in_range: bool = True
    gaps: list = field(default_factory=list)


@dataclass
class FileTransferRecord:
    entry: ChronologyEntry
    mime_type: str
    vfs_path: str
    size: int = None
    block_size: int = None
    status: str = "message-without-file"


@dataclass
class FileCorrelation:
    records: list
    orphan_files: list

    @property
    def messages_without_file(self):
        return [r for r in self.records if r.status == "message-without-file"]


@dataclass(frozen=True)
class ChronologyFilter:
    account_id: int = None
    contact_id: int = None
    since_ms: int = None
    until_ms: int = None


def _first_setting(settings, names):
    wanted = [n.lower() for n in names]
    for n in wanted:
        for s in settings:
            if (s.name or "").lower() == n and s.value:
                return s.value
    return None


def build_account_report(db, config=ReportConfig()):
    providers = db.by_id("providers")
    status_by_account = {}
    for st in sorted(db.account_status, key=lambda s: s.id):
        status_by_account.setdefault(st.account_id, st)
    reports = []
    for a in sorted(db.accounts, key=lambda a: a.id):
        r = AccountReport(
            account_id=a.id, name=a.name, username=a.username, password=a.pw,
            provider_id=a.provider_id, active=_plain(a.active), locked=_plain(a.locked),
            keep_signed_in=_plain(a.keep_signed_in),
        )
        prov = providers.get(a.provider_id)
        if prov is None:
            r.gaps.append(f"provider {a.provider_id} not found")
        else:
            r.provider_name = prov.name
            r.provider_fullname = prov.fullname
        settings = [s for s in db.provider_settings if s.provider_id == a.provider_id]
        r.service = _first_setting(settings, config.service_settings) or (prov.name if prov else None)
        r.domain = _first_setting(settings, config.domain_settings)
        r.server = _first_setting(settings, config.server_settings)
        if r.domain is None:
            r.gaps.append("no account-domain setting")
        if a.username and r.domain:
            r.identity = a.username if "@" in a.username else f"{a.username}@{r.domain}"
        st = status_by_account.get(a.id)
        if st is None:
            r.gaps.append("no accountStatus row")
        else:
            r.presence_status = enum_name(st.presence_status) or "unknown"
            r.conn_status = enum_name(st.conn_status) or "unknown"
        reports.append(r)
    return reports


def _plain(v):
    if v is None or isinstance(v, bool):
        return v
    return v.name if hasattr(v, "name") else v


def build_contact_report(db):
    accounts = db.by_id("accounts")
    lists = db.by_id("contact_lists")
    presence = {}
    for p in sorted(db.presence, key=lambda p: p.id):
        presence.setdefault(p.contact_id, p)
    avatars = {}
    for av in sorted(db.avatars, key=lambda a: a.id):
        avatars.setdefault((av.contact_username, av.account_id), av)
        avatars.setdefault((av.contact_username, None), av)
    out = []
    for c in sorted(db.contacts, key=lambda c: c.id):
        r = ContactReport(
            contact_id=c.id, username=c.username, nickname=c.nickname,
            type=enum_name(c.type), group_chat=c.type == ContactType.GROUP_CHAT,
            account_id=c.account_id, provider_id=c.provider_id, list_id=c.contact_list_id,
            subscription_status=enum_name(c.subscription_status),
            subscription_type=enum_name(c.subscription_type), otr=enum_name(c.otr),
        )
        acc = accounts.get(c.account_id)
        if acc is None:
            r.gaps.append(f"account {c.account_id} not found")
        else:
            r.account_name = acc.name
        lst = lists.get(c.contact_list_id)
        if lst is None:
            r.gaps.append(f"contact list {c.contact_list_id} not found")
        else:
            r.list_name = lst.name
        p = presence.get(c.id)
        if p is not None:
            r.presence = enum_name(p.mode) or "unknown"
            r.client_type = enum_name(p.client_type)
            r.status = p.status
        av = avatars.get((c.username, c.account_id)) or avatars.get((c.username, None))
        if av is not None and av.data:
            r.avatar = AvatarSummary(av.id, av.hash, len(av.data), av.hash_matches)
        out.append(r)
    return out


def export_avatars(db, out_dir):
    """Write each avatar picture to ``out_dir``; returns per-avatar records with SHA-1 checks."""
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    for av in sorted(db.avatars, key=lambda a: a.id):
        if not av.data:
            continue
        name = f"avatar_{av.id}.bin"
        with open(os.path.join(out_dir, name), "wb") as fh:
            fh.write(av.data)
        rows.append({
            "avatar_id": av.id, "contact": av.contact_username, "file": name,
            "stored_hash": av.hash, "sha1": av.computed_sha1, "hash_ok": av.hash_matches,
        })
    return rows


def _sort_key(m):
    return (m.date_ms if m.date_ms is not None else -1, ORIGIN_ORDER.get(m.origin, 9), m.id)


def _entry(m, contacts, accounts):
    cls = m.classification
    t = m.type
    e = ChronologyEntry(
        timestamp=format_utc(decode_epoch_ms(m.date_ms)) if isinstance(m.date_ms, int) and m.date_ms >= 0 else None,
        date_ms=m.date_ms, origin=m.origin, message_id=m.id,
        message_type=int(t) if t is not None else None, message_type_name=enum_name(t),
        category=cls.category, kind=cls.kind, direction=cls.direction,
        encrypted=cls.encrypted, verified=cls.verified, deferred=cls.deferred,
        contact_id=m.thread_id, body=m.body, mime_type=m.mime_type, file_path=m.vfs_path,
        delivered=_plain(m.is_delivered), group_chat=_plain(m.is_muc),
        group_alias=m.nickname or None, date_in_range=m.date_in_range,
    )
    c = contacts.get(m.thread_id)
    if c is None:
        e.gaps.append(f"DanglingThread({m.thread_id})")
    else:
        e.contact_nickname = c.nickname
        e.contact_username = c.username
        e.account_id = c.account_id
        acc = accounts.get(c.account_id)
        if acc is None:
            e.gaps.append(f"account {c.account_id} not found")
        else:
            e.account_name = acc.name
    if not m.date_in_range:
        e.gaps.append(f"date {m.date_ms!r} is not 13-digit epoch milliseconds")
    return e


def build_chronology(db, filters=ChronologyFilter()):
    """All messages of both tables as timeline entries, oldest first."""
    contacts = db.by_id("contacts")
    accounts = db.by_id("accounts")
    out = []
    for m in sorted(db.messages, key=_sort_key):
        e = _entry(m, contacts, accounts)
        f = filters
        if f.account_id is not None and e.account_id != f.account_id:
            continue
        if f.contact_id is not None and e.contact_id != f.contact_id:
            continue
        if f.since_ms is not None and (m.date_ms is None or m.date_ms < f.since_ms):
            continue
        if f.until_ms is not None and (m.date_ms is None or m.date_ms > f.until_ms):
            continue
        out.append(e)
    return out


def correlate_file_transfers(db, media):
    """Match file messages to virtual-disk objects by path, reporting gaps both ways."""
    contacts = db.by_id("contacts")
    accounts = db.by_id("accounts")
    records = []
    referenced = set()
    for m in sorted((m for m in db.messages if m.is_file), key=_sort_key):
        e = _entry(m, contacts, accounts)
        rec = FileTransferRecord(entry=e, mime_type=m.mime_type, vfs_path=m.vfs_path)
        meta = find_meta(media, m.vfs_path) if media is not None else None
        if meta is not None:
            referenced.add(meta.key)
            rec.size = meta.size
            rec.block_size = meta.block_size
            rec.status = "matched"
        records.append(rec)
    orphans = []
    if media is not None:
        orphans = sorted(
            m.key for m in media.meta
            if getattr(m.type, "value", m.type) == "blob" and m.key not in referenced
        )
    return FileCorrelation(records=records, orphan_files=orphans)


def correlation_index(correlation):
    """Virtual path -> message fields, for the extraction manifest."""
    idx = {}
    for r in correlation.records:
        if r.status != "matched":
            continue
        e = r.entry
        idx.setdefault(r.vfs_path, {
            "mime_type": r.mime_type, "message_type": e.message_type,
            "message_type_name": e.message_type_name, "direction": e.direction,
            "encrypted": e.encrypted, "date_ms": e.date_ms, "timestamp": e.timestamp,
            "contact_id": e.contact_id, "contact_username": e.contact_username,
            "account_name": e.account_name, "origin": e.origin, "message_id": e.message_id,
        })
    return idx


# -- emitters --------------------------------------------------------------

def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _rows_of(kind, data):
    if kind == "files":
        rows = []
        for r in data.records:
            d = asdict(r.entry)
            d.update(mime_type=r.mime_type, vfs_path=r.vfs_path, size=r.size,
                     block_size=r.block_size, status=r.status)
            rows.append(d)
        return rows
    return [asdict(r) for r in data]


def report_document(kind, data, inputs=()):
    """Versioned JSON-ready document; ``inputs`` are file paths hashed for chain of custody."""
    doc = {
        "tool": TOOL_NAME,
        "version": __version__,
        "schema_version": REPORT_SCHEMA_VERSION,
        "report": kind,
        "inputs": [{"path": os.path.basename(p), "sha256": sha256_file(p)} for p in inputs],
        "rows": _rows_of(kind, data),
    }
    if kind == "files":
        doc["orphan_files"] = list(data.orphan_files)
    return doc


def to_json(doc):
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, (list, tuple)):
            out[key] = "; ".join(str(x) for x in v)
        else:
            out[key] = v
    return out


def to_csv(doc):
    rows = [_flatten(r) for r in doc["rows"]]
    cols = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()
