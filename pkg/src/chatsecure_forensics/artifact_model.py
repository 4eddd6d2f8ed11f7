"""Typed view of the ChatSecure main database (``impsenc.db``) and the virtual disk (``media.db``).

Columns are resolved by name, so rows from schema variants with extra or
reordered columns decode the same way. Enumerated fields decode to an
``IntEnum`` member when the value is known and to :class:`Raw` otherwise.
"""

import enum
import hashlib
import logging
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

from .errors import NoForensicTables

log = logging.getLogger(__name__)

FORENSIC_TABLES = (
    "accounts", "accountStatus", "providers", "providerSettings", "contacts",
    "contactList", "presence", "avatars", "chats", "messages", "inMemoryMessages",
)
# `chats` duplicates messages/inMemoryMessages and is intentionally not decoded
SKIPPED_TABLES = ("chats",)
MEDIA_TABLES = ("meta_data", "value_data")

ORIGIN_MESSAGES = "messages"
ORIGIN_IN_MEMORY = "inMemoryMessages"
ORIGIN_ORDER = {ORIGIN_MESSAGES: 0, ORIGIN_IN_MEMORY: 1}

_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


@dataclass(frozen=True)
class Raw:
    """An enumerated value outside the documented range, kept verbatim."""

    value: int

    @property
    def name(self):
        return f"raw({self.value})"

    def __int__(self):
        return self.value


class PresenceStatus(enum.IntEnum):
    OFFLINE = 0
    INVISIBLE = 1
    AWAY = 2
    IDLE = 3
    DO_NOT_DISTURB = 4
    AVAILABLE = 5


class ConnStatus(enum.IntEnum):
    OFFLINE = 0
    CONNECTING = 1
    SUSPENDED = 2
    ONLINE = 3


class ContactType(enum.IntEnum):
    NORMAL = 0
    TEMPORARY = 1
    GROUP_CHAT = 2
    BLOCKED = 3
    HIDDEN = 4
    PINNED = 5


class SubscriptionStatus(enum.IntEnum):
    NONE = 0
    SUBSCRIBE_PENDING = 1
    UNSUBSCRIBE_PENDING = 2


class SubscriptionType(enum.IntEnum):
    NONE = 0
    REMOVE = 1
    FROM = 2
    TO = 3
    BOTH = 4
    INVITATIONS = 5


class OtrStatus(enum.IntEnum):
    OFF = 0
    ON_UNKNOWN = 1
    ON_BY_USER = 2
    ON_BY_CONTACT = 3


class ClientType(enum.IntEnum):
    DEFAULT = 0
    MOBILE = 1
    ANDROID = 2


class MessageType(enum.IntEnum):
    OUTGOING = 0
    INCOMING = 1
    PRESENCE_AVAILABLE = 2
    PRESENCE_AWAY = 3
    PRESENCE_DND = 4
    PRESENCE_UNAVAILABLE = 5
    CONVERT_TO_GROUPCHAT = 6
    STATUS = 7
    POSTPONED = 8
    OTR_TURNED_OFF = 9
    OTR_TURNED_ON = 10
    OTR_TURNED_ON_BY_USER = 11
    OTR_TURNED_ON_BY_BUDDY = 12
    INCOMING_ENCRYPTED = 13
    INCOMING_ENCRYPTED_VERIFIED = 14
    OUTGOING_ENCRYPTED = 15
    OUTGOING_ENCRYPTED_VERIFIED = 16


def decode_enum(enum_cls, value):
    """Map ``value`` onto ``enum_cls``; unknown or non-integer values become Raw."""
    if value is None:
        return None
    try:
        return enum_cls(int(value))
    except (ValueError, TypeError):
        try:
            return Raw(int(value))
        except (ValueError, TypeError):
            return Raw(-1)


def enum_name(value):
    if value is None:
        return None
    return value.name.lower() if isinstance(value, enum.Enum) else value.name


def _flag(value):
    """0/1 integer flag to bool; anything else is preserved as Raw."""
    if value is None:
        return None
    if value in (0, 1):
        return bool(value)
    return Raw(value if isinstance(value, int) else -1)


# -- timestamps ---------------------------------------------------------------

def decode_epoch_ms(n):
    """Milliseconds since the Unix epoch to an aware UTC datetime."""
    if n < 0:
        raise ValueError("epoch milliseconds must be non-negative")
    return _EPOCH + timedelta(milliseconds=int(n))


def decode_epoch_s(n):
    return _EPOCH + timedelta(seconds=int(n))


def format_utc(dt, millis=True):
    if millis:
        return dt.strftime("%Y-%m-%dT%H:%M:%S.") + f"{dt.microsecond // 1000:03d}Z"
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


def iso_epoch_ms(n):
    return format_utc(decode_epoch_ms(n))


def epoch_ms_in_range(n):
    """True for 13-digit values, the encoding seen in message rows."""
    return isinstance(n, int) and 10**12 <= n < 10**13


# -- message classification -----------------------------------------------

CHAT_TYPES = frozenset({0, 1, 8, 13, 14, 15, 16})
OUTGOING_TYPES = frozenset({0, 8, 15, 16})
INCOMING_TYPES = frozenset({1, 13, 14})
ENCRYPTED_TYPES = frozenset({13, 14, 15, 16})
VERIFIED_TYPES = frozenset({14, 16})
PRESENCE_TYPES = frozenset({2, 3, 4, 5})
OTR_STATE_TYPES = frozenset({9, 10, 11, 12})


@dataclass(frozen=True)
class MessageClass:
    category: str  # chat | notification | raw
    kind: str
    direction: str = None  # out | in
    encrypted: bool = False
    verified: bool = False
    deferred: bool = False


def classify_message(msg_type):
    """Category, direction and protection flags for a message ``type`` value."""
    t = int(msg_type) if msg_type is not None else -1
    if t in CHAT_TYPES:
        return MessageClass(
            category="chat",
            kind="message",
            direction="out" if t in OUTGOING_TYPES else "in",
            encrypted=t in ENCRYPTED_TYPES,
            verified=t in VERIFIED_TYPES,
            deferred=t == 8,
        )
    if t in PRESENCE_TYPES:
        return MessageClass("notification", "presence")
    if t in OTR_STATE_TYPES:
        return MessageClass("notification", "otr-state")
    if t == 6:
        return MessageClass("notification", "groupchat-conversion")
    if t == 7:
        return MessageClass("notification", "status")
    return MessageClass("raw", f"raw({t})")


# -- record types -----------------------------------------------------------

@dataclass(frozen=True)
class Account:
    id: int
    name: str
    provider_id: int
    username: str
    pw: str
    active: object
    locked: object
    keep_signed_in: object
    last_login_state: int

    def __repr__(self):
        return (
            f"Account(id={self.id!r}, name={self.name!r}, provider_id={self.provider_id!r}, "
            f"username={self.username!r}, pw=<redacted>)"
        )


@dataclass(frozen=True)
class AccountStatus:
    id: int
    account_id: int
    presence_status: object
    conn_status: object


@dataclass(frozen=True)
class Provider:
    id: int
    name: str
    fullname: str


@dataclass(frozen=True)
class ProviderSetting:
    id: int
    provider_id: int
    name: str
    value: str


@dataclass(frozen=True)
class Contact:
    id: int
    username: str
    nickname: str
    provider_id: int
    account_id: int
    contact_list_id: int
    type: object
    subscription_status: object
    subscription_type: object
    otr: object

    @property
    def is_group_chat(self):
        return self.type == ContactType.GROUP_CHAT


@dataclass(frozen=True)
class Presence:
    id: int
    contact_id: int
    client_type: object
    mode: object
    status: str


@dataclass(frozen=True)
class Avatar:
    id: int
    contact_username: str
    provider_id: int
    account_id: int
    hash: str
    data: bytes

    @property
    def computed_sha1(self):
        return hashlib.sha1(self.data).hexdigest() if self.data else None

    @property
    def hash_matches(self):
        """None when there is no picture data to check."""
        if not self.data:
            return None
        return (self.hash or "").strip().lower() == self.computed_sha1


@dataclass(frozen=True)
class ContactList:
    id: int
    name: str
    account_id: int
    provider_id: int


@dataclass(frozen=True)
class Message:
    id: int
    thread_id: int
    nickname: str
    body: str
    date_ms: int
    type: object
    err_code: int
    err_msg: str
    is_muc: object
    is_delivered: object
    mime_type: str
    origin: str

    @property
    def date_in_range(self):
        return epoch_ms_in_range(self.date_ms)

    @property
    def is_file(self):
        return self.mime_type is not None

    @property
    def vfs_path(self):
        """Virtual-disk path for file messages, without the ``vfs:`` scheme."""
        if not self.is_file or self.body is None:
            return None
        body = self.body
        return body[4:] if body.startswith("vfs:") else body

    @property
    def classification(self):
        return classify_message(int(self.type) if self.type is not None else None)


class VfsType(enum.Enum):
    DIR = "dir"
    BLOB = "blob"
    SYMLINK = "symlink"


@dataclass(frozen=True)
class VfsMeta:
    key: str
    type: object  # VfsType, or the raw text for unknown kinds
    ctime: int
    mtime: int
    atime: int
    size: int
    block_size: int


@dataclass(frozen=True)
class VfsBlock:
    key: str
    block_no: int
    data_block: bytes


@dataclass(frozen=True)
class ArtifactDb:
    accounts: tuple = ()
    account_status: tuple = ()
    providers: tuple = ()
    provider_settings: tuple = ()
    contacts: tuple = ()
    contact_lists: tuple = ()
    presence: tuple = ()
    avatars: tuple = ()
    messages: tuple = ()
    present_tables: tuple = ()
    missing_tables: tuple = ()

    def by_id(self, attr):
        return {r.id: r for r in getattr(self, attr)}


@dataclass(frozen=True)
class MediaDb:
    meta: tuple = ()
    blocks: tuple = ()

    def blocks_for(self, key):
        return sorted((b for b in self.blocks if b.key == key), key=lambda b: b.block_no)


@dataclass(frozen=True)
class DanglingRef:
    table: str
    row_id: int
    column: str
    value: object
    target: str


# -- loading ---------------------------------------------------------------

class _RowView:
    """Name-based, case-insensitive column access with fallbacks."""

    def __init__(self, columns, row):
        self._map = {c.lower(): v for c, v in zip(columns, row.values)}
        self.rowid = row.rowid

    def get(self, *names, default=None):
        for n in names:
            v = self._map.get(n.lower())
            if v is not None:
                return v
        return default

    def id(self):
        v = self.get("_id")
        return v if v is not None else self.rowid


def _rows(img, table):
    if not img.has_table(table):
        return None
    cols = img.columns(table)
    return [_RowView(cols, r) for r in img.scan_table(table)]


def _text(v):
    if v is None or isinstance(v, str):
        return v
    if isinstance(v, bytes):
        return v.decode("utf-8", "replace")
    return str(v)


def _load_messages(rows, origin):
    out = []
    for r in rows:
        out.append(Message(
            id=r.id(),
            thread_id=r.get("thread_id"),
            nickname=_text(r.get("nickname")),
            body=_text(r.get("body")),
            date_ms=r.get("date"),
            type=decode_enum(MessageType, r.get("type")),
            err_code=r.get("err_code"),
            err_msg=_text(r.get("err_msg")),
            is_muc=_flag(r.get("is_muc")),
            is_delivered=_flag(r.get("is_delivered")),
            mime_type=_text(r.get("mime_type")),
            origin=origin,
        ))
    return out


def load_artifact_db(img):
    """Decode the forensic tables of a decrypted main database image."""
    present = [t for t in FORENSIC_TABLES if img.has_table(t)]
    if not present:
        raise NoForensicTables("image contains none of the ChatSecure forensic tables")
    missing = tuple(t for t in FORENSIC_TABLES if t not in present)
    if missing:
        log.info("missing forensic tables: %s", ", ".join(missing))

    def rows(name):
        return _rows(img, name) or []

    accounts = tuple(
        Account(
            id=r.id(), name=_text(r.get("name")), provider_id=r.get("provider"),
            username=_text(r.get("username")), pw=_text(r.get("pw")),
            active=_flag(r.get("active")), locked=_flag(r.get("locked")),
            keep_signed_in=_flag(r.get("keep_signed_in")),
            last_login_state=r.get("last_login_state"),
        )
        for r in rows("accounts")
    )
    account_status = tuple(
        AccountStatus(
            id=r.id(), account_id=r.get("account"),
            presence_status=decode_enum(PresenceStatus, r.get("presenceStatus")),
            conn_status=decode_enum(ConnStatus, r.get("connStatus")),
        )
        for r in rows("accountStatus")
    )
    providers = tuple(
        Provider(id=r.id(), name=_text(r.get("name")), fullname=_text(r.get("fullname")))
        for r in rows("providers")
    )
    settings = tuple(
        ProviderSetting(
            id=r.id(), provider_id=r.get("provider"), name=_text(r.get("name")),
            value=_text(r.get("value")),
        )
        for r in rows("providerSettings")
    )
    contacts = tuple(
        Contact(
            id=r.id(), username=_text(r.get("username")), nickname=_text(r.get("nickname")),
            provider_id=r.get("provider"), account_id=r.get("account"),
            contact_list_id=r.get("contactList"),
            type=decode_enum(ContactType, r.get("type")),
            subscription_status=decode_enum(SubscriptionStatus, r.get("subscriptionStatus")),
            subscription_type=decode_enum(SubscriptionType, r.get("subscriptionType")),
            otr=decode_enum(OtrStatus, r.get("otr")),
        )
        for r in rows("contacts")
    )
    contact_lists = tuple(
        ContactList(
            id=r.id(), name=_text(r.get("name")), account_id=r.get("account"),
            provider_id=r.get("provider"),
        )
        for r in rows("contactList")
    )
    presence = tuple(
        Presence(
            id=r.id(), contact_id=r.get("contact_id"),
            client_type=decode_enum(ClientType, r.get("client_type")),
            mode=decode_enum(PresenceStatus, r.get("mode")),
            status=_text(r.get("status")),
        )
        for r in rows("presence")
    )
    avatars = tuple(
        Avatar(
            id=r.id(), contact_username=_text(r.get("contact")),
            provider_id=r.get("provider", "provider_id"),
            account_id=r.get("account", "account_id"), hash=_text(r.get("hash")),
            data=bytes(r.get("data")) if isinstance(r.get("data"), (bytes, bytearray)) else b"",
        )
        for r in rows("avatars")
    )
    messages = tuple(
        _load_messages(rows("messages"), ORIGIN_MESSAGES)
        + _load_messages(rows("inMemoryMessages"), ORIGIN_IN_MEMORY)
    )
    for m in messages:
        if m.date_ms is not None and not m.date_in_range:
            log.warning("%s row %s: date %r is not 13-digit epoch milliseconds", m.origin, m.id, m.date_ms)
    for a in avatars:
        if a.hash_matches is False:
            log.warning("avatar %s: stored hash does not match SHA-1 of picture data", a.id)
    return ArtifactDb(
        accounts=accounts, account_status=account_status, providers=providers,
        provider_settings=settings, contacts=contacts, contact_lists=contact_lists,
        presence=presence, avatars=avatars, messages=messages,
        present_tables=tuple(present), missing_tables=missing,
    )


def load_media_db(img):
    """Decode ``meta_data`` and ``value_data`` of a decrypted virtual-disk image."""
    if not any(img.has_table(t) for t in MEDIA_TABLES):
        raise NoForensicTables("image contains neither meta_data nor value_data")
    meta = []
    for r in _rows(img, "meta_data") or []:
        raw_type = _text(r.get("type"))
        try:
            vtype = VfsType(raw_type)
        except ValueError:
            vtype = raw_type
        meta.append(VfsMeta(
            key=_text(r.get("key")), type=vtype, ctime=r.get("ctime"), mtime=r.get("mtime"),
            atime=r.get("atime"), size=r.get("size", default=0),
            block_size=r.get("block_size", default=0),
        ))
    blocks = []
    for r in _rows(img, "value_data") or []:
        data = r.get("data_block", default=b"")
        if isinstance(data, str):
            data = data.encode("utf-8")
        blocks.append(VfsBlock(key=_text(r.get("key")), block_no=r.get("block_no"), data_block=bytes(data)))
    return MediaDb(meta=tuple(meta), blocks=tuple(blocks))


def audit_references(db):
    """Foreign keys that do not resolve, as a list of DanglingRef."""
    accounts = {a.id for a in db.accounts}
    providers = {p.id for p in db.providers}
    contacts = {c.id for c in db.contacts}
    lists = {c.id for c in db.contact_lists}
    usernames = {c.username for c in db.contacts}
    checks = [
        ("accounts", db.accounts, "provider", "provider_id", providers, "providers"),
        ("accountStatus", db.account_status, "account", "account_id", accounts, "accounts"),
        ("providerSettings", db.provider_settings, "provider", "provider_id", providers, "providers"),
        ("contacts", db.contacts, "provider", "provider_id", providers, "providers"),
        ("contacts", db.contacts, "account", "account_id", accounts, "accounts"),
        ("contacts", db.contacts, "contactList", "contact_list_id", lists, "contactList"),
        ("contactList", db.contact_lists, "account", "account_id", accounts, "accounts"),
        ("contactList", db.contact_lists, "provider", "provider_id", providers, "providers"),
        ("presence", db.presence, "contact_id", "contact_id", contacts, "contacts"),
        ("avatars", db.avatars, "contact", "contact_username", usernames, "contacts"),
        ("avatars", db.avatars, "account", "account_id", accounts, "accounts"),
        ("avatars", db.avatars, "provider", "provider_id", providers, "providers"),
    ]
    out = []
    for table, recs, column, attr, targets, target_name in checks:
        for rec in recs:
            v = getattr(rec, attr)
            if v is not None and v not in targets:
                out.append(DanglingRef(table, rec.id, column, v, target_name))
    for m in db.messages:
        if m.thread_id is not None and m.thread_id not in contacts:
            out.append(DanglingRef(m.origin, m.id, "thread_id", m.thread_id, "contacts"))
    return out
