"""Deterministic fixture generation: prefs XML, encrypted main database, encrypted virtual disk, memory dump.

The ``fig3``..``fig6`` scenarios carry the accounts, contacts, messages and
file transfer of the published walkthrough; each one includes the previous.
Rows the walkthrough does not show (most contact usernames, the filler
messages) are invented but consistent with it. ``random`` scenarios are
seeded and byte-reproducible.
"""

import hashlib
import json
import os
import random
import sqlite3
import tempfile
from dataclasses import dataclass, field

from .cipher_pages import CipherProfile, encrypt_database
from .secret_vault import PREFS_FILENAME, textual_media_key, wrap_database_key, write_serialized_secret
from .vfs_store import split_blocks
from .memscan import DEFAULT_SIGNATURE

SCENARIOS = ("fig3", "fig4", "fig5", "fig6", "random")
DEFAULT_PASSPHRASE = "thisisthepassword2016"
WALKTHROUGH_KEY = bytes.fromhex("629B8DBF3F26131B2FB69619FD4CF992A1D2D01296B573BA3459FAFF8A12CD89")
BLOCK_SIZE = 8192

IMPSENC_SCHEMA = {
    "android_metadata": "CREATE TABLE android_metadata (locale TEXT)",
    "providers": "CREATE TABLE providers (_id INTEGER PRIMARY KEY, name TEXT, fullname TEXT, "
                 "category TEXT, signup_url TEXT)",
    "providerSettings": "CREATE TABLE providerSettings (_id INTEGER PRIMARY KEY, provider INTEGER, "
                        "name TEXT, value TEXT, UNIQUE (provider, name))",
    "accounts": "CREATE TABLE accounts (_id INTEGER PRIMARY KEY, name TEXT, provider INTEGER, "
                "username TEXT, pw TEXT, active INTEGER NOT NULL DEFAULT 0, "
                "locked INTEGER NOT NULL DEFAULT 0, keep_signed_in INTEGER NOT NULL DEFAULT 0, "
                "last_login_state INTEGER NOT NULL DEFAULT 0, UNIQUE (provider, username))",
    "accountStatus": "CREATE TABLE accountStatus (_id INTEGER PRIMARY KEY, "
                     "account INTEGER UNIQUE ON CONFLICT REPLACE, presenceStatus INTEGER, "
                     "connStatus INTEGER)",
    "contactList": "CREATE TABLE contactList (_id INTEGER PRIMARY KEY AUTOINCREMENT, name TEXT, "
                   "provider INTEGER, account INTEGER)",
    "contacts": "CREATE TABLE contacts (_id INTEGER PRIMARY KEY AUTOINCREMENT, username TEXT, "
                "nickname TEXT, provider INTEGER, account INTEGER, contactList INTEGER, type INTEGER, "
                "subscriptionStatus INTEGER, subscriptionType INTEGER, qc INTEGER, otr INTEGER, "
                "rejected INTEGER)",
    "presence": "CREATE TABLE presence (_id INTEGER PRIMARY KEY AUTOINCREMENT, "
                "contact_id INTEGER UNIQUE, jid_resource TEXT, client_type INTEGER, "
                "priority INTEGER, mode INTEGER, status TEXT)",
    "avatars": "CREATE TABLE avatars (_id INTEGER PRIMARY KEY, contact TEXT, provider INTEGER, "
               "account INTEGER, hash TEXT, data BLOB, UNIQUE (account, contact))",
    "chats": "CREATE TABLE chats (contact_id INTEGER PRIMARY KEY, jid_resource TEXT, "
             "groupchat INTEGER, last_unread_message TEXT, last_message_date INTEGER, "
             "unsent_composed_message TEXT, shortcut INTEGER)",
    "messages": "CREATE TABLE messages (_id INTEGER PRIMARY KEY, thread_id INTEGER, nickname TEXT, "
                "body TEXT, date INTEGER, type INTEGER, err_code INTEGER NOT NULL DEFAULT 0, "
                "err_msg TEXT, packet_id TEXT UNIQUE, is_muc INTEGER, show_ts INTEGER, "
                "is_delivered INTEGER, mime_type TEXT DEFAULT NULL)",
    "inMemoryMessages": "CREATE TABLE inMemoryMessages (_id INTEGER PRIMARY KEY, thread_id INTEGER, "
                        "nickname TEXT, body TEXT, date INTEGER, type INTEGER, "
                        "err_code INTEGER NOT NULL DEFAULT 0, err_msg TEXT, packet_id TEXT UNIQUE, "
                        "is_muc INTEGER, show_ts INTEGER, is_delivered INTEGER, "
                        "mime_type TEXT DEFAULT NULL)",
    "invitations": "CREATE TABLE invitations (_id INTEGER PRIMARY KEY, providerId INTEGER, "
                   "accountId INTEGER, inviteId TEXT, sender TEXT, groupName TEXT, note TEXT, "
                   "status INTEGER)",
    "groupMembers": "CREATE TABLE groupMembers (_id INTEGER PRIMARY KEY, groupId INTEGER, "
                    "username TEXT, nickname TEXT)",
    "outgoingRmqMessages": "CREATE TABLE outgoingRmqMessages (_id INTEGER PRIMARY KEY, rmq_id INTEGER, "
                           "type INTEGER, ts INTEGER, data TEXT)",
    "lastrmqid": "CREATE TABLE lastrmqid (_id INTEGER PRIMARY KEY, rmq_id INTEGER)",
    "s2dRmqIds": "CREATE TABLE s2dRmqIds (_id INTEGER PRIMARY KEY, rmq_id INTEGER)",
    "brandingResources": "CREATE TABLE brandingResources (_id INTEGER PRIMARY KEY, provider_id INTEGER, "
                         "app_res_id INTEGER, plugin_res_id INTEGER)",
    "sessionCookies": "CREATE TABLE sessionCookies (_id INTEGER PRIMARY KEY, provider INTEGER, "
                      "account INTEGER, name TEXT, value TEXT)",
    "contactsEtag": "CREATE TABLE contactsEtag (_id INTEGER PRIMARY KEY, etag TEXT, otr_etag TEXT, "
                    "account INTEGER UNIQUE)",
}

MEDIA_SCHEMA = {
    "meta_data": "CREATE TABLE meta_data(key text, type text, inode integer, uid integer, gid integer, "
                 "mode integer, acl text, attribute text, atime integer, mtime integer, ctime integer, "
                 "size integer, block_size integer, primary key (key), unique(key))",
    "value_data": "CREATE TABLE value_data (key text, block_no integer, data_block blob, "
                  "unique(key, block_no))",
}


@dataclass
class Scenario:
    name: str
    key: bytes
    tables: dict = field(default_factory=dict)  # table -> list of row dicts
    media: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)  # vfs path -> content

    def rows(self, table):
        return self.tables.setdefault(table, [])


def _pseudo_jpeg(rng, size):
    if size <= 0:
        return b""
    body = rng.randbytes(max(0, size - 4))
    return (b"\xff\xd8\xff\xe0" + body)[:size]


def _message(_id, thread, body, date, mtype, delivered, is_muc=0, nickname="", mime=None):
    return {
        "_id": _id, "thread_id": thread, "nickname": nickname, "body": body, "date": date,
        "type": mtype, "err_code": 0, "err_msg": None, "packet_id": f"pkt{_id:04d}-{date}",
        "is_muc": is_muc, "show_ts": 0, "is_delivered": delivered, "mime_type": mime,
    }


def _fig3(sc):
    sc.rows("providers").extend([
        {"_id": 1, "name": "GTalk", "fullname": "Google Talk", "category": "im", "signup_url": None},
        {"_id": 2, "name": "ChatMe", "fullname": "ChatMe XMPP", "category": "im", "signup_url": None},
    ])
    sc.rows("providerSettings").extend([
        {"_id": 28, "provider": 1, "name": "account-service", "value": "GTalk"},
        {"_id": 29, "provider": 1, "name": "account-domain", "value": "gmail.com"},
        {"_id": 30, "provider": 1, "name": "account-server", "value": "talk.google.com"},
        {"_id": 31, "provider": 2, "name": "account-service", "value": "ChatMe"},
        {"_id": 32, "provider": 2, "name": "account-domain", "value": "chatme.im"},
        {"_id": 33, "provider": 2, "name": "account-server", "value": "chatme.im"},
    ])
    sc.rows("accounts").extend([
        {"_id": 1, "name": "chat.secure.user", "provider": 1, "username": "CS.test.user",
         "pw": "X-GOOGLE-TOKEN:DQAAAOoAAAB1f8s2k", "active": 1, "locked": 0,
         "keep_signed_in": 1, "last_login_state": 1},
        {"_id": 2, "name": "test1chatsecure", "provider": 2, "username": "test1chatsecure",
         "pw": "#t&st.p@sswd!", "active": 1, "locked": 0, "keep_signed_in": 1,
         "last_login_state": 1},
    ])
    sc.rows("accountStatus").extend([
        {"_id": 1, "account": 1, "presenceStatus": 0, "connStatus": 0},
        {"_id": 2, "account": 2, "presenceStatus": 0, "connStatus": 0},
    ])


AVATAR_SEED = "fig4-avatar"


def _fig4(sc):
    _fig3(sc)
    sc.rows("contactList").extend([
        {"_id": 1, "name": "Contacts", "provider": 1, "account": 1},
        {"_id": 2, "name": "Contacts", "provider": 2, "account": 2},
    ])
    people = [
        (1, "cs.buddy.first@gmail.com", "First", 1),
        (2, "cs.buddy.second@gmail.com", "Second", 1),
        (3, "cs.buddy.third@gmail.com", "Third", 1),
        (4, "cs.buddy.fourth@gmail.com", "Fourth", 1),
        (5, "cs.buddy.fifth@gmail.com", "Fifth", 1),
        (6, "test3chatsecure@chatme.im", "test3chatsecure", 2),
        (7, "test4chatsecure@chatme.im", "test4chatsecure", 2),
        (8, "test2chatsecure@chatme.im", "test2chatsecure", 2),
    ]
    for _id, user, nick, acc in people:
        sc.rows("contacts").append({
            "_id": _id, "username": user, "nickname": nick, "provider": acc, "account": acc,
            "contactList": acc, "type": 0, "subscriptionStatus": 0, "subscriptionType": 4,
            "qc": 0, "otr": 0, "rejected": 0,
        })
        sc.rows("presence").append({
            "_id": _id, "contact_id": _id, "jid_resource": None,
            "client_type": 2 if _id == 8 else 0, "priority": 0,
            "mode": 5 if _id == 8 else 0, "status": "",
        })
    sc.rows("contacts").append({
        "_id": 9, "username": "grptest1@conference.chatme.im", "nickname": "grptest1",
        "provider": 1, "account": 1, "contactList": 1, "type": 2, "subscriptionStatus": 0,
        "subscriptionType": 0, "qc": 0, "otr": 0, "rejected": 0,
    })
    picture = _pseudo_jpeg(random.Random(AVATAR_SEED), 2048)
    sc.rows("avatars").append({
        "_id": 1, "contact": "test2chatsecure@chatme.im", "provider": 2, "account": 2,
        "hash": hashlib.sha1(picture).hexdigest(), "data": picture,
    })


def _fig5(sc):
    _fig4(sc)
    sc.rows("messages").extend([
        _message(1, 2, "Message no. 17", 1443678380850, 8, 0),
        _message(2, 2, "Message no. 16", 1443678301240, 1, 0),
        _message(3, 9, "Group chat message no. 1", 1443692151420, 0, 1, is_muc=1, nickname="csuser"),
        _message(4, 9, "Group chat message no. 2", 1443692163005, 0, 1, is_muc=1, nickname="csuser"),
    ])
    sc.rows("inMemoryMessages").extend([
        _message(1, 2, "Message 1", 1443691955617, 15, 1),
        _message(2, 2, "Message 2", 1443691964099, 13, 0),
        _message(3, 2, "Message 3", 1443691978311, 15, 1),
        _message(4, 2, "Message 4", 1443691990532, 13, 0),
        _message(5, 7, "Hello from test1chatsecure", 1443692010870, 15, 1),
        _message(6, 7, "Reply to test1chatsecure", 1443692031245, 13, 0),
    ])
    sc.rows("chats").extend([
        {"contact_id": 2, "jid_resource": None, "groupchat": 0, "last_unread_message": None,
         "last_message_date": 1443691990532, "unsent_composed_message": None, "shortcut": 0},
        {"contact_id": 9, "jid_resource": None, "groupchat": 1, "last_unread_message": None,
         "last_message_date": 1443692163005, "unsent_composed_message": None, "shortcut": 0},
    ])


FIG6_PATH = "/2/download/58278"
FIG6_SIZE = 143584
FIG6_DATE_MS = 1443692083731
FIG6_SEED = "fig6-file"


def _vfs_dirs(sc, path, t):
    parts = [p for p in path.split("/") if p][:-1]
    cur = ""
    keys = {m["key"] for m in sc.media.setdefault("meta_data", [])}
    for p in [""] + parts:
        cur = cur + "/" + p if p else "/"
        cur = cur.replace("//", "/")
        if cur not in keys:
            sc.media["meta_data"].append(_meta_row(cur, "dir", t, 0))
            keys.add(cur)


def _meta_row(key, kind, t, size, block_size=BLOCK_SIZE):
    return {
        "key": key, "type": kind, "inode": None, "uid": 0, "gid": 0,
        "mode": 0o40755 if kind == "dir" else 0o100644, "acl": None, "attribute": None,
        "atime": t, "mtime": t, "ctime": t, "size": size, "block_size": block_size,
    }


def add_vfs_file(sc, path, content, t, block_size=BLOCK_SIZE):
    _vfs_dirs(sc, path, t)
    sc.media["meta_data"].append(_meta_row(path, "blob", t, len(content), block_size))
    vd = sc.media.setdefault("value_data", [])
    for i, blk in enumerate(split_blocks(content, block_size)):
        vd.append({"key": path, "block_no": i, "data_block": blk})
    sc.files[path] = content


def _fig6(sc):
    _fig5(sc)
    sc.rows("inMemoryMessages").append(
        _message(7, 2, "vfs:" + FIG6_PATH, FIG6_DATE_MS, 13, 0, mime="image/jpeg")
    )
    content = _pseudo_jpeg(random.Random(FIG6_SEED), FIG6_SIZE)
    add_vfs_file(sc, FIG6_PATH, content, FIG6_DATE_MS // 1000)


_FIGS = {"fig3": _fig3, "fig4": _fig4, "fig5": _fig5, "fig6": _fig6}


def _random(sc, rng):
    n_acc = rng.randint(1, 3)
    cid = 0
    mid = {"messages": 0, "inMemoryMessages": 0}
    base = 1443600000000 + rng.randrange(10**9)
    for a in range(1, n_acc + 1):
        domain = f"srv{a}.example.org"
        sc.rows("providers").append({"_id": a, "name": f"Provider{a}", "fullname": f"Provider {a}",
                                     "category": "im", "signup_url": None})
        sc.rows("providerSettings").append({"_id": 10 * a, "provider": a, "name": "account-domain", "value": domain})
        sc.rows("accounts").append({"_id": a, "name": f"local{a}", "provider": a, "username": f"user{a}",
                                    "pw": f"pw-{rng.randrange(10**6)}", "active": rng.randint(0, 1),
                                    "locked": 0, "keep_signed_in": rng.randint(0, 1), "last_login_state": 0})
        if rng.random() < 0.8:
            sc.rows("accountStatus").append({"_id": a, "account": a, "presenceStatus": rng.randint(0, 5),
                                             "connStatus": rng.randint(0, 3)})
        sc.rows("contactList").append({"_id": a, "name": "Contacts", "provider": a, "account": a})
        for _ in range(rng.randint(2, 6)):
            cid += 1
            ctype = rng.choice([0, 0, 0, 1, 2, 3, 4, 5, 9])
            sc.rows("contacts").append({
                "_id": cid, "username": f"buddy{cid}@{domain}", "nickname": f"Buddy {cid}",
                "provider": a, "account": a, "contactList": a, "type": ctype,
                "subscriptionStatus": rng.randint(0, 2), "subscriptionType": rng.randint(0, 5),
                "qc": 0, "otr": rng.randint(0, 3), "rejected": 0,
            })
            if ctype != 2 and rng.random() < 0.8:
                sc.rows("presence").append({"_id": cid, "contact_id": cid, "jid_resource": None,
                                            "client_type": rng.randint(0, 2), "priority": 0,
                                            "mode": rng.randint(0, 5), "status": rng.choice(["", "busy", "here"])})
            if rng.random() < 0.3:
                pic = _pseudo_jpeg(rng, rng.randint(100, 120000))
                sc.rows("avatars").append({"_id": cid, "contact": f"buddy{cid}@{domain}", "provider": a,
                                           "account": a, "hash": hashlib.sha1(pic).hexdigest(), "data": pic})
    for _ in range(rng.randint(5, 40)):
        table = rng.choice(["messages", "inMemoryMessages"])
        mid[table] += 1
        thread = rng.randint(1, cid + 1)  # cid + 1 is a dangling thread
        mtype = rng.choice(list(range(17)) + [42])
        date = base + rng.randrange(10**8)
        if rng.random() < 0.15:
            date = base  # forces timestamp ties across tables
        sc.rows(table).append(_message(mid[table], thread, f"msg {rng.randrange(10**6)}", date, mtype,
                                       rng.randint(0, 1), is_muc=int(rng.random() < 0.1)))
    t = base // 1000
    for i in range(rng.randint(0, 3)):
        size = rng.choice([0, BLOCK_SIZE, 3 * BLOCK_SIZE, rng.randint(1, BLOCK_SIZE - 1),
                           rng.randint(1, 40 * BLOCK_SIZE)])
        path = f"/{rng.randint(1, 9)}/download/{rng.randrange(10**5)}_{i}"
        table = rng.choice(["messages", "inMemoryMessages"])
        mid[table] += 1
        sc.rows(table).append(_message(mid[table], rng.randint(1, cid), "vfs:" + path,
                                       base + rng.randrange(10**8), rng.choice([0, 1, 13, 15]), 0,
                                       mime=rng.choice(["image/jpeg", "audio/ogg", "application/pdf"])))
        add_vfs_file(sc, path, rng.randbytes(size), t)
    if rng.random() < 0.5:
        add_vfs_file(sc, f"/orphan/{rng.randrange(10**5)}", rng.randbytes(rng.randint(1, 20000)), t)


def build_scenario(name, seed=0):
    if name == "random":
        rng = random.Random(seed)
        sc = Scenario(name=f"random-{seed}", key=rng.randbytes(32))
        _random(sc, rng)
    elif name in _FIGS:
        sc = Scenario(name=name, key=WALKTHROUGH_KEY)
        _FIGS[name](sc)
    else:
        raise ValueError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    if not any(m["key"] == "/" for m in sc.media.get("meta_data", [])):
        sc.media.setdefault("meta_data", []).insert(0, _meta_row("/", "dir", 1443600000, 0))
    sc.media.setdefault("value_data", [])
    return sc


def build_plain_db(schema, tables, page_size):
    """Create a plaintext SQLite image with the stdlib engine and return its bytes."""
    fd, path = tempfile.mkstemp(suffix=".db")
    os.close(fd)
    os.unlink(path)
    try:
        con = sqlite3.connect(path)
        try:
            con.execute(f"PRAGMA page_size = {int(page_size)}")
            con.execute("PRAGMA secure_delete = ON")  # no stale residue in unallocated space
            for name, sql in schema.items():
                con.execute(sql)
            for name in schema:
                for row in tables.get(name, []):
                    cols = list(row)
                    con.execute(
                        f'INSERT INTO "{name}" ({", ".join(chr(34) + c + chr(34) for c in cols)}) '
                        f'VALUES ({", ".join("?" for _ in cols)})',
                        [row[c] for c in cols],
                    )
            con.commit()
        finally:
            con.close()
        with open(path, "rb") as fh:
            return fh.read()
    finally:
        if os.path.exists(path):
            os.unlink(path)


def make_memory_dump(passphrase, size, rng, decoys=5, traps=3, copies=2, sig=DEFAULT_SIGNATURE):
    """Random background with the passphrase planted ``copies`` times after the signature.

    Returns ``(dump_bytes, planted)`` where ``planted`` records every planted
    offset (signature start) by kind.
    """
    buf = bytearray(rng.randbytes(size))
    taken = []

    def place(length):
        for _ in range(1000):
            off = rng.randrange(0, size - length)
            if all(off + length <= s or off >= e for s, e in taken):
                taken.append((off, off + length))
                return off
        raise ValueError("dump too small for the planted records")

    def plant(payload):
        off = place(len(sig) + len(payload))
        buf[off:off + len(sig)] = sig
        buf[off + len(sig):off + len(sig) + len(payload)] = payload
        return off

    planted = {"passphrase": [], "decoys": {}, "traps": []}
    enc = passphrase.encode("utf-16-le") + b"\x00\x00"
    for _ in range(copies):
        planted["passphrase"].append(plant(enc))
    for i in range(decoys):
        text = f"decoy-string-{i}-{rng.randrange(10**6)}"
        planted["decoys"][text] = plant(text.encode("utf-16-le") + b"\x00\x00")
    for i in range(traps):
        junk = bytes([0x01, 0x00, 0x07, 0x00, 0x1B, 0x00]) if i % 2 == 0 else b"\x00\xd8\x41\x00\x00\x00"
        planted["traps"].append(plant(junk))
    return bytes(buf), planted


def make_fixture(scenario, out_dir, passphrase=DEFAULT_PASSPHRASE, seed=0, ic=100,
                 dump_size=0, impsenc_page_size=1024, media_page_size=8192):
    """Write prefs XML, impsenc.db, media.db (and optionally a dump) under ``out_dir``.

    Returns the fixture description also written to ``fixture.json``.
    """
    sc = build_scenario(scenario, seed)
    rng = random.Random(f"{sc.name}:{seed}:{passphrase}")
    os.makedirs(os.path.join(out_dir, "shared_prefs"), exist_ok=True)
    os.makedirs(os.path.join(out_dir, "databases"), exist_ok=True)
    os.makedirs(os.path.join(out_dir, "app_vfs"), exist_ok=True)

    secret = wrap_database_key(sc.key, passphrase, ic=ic, rng=rng)
    prefs_path = os.path.join(out_dir, "shared_prefs", PREFS_FILENAME)
    with open(prefs_path, "wb") as fh:
        fh.write(write_serialized_secret(secret))

    imps_plain = build_plain_db(IMPSENC_SCHEMA, sc.tables, impsenc_page_size)
    imps = encrypt_database(imps_plain, CipherProfile.impsenc(sc.key, page_size=impsenc_page_size), rng)
    imps_path = os.path.join(out_dir, "databases", "impsenc.db")
    with open(imps_path, "wb") as fh:
        fh.write(imps.raw)

    media_plain = build_plain_db(MEDIA_SCHEMA, sc.media, media_page_size)
    media = encrypt_database(media_plain, CipherProfile.media(sc.key, page_size=media_page_size), rng)
    media_path = os.path.join(out_dir, "app_vfs", "media.db")
    with open(media_path, "wb") as fh:
        fh.write(media.raw)

    info = {
        "scenario": sc.name,
        "seed": seed,
        "passphrase": passphrase,
        "key_hex": sc.key.hex(),
        "media_key": textual_media_key(sc.key),
        "ic": ic,
        "impsenc_page_size": impsenc_page_size,
        "media_page_size": media_page_size,
        "prefs": os.path.relpath(prefs_path, out_dir),
        "impsenc": os.path.relpath(imps_path, out_dir),
        "media": os.path.relpath(media_path, out_dir),
        "files": {p: hashlib.sha256(c).hexdigest() for p, c in sorted(sc.files.items())},
    }
    if dump_size:
        dump, planted = make_memory_dump(passphrase, dump_size, rng)
        dump_path = os.path.join(out_dir, "memory.raw")
        with open(dump_path, "wb") as fh:
            fh.write(dump)
        info["dump"] = os.path.relpath(dump_path, out_dir)
        info["planted"] = planted
    with open(os.path.join(out_dir, "fixture.json"), "w", encoding="utf-8") as fh:
        json.dump(info, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return info
