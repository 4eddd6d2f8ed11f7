import sqlite3
from datetime import datetime, timezone

import pytest

from chatsecure_forensics.artifact_model import (
    FORENSIC_TABLES, ContactType, MessageType, PresenceStatus, Raw, VfsType,
    audit_references, classify_message, decode_enum, decode_epoch_ms, epoch_ms_in_range,
    iso_epoch_ms, load_artifact_db, load_media_db,
)
from chatsecure_forensics.errors import NoForensicTables
from chatsecure_forensics.sqlite_reader import open_image
from conftest import decrypt_fixture


def test_epoch_decoding_against_datetime():
    for ms in (1443691955617, 1443678380850, 0, 10**12, 10**13 - 1):
        expect = datetime.fromtimestamp(ms / 1000, tz=timezone.utc)
        assert abs((decode_epoch_ms(ms) - expect).total_seconds()) < 1e-3
    with pytest.raises(ValueError):
        decode_epoch_ms(-1)


def test_iso_rendering():
    assert iso_epoch_ms(1443691955617) == "2015-10-01T09:32:35.617Z"
    assert iso_epoch_ms(1443678380850) == "2015-10-01T05:46:20.850Z"
    assert iso_epoch_ms(0) == "1970-01-01T00:00:00.000Z"


def test_epoch_range_check():
    assert epoch_ms_in_range(1443691955617)
    assert not epoch_ms_in_range(1443691955)  # seconds, not milliseconds
    assert not epoch_ms_in_range("1443691955617")


def test_enum_decoding_keeps_unknown_values():
    assert decode_enum(ContactType, 2) is ContactType.GROUP_CHAT
    assert decode_enum(PresenceStatus, 42) == Raw(42)
    assert decode_enum(PresenceStatus, 42).name == "raw(42)"
    assert decode_enum(MessageType, None) is None
    assert decode_enum(MessageType, "x") == Raw(-1)


@pytest.mark.parametrize("t,category,direction,encrypted,verified,deferred", [
    (0, "chat", "out", False, False, False),
    (1, "chat", "in", False, False, False),
    (8, "chat", "out", False, False, True),
    (13, "chat", "in", True, False, False),
    (14, "chat", "in", True, True, False),
    (15, "chat", "out", True, False, False),
    (16, "chat", "out", True, True, False),
])
def test_chat_classification(t, category, direction, encrypted, verified, deferred):
    c = classify_message(t)
    assert (c.category, c.direction, c.encrypted, c.verified, c.deferred) == (
        category, direction, encrypted, verified, deferred)


def test_notification_and_raw_classification():
    assert {classify_message(t).kind for t in (2, 3, 4, 5)} == {"presence"}
    assert {classify_message(t).kind for t in (9, 10, 11, 12)} == {"otr-state"}
    assert classify_message(6).category == "notification"
    assert classify_message(7).kind == "status"
    assert classify_message(99).kind == "raw(99)"
    assert classify_message(None).category == "raw"


@pytest.fixture(scope="module")
def fig6(fixture_set):
    imps, media = decrypt_fixture(fixture_set("fig6"))
    return load_artifact_db(imps), load_media_db(media), imps


def test_tables_present(fig6):
    db, _, img = fig6
    assert set(db.present_tables) == set(FORENSIC_TABLES) and db.missing_tables == ()
    assert len(img.tables) == 21  # includes sqlite_sequence


def test_accounts_decoded(fig6):
    db = fig6[0]
    acc = db.by_id("accounts")
    assert acc[1].username == "CS.test.user" and acc[1].pw.startswith("X-GOOGLE-TOKEN")
    assert acc[2].pw == "#t&st.p@sswd!"
    assert "#t&st" not in repr(acc[2])
    assert {s.presence_status for s in db.account_status} == {PresenceStatus.OFFLINE}


def test_contacts_presence_avatars(fig6):
    db = fig6[0]
    contacts = db.by_id("contacts")
    assert len(contacts) == 9 and contacts[9].is_group_chat
    assert contacts[2].nickname == "Second"
    modes = {p.contact_id: p.mode for p in db.presence}
    assert modes[8] == PresenceStatus.AVAILABLE
    assert all(m == PresenceStatus.OFFLINE for c, m in modes.items() if c != 8)
    assert 9 not in modes
    (av,) = db.avatars
    assert av.contact_username == "test2chatsecure@chatme.im" and av.hash_matches


def test_messages_both_tables(fig6):
    db = fig6[0]
    origins = [m.origin for m in db.messages]
    assert origins.count("messages") == 4 and origins.count("inMemoryMessages") == 7
    f = [m for m in db.messages if m.is_file]
    assert len(f) == 1 and f[0].vfs_path == "/2/download/58278" and f[0].mime_type == "image/jpeg"


def test_media_loaded(fig6):
    media = fig6[1]
    blobs = [m for m in media.meta if m.type == VfsType.BLOB]
    assert [(b.key, b.size, b.block_size) for b in blobs] == [("/2/download/58278", 143584, 8192)]
    assert len(media.blocks_for("/2/download/58278")) == 18


def test_audit_references_finds_dangling(tmp_path):
    p = tmp_path / "d.db"
    con = sqlite3.connect(p)
    con.execute("CREATE TABLE accounts (_id INTEGER PRIMARY KEY, name TEXT, provider INTEGER)")
    con.execute("CREATE TABLE contacts (_id INTEGER PRIMARY KEY, username TEXT, account INTEGER, provider INTEGER, contactList INTEGER)")
    con.execute("CREATE TABLE messages (_id INTEGER PRIMARY KEY, thread_id INTEGER, date INTEGER, type INTEGER)")
    con.execute("INSERT INTO accounts VALUES (1, 'a', 1)")
    con.execute("INSERT INTO contacts VALUES (1, 'u', 5, 1, 1)")
    con.execute("INSERT INTO messages VALUES (1, 77, 1443691955617, 1)")
    con.commit()
    con.close()
    db = load_artifact_db(open_image(str(p)))
    refs = {(r.table, r.column, r.value) for r in audit_references(db)}
    assert ("contacts", "account", 5) in refs
    assert ("messages", "thread_id", 77) in refs
    assert "providers" in db.missing_tables


def test_no_forensic_tables(tmp_path):
    p = tmp_path / "x.db"
    con = sqlite3.connect(p)
    con.execute("CREATE TABLE other (a)")
    con.commit()
    con.close()
    with pytest.raises(NoForensicTables):
        load_artifact_db(open_image(str(p)))
    with pytest.raises(NoForensicTables):
        load_media_db(open_image(str(p)))


def test_unknown_values_survive(tmp_path):
    p = tmp_path / "u.db"
    con = sqlite3.connect(p)
    con.execute("CREATE TABLE messages (_id INTEGER PRIMARY KEY, thread_id INTEGER, date INTEGER, type INTEGER, is_muc INTEGER)")
    con.execute("INSERT INTO messages VALUES (1, 1, 1443691955, 42, 7)")
    con.commit()
    con.close()
    (m,) = load_artifact_db(open_image(str(p))).messages
    assert m.type == Raw(42) and m.is_muc == Raw(7) and not m.date_in_range
