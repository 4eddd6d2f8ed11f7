import os
import random
import sqlite3

import pytest

from chatsecure_forensics.cipher_pages import (
    CipherProfile, EncryptedDbFile, RawKey, TextKey, decrypt_database, decrypt_page,
    derive_page_keys, encrypt_database, encrypt_page, verify_first_page,
)
from chatsecure_forensics.errors import BadKeyLength, HmacMismatch, TruncatedFile
from chatsecure_forensics.sqlite_reader import DbImage
from oracles import pbkdf2_reference, sqlcipher_connect, sqlite_rows

sqlcipher3 = pytest.importorskip("sqlcipher3")

KEY = bytes(range(1, 33))


def plain_db(tmp_path, page_size=1024, rows=50):
    p = tmp_path / "plain.db"
    con = sqlite3.connect(p)
    con.execute(f"PRAGMA page_size = {page_size}")
    con.execute("CREATE TABLE t (id INTEGER PRIMARY KEY, name TEXT, blob BLOB, r REAL)")
    rng = random.Random(5)
    con.executemany("INSERT INTO t VALUES (?, ?, ?, ?)", [
        (i, f"name-{i}" * rng.randint(1, 30), rng.randbytes(rng.randint(0, 3000)), rng.random())
        for i in range(1, rows + 1)
    ])
    con.commit()
    con.close()
    return p.read_bytes()


def test_raw_key_forms():
    assert RawKey.from_hex("x'" + KEY.hex() + "'").key == KEY
    assert RawKey.from_hex(KEY.hex().upper()).key == KEY
    with pytest.raises(BadKeyLength):
        RawKey(b"\x00" * 31)
    with pytest.raises(BadKeyLength):
        RawKey.from_hex("zz" * 32)


@pytest.mark.parametrize("kw", [
    {"page_size": 1000}, {"page_size": 256}, {"page_size": 131072},
    {"reserve_size": 40}, {"reserve_size": 32},
])
def test_profile_validation(kw):
    with pytest.raises(ValueError):
        CipherProfile(**kw)


def test_profile_without_hmac_allows_small_reserve():
    p = CipherProfile(hmac_enabled=False, reserve_size=16)
    assert p.hmac_size == 0 and p.min_reserve == 16


def test_raw_mode_keys_and_hmac_key_oracle():
    salt = bytes(range(16))
    keys = derive_page_keys(CipherProfile.impsenc(KEY), salt)
    assert keys.enc_key == KEY
    assert keys.hmac_key == pbkdf2_reference(KEY, bytes(b ^ 0x3A for b in salt), 2, 32)


def test_textual_mode_key_oracle():
    salt = os.urandom(16)
    text = "629b8dbf3f26131b2fb69619fd4cf992"
    keys = derive_page_keys(CipherProfile.media(text=text, kdf_iterations=64000), salt)
    assert keys.enc_key == pbkdf2_reference(text.encode(), salt, 64000, 32)


def test_encrypted_file_geometry():
    with pytest.raises(TruncatedFile):
        EncryptedDbFile(b"", 1024)
    with pytest.raises(TruncatedFile):
        EncryptedDbFile(b"\x00" * 1500, 1024)
    f = EncryptedDbFile(bytes(range(256)) * 16, 1024)
    assert f.page_count == 4 and f.file_salt == bytes(range(16))


def test_page_roundtrip():
    prof = CipherProfile.impsenc(KEY)
    keys = derive_page_keys(prof, b"S" * 16)
    plain = b"SQLite format 3\x00" + os.urandom(1024 - 16 - 48) + bytes(48)
    enc = encrypt_page(prof, keys, 1, plain, b"I" * 16, b"S" * 16)
    assert enc[:16] == b"S" * 16 and len(enc) == 1024
    assert decrypt_page(prof, keys, 1, enc) == plain
    other = os.urandom(1024 - 48) + bytes(48)
    enc2 = encrypt_page(prof, keys, 7, other, b"J" * 16)
    assert decrypt_page(prof, keys, 7, enc2) == other
    with pytest.raises(HmacMismatch) as ei:
        decrypt_page(prof, keys, 8, enc2)  # MAC binds the page number
    assert ei.value.page_no == 8


def test_database_roundtrip_and_tamper(tmp_path):
    plain = plain_db(tmp_path)
    prof = CipherProfile.impsenc(KEY)
    enc = encrypt_database(plain, prof, random.Random(1))
    out = decrypt_database(enc, prof)
    assert sqlite_rows(out, "t") == sqlite_rows(plain, "t")
    assert verify_first_page(enc, prof)
    bad = bytearray(enc.raw)
    bad[3 * 1024 + 100] ^= 0x01
    with pytest.raises(HmacMismatch) as ei:
        decrypt_database(bytes(bad), prof)
    assert ei.value.page_no == 4
    wrong = prof.with_key(RawKey(bytes(32)))
    assert not verify_first_page(enc, wrong)
    with pytest.raises(HmacMismatch):
        decrypt_database(enc, wrong)


def test_roundtrip_without_hmac(tmp_path):
    plain = plain_db(tmp_path, rows=10)
    prof = CipherProfile(key=RawKey(KEY), hmac_enabled=False, reserve_size=16)
    enc = encrypt_database(plain, prof, random.Random(2))
    assert sqlite_rows(decrypt_database(enc, prof), "t") == sqlite_rows(plain, "t")
    assert not verify_first_page(enc, prof.with_key(RawKey(bytes(32))))


def test_truncated_ciphertext(tmp_path):
    prof = CipherProfile.impsenc(KEY)
    enc = encrypt_database(plain_db(tmp_path, rows=5), prof, random.Random(3))
    with pytest.raises(TruncatedFile):
        decrypt_database(enc.raw[:-10], prof)


# -- conformance with the reference engine ---------------------------------

def _ref_rows(con, table):
    return sorted(con.execute(f'SELECT rowid, * FROM "{table}"').fetchall(), key=repr)


def test_ours_open_in_reference_raw_key(tmp_path):
    plain = plain_db(tmp_path)
    enc = encrypt_database(plain, CipherProfile.impsenc(KEY), random.Random(4))
    p = tmp_path / "enc.db"
    p.write_bytes(enc.raw)
    con = sqlcipher_connect(p, key_hex=KEY.hex())
    assert con.execute("PRAGMA cipher_integrity_check").fetchall() == []
    got = [(r[0], tuple(r[1:])) for r in con.execute("SELECT rowid, * FROM t")]
    con.close()
    assert got == sqlite_rows(plain, "t")


def test_ours_open_in_reference_text_key_8192(tmp_path):
    plain = plain_db(tmp_path, rows=20)
    text = KEY.hex()[:32]
    enc = encrypt_database(plain, CipherProfile.media(text=text), random.Random(5))
    assert enc.page_size == 8192
    p = tmp_path / "media.db"
    p.write_bytes(enc.raw)
    con = sqlcipher_connect(p, key_text=text, page_size=8192)
    got = [(r[0], tuple(r[1:])) for r in con.execute("SELECT rowid, * FROM t")]
    con.close()
    assert got == sqlite_rows(plain, "t")


def _reference_db(path, key_hex=None, key_text=None, page_size=None, compat_first=False):
    con = sqlcipher_connect(path, key_hex=key_hex, key_text=key_text, page_size=page_size,
                            compat_first=compat_first)
    con.execute("CREATE TABLE t (id INTEGER PRIMARY KEY, s TEXT, b BLOB)")
    rng = random.Random(6)
    rows = [(i, f"row {i} " * rng.randint(1, 50), rng.randbytes(rng.randint(0, 5000))) for i in range(1, 40)]
    con.executemany("INSERT INTO t VALUES (?, ?, ?)", rows)
    con.commit()
    con.close()
    return rows


@pytest.mark.parametrize("compat_first", [False, True])
def test_reference_written_decrypts_here_raw(tmp_path, compat_first):
    p = tmp_path / "ref.db"
    rows = _reference_db(p, key_hex=KEY.hex(), compat_first=compat_first)
    plain = decrypt_database(p.read_bytes(), CipherProfile.impsenc(KEY))
    assert [tuple(r.values) for r in DbImage(plain).scan_table("t")] == rows
    tmp = tmp_path / "plain.db"
    tmp.write_bytes(plain)
    assert sqlite3.connect(tmp).execute("PRAGMA integrity_check").fetchall() == [("ok",)]


def test_reference_written_decrypts_here_text(tmp_path):
    p = tmp_path / "ref.db"
    text = "629b8dbf3f26131b2fb69619fd4cf992"
    rows = _reference_db(p, key_text=text, page_size=8192)
    prof = CipherProfile.media(text=text)
    plain = decrypt_database(p.read_bytes(), prof)
    assert [tuple(r.values) for r in DbImage(plain).scan_table("t")] == rows
    assert sqlite_rows(plain, "t") == [(r[0], r) for r in rows]
    with pytest.raises(HmacMismatch):
        decrypt_database(p.read_bytes(), prof.with_key(TextKey(text.upper())))
