import json
import logging
import os
import sqlite3

import pytest

from chatsecure_forensics.cli import main

KEYHEX = "629b8dbf3f26131b2fb69619fd4cf992a1d2d01296b573ba3459faff8a12cd89"
PW = "thisisthepassword2016"


@pytest.fixture(scope="module")
def fx(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    out = str(root / "fig6")
    assert main(["make-fixture", "--scenario", "fig6", "--out", out, "--dump-size", "2"]) == 0
    return out


def p(fx, *parts):
    return os.path.join(fx, *parts)


def prefs(fx):
    return p(fx, "shared_prefs", "info.guardianproject.cacheword.prefs.xml")


def test_decrypt_key(fx, capsys, tmp_path):
    assert main(["decrypt-key", "--prefs", prefs(fx), "--passphrase", PW]) == 0
    assert capsys.readouterr().out.strip() == KEYHEX
    pwfile = tmp_path / "pw.txt"
    pwfile.write_text(PW + "\n")
    assert main(["decrypt-key", "--prefs", prefs(fx), "--passphrase-file", str(pwfile), "--media"]) == 0
    assert capsys.readouterr().out.strip() == KEYHEX[:32]


def test_decrypt_key_failures(fx, capsys):
    assert main(["decrypt-key", "--prefs", prefs(fx), "--passphrase", "nope"]) == 2
    assert capsys.readouterr().out == ""
    assert main(["decrypt-key", "--prefs", p(fx, "missing.xml"), "--passphrase", PW]) == 1


def test_decrypt_db_both_recipes(fx, tmp_path, capsys):
    out = str(tmp_path / "imps.db")
    assert main(["decrypt-db", "--in", p(fx, "databases", "impsenc.db"), "--out", out, "--key-hex", KEYHEX]) == 0
    assert sqlite3.connect(out).execute("SELECT count(*) FROM accounts").fetchone() == (2,)
    out = str(tmp_path / "media.db")
    assert main(["decrypt-db", "--in", p(fx, "app_vfs", "media.db"), "--out", out, "--key-hex", KEYHEX, "--media"]) == 0
    assert sqlite3.connect(out).execute("SELECT count(*) FROM value_data").fetchone() == (18,)
    assert main(["decrypt-db", "--in", p(fx, "app_vfs", "media.db"), "--key-text", KEYHEX[:32],
                 "--page-size", "8192", "--check-zeroed"]) == 0
    assert json.loads(capsys.readouterr().out)["wiped"] is True
    assert main(["decrypt-db", "--in", p(fx, "databases", "impsenc.db"), "--key-hex", "00" * 32]) == 2
    assert main(["decrypt-db", "--in", p(fx, "databases", "impsenc.db"), "--key-hex", "00"]) == 1


def test_report_messages_and_accounts(fx, capsys, tmp_path, caplog):
    db = p(fx, "databases", "impsenc.db")
    with caplog.at_level(logging.INFO, logger="chatsecure_forensics"):
        assert main(["report", "accounts", "--db", db, "--key-hex", KEYHEX]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert len(doc["rows"]) == 2 and doc["rows"][1]["password"] == "#t&st.p@sswd!"
    assert "#t&st.p@sswd!" not in caplog.text and "<redacted>" in caplog.text
    caplog.clear()
    with caplog.at_level(logging.INFO, logger="chatsecure_forensics"):
        assert main(["--show-credentials", "report", "accounts", "--db", db, "--key-hex", KEYHEX]) == 0
    assert "#t&st.p@sswd!" in caplog.text
    capsys.readouterr()
    out = tmp_path / "m.csv"
    assert main(["report", "messages", "--db", db, "--key-hex", KEYHEX, "--format", "csv", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 1 + 11


def test_report_files_and_plain_input(fx, capsys, tmp_path):
    plain = str(tmp_path / "plain.db")
    main(["decrypt-db", "--in", p(fx, "databases", "impsenc.db"), "--out", plain, "--key-hex", KEYHEX])
    assert main(["report", "files", "--db", plain, "--media-db", p(fx, "app_vfs", "media.db"), "--key-hex", KEYHEX]) == 0
    (row,) = json.loads(capsys.readouterr().out)["rows"]
    assert (row["size"], row["status"]) == (143584, "matched")
    assert main(["report", "contacts", "--db", p(fx, "databases", "impsenc.db")]) == 1  # encrypted, no key


def test_report_empty_db(tmp_path, capsys):
    db = tmp_path / "empty.db"
    con = sqlite3.connect(db)
    con.execute("CREATE TABLE messages (_id INTEGER PRIMARY KEY, thread_id INTEGER, date INTEGER, type INTEGER)")
    con.commit()
    con.close()
    assert main(["report", "messages", "--db", str(db)]) == 0
    assert json.loads(capsys.readouterr().out)["rows"] == []


def test_extract_files(fx, tmp_path):
    out = tmp_path / "x"
    assert main(["extract-files", "--media-db", p(fx, "app_vfs", "media.db"), "--imps-db",
                 p(fx, "databases", "impsenc.db"), "--key-hex", KEYHEX, "--out", str(out)]) == 0
    assert (out / "2" / "download" / "58278").stat().st_size == 143584
    (entry,) = json.loads((out / "manifest.json").read_text())["files"]
    assert entry["message"]["mime_type"] == "image/jpeg" and entry["message"]["date_ms"] == 1443692083731


def test_extract_files_partial(tmp_path):
    from chatsecure_forensics.cipher_pages import CipherProfile, decrypt_database, encrypt_database
    src = tmp_path / "src"
    main(["make-fixture", "--scenario", "fig6", "--out", str(src)])
    raw = (src / "app_vfs" / "media.db").read_bytes()
    plain = tmp_path / "media_plain.db"
    plain.write_bytes(decrypt_database(raw, CipherProfile.media(bytes.fromhex(KEYHEX))))
    con = sqlite3.connect(plain)
    con.execute("DELETE FROM value_data WHERE block_no = 1")
    con.commit()
    con.close()
    enc = encrypt_database(plain.read_bytes(), CipherProfile.media(bytes.fromhex(KEYHEX)))
    gap = tmp_path / "gap.db"
    gap.write_bytes(enc.raw)
    out = tmp_path / "x"
    assert main(["extract-files", "--media-db", str(gap), "--key-hex", KEYHEX, "--out", str(out)]) == 3
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["failures"] == ["/2/download/58278"]
    assert "MissingBlock(1)" in manifest["files"][0]["error"]


def test_scan_memory(fx, capsys):
    assert main(["scan-memory", "--dump", p(fx, "memory.raw"), "--prefs", prefs(fx),
                 "--db", p(fx, "databases", "impsenc.db")]) == 0
    out = json.loads(capsys.readouterr().out)
    assert (out["passphrase"], out["validation"], out["key_hex"]) == (PW, "db_confirmed", KEYHEX)
    assert main(["scan-memory", "--dump", p(fx, "nope.raw"), "--prefs", prefs(fx)]) == 1


def test_make_fixture_arguments(tmp_path):
    assert main(["make-fixture", "--scenario", "random", "--out", str(tmp_path / "a")]) == 1
    assert main(["make-fixture", "--scenario", "fig3", "9", "--out", str(tmp_path / "a")]) == 1
    assert main(["make-fixture", "--scenario", "random", "x", "--out", str(tmp_path / "a")]) == 1
    assert main(["make-fixture", "--scenario", "random", "3", "--out", str(tmp_path / "a")]) == 0


def test_config_errors(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[nope]\n")
    assert main(["--config", str(bad), "make-fixture", "--scenario", "fig3", "--out", str(tmp_path / "z")]) == 1


def test_version(capsys):
    with pytest.raises(SystemExit) as ei:
        main(["--version"])
    assert ei.value.code == 0 and "chatsecure-forensics" in capsys.readouterr().out
