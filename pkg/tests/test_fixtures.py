import filecmp
import os

import pytest

from chatsecure_forensics.fixtures import build_scenario, make_fixture
from oracles import sqlcipher_connect


def test_random_seed_is_byte_reproducible(tmp_path):
    a = make_fixture("random", str(tmp_path / "a"), seed=7, dump_size=1 << 16)
    b = make_fixture("random", str(tmp_path / "b"), seed=7, dump_size=1 << 16)
    assert a == b
    for key in ("prefs", "impsenc", "media", "dump"):
        assert filecmp.cmp(tmp_path / "a" / a[key], tmp_path / "b" / b[key], shallow=False)
    c = make_fixture("random", str(tmp_path / "c"), seed=8)
    assert c["key_hex"] != a["key_hex"]


def test_scenarios_are_cumulative():
    counts = []
    for name in ("fig3", "fig4", "fig5", "fig6"):
        sc = build_scenario(name)
        counts.append((len(sc.tables.get("accounts", [])), len(sc.tables.get("contacts", [])),
                       len(sc.tables.get("messages", [])) + len(sc.tables.get("inMemoryMessages", [])),
                       len(sc.files)))
    assert counts == [(2, 0, 0, 0), (2, 9, 0, 0), (2, 9, 10, 0), (2, 9, 11, 1)]


def test_unknown_scenario():
    with pytest.raises(ValueError):
        build_scenario("fig9")


def test_reference_engine_opens_fixtures(fixture_set):
    pytest.importorskip("sqlcipher3")
    fs = fixture_set("fig6")
    con = sqlcipher_connect(fs.path("impsenc"), key_hex=fs.info["key_hex"])
    names = [r[0] for r in con.execute("SELECT name FROM sqlite_master WHERE type = 'table'")]
    con.close()
    assert len(names) == 21
    con = sqlcipher_connect(fs.path("media"), key_text=fs.info["media_key"], page_size=8192)
    assert con.execute("SELECT size, block_size FROM meta_data WHERE type = 'blob'").fetchall() == [(143584, 8192)]
    con.close()


def test_layout(fixture_set):
    fs = fixture_set("fig3")
    for rel in ("shared_prefs/info.guardianproject.cacheword.prefs.xml", "databases/impsenc.db", "app_vfs/media.db"):
        assert os.path.exists(os.path.join(fs.root, rel))
