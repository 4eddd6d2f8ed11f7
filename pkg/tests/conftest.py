import json
import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from chatsecure_forensics.fixtures import make_fixture  # noqa: E402

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, text): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is None:
        return
    n, text = m.args
    prev = _criteria.get(n, (text, "PASS"))
    if rep.failed or (rep.when == "call" and rep.skipped):
        _criteria[n] = (text, "FAIL")
    elif rep.when == "call":
        _criteria[n] = prev


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        text, verdict = _criteria[n]
        terminalreporter.write_line(f"criterion {n}: {verdict} - {text}")


class FixtureSet:
    def __init__(self, root, info):
        self.root = root
        self.info = info

    def path(self, key):
        return os.path.join(self.root, self.info[key])

    def read(self, key):
        with open(self.path(key), "rb") as fh:
            return fh.read()

    @property
    def key(self):
        return bytes.fromhex(self.info["key_hex"])


@pytest.fixture(scope="session")
def fixture_set(tmp_path_factory):
    cache = {}

    def get(scenario, seed=0, **kw):
        tag = (scenario, seed, tuple(sorted(kw.items())))
        if tag not in cache:
            root = str(tmp_path_factory.mktemp(f"{scenario}-{seed}"))
            info = make_fixture(scenario, root, seed=seed, **kw)
            with open(os.path.join(root, "fixture.json")) as fh:
                assert json.load(fh) == json.loads(json.dumps(info))
            cache[tag] = FixtureSet(root, info)
        return cache[tag]

    return get


def decrypt_fixture(fs):
    """(impsenc image, media image) of a fixture set, decrypted with its known key."""
    from chatsecure_forensics.cipher_pages import CipherProfile, decrypt_database
    from chatsecure_forensics.sqlite_reader import DbImage
    imps = DbImage(decrypt_database(fs.read("impsenc"), CipherProfile.impsenc(fs.key)))
    media = DbImage(decrypt_database(fs.read("media"), CipherProfile.media(fs.key)))
    return imps, media
