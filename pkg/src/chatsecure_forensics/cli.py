"""Command-line entry point.

Exit codes: 0 success, 1 input error, 2 cryptographic failure,
3 partial extraction.
"""

import argparse
import getpass
import json
import logging
import os
import sys

from . import __version__
from .cipher_pages import RawKey, TextKey, decrypt_database
from .config import load_settings
from .errors import ForensicsError, InputError
from .artifact_model import load_artifact_db, load_media_db
from .fixtures import DEFAULT_PASSPHRASE, SCENARIOS, make_fixture
from .memscan import best_candidate, evaluate_candidates, prune_candidates, scan_dump
from .reconstruction import (
    ChronologyFilter, ReportConfig, build_account_report, build_chronology,
    build_contact_report, correlate_file_transfers, correlation_index,
    report_document, to_csv, to_json,
)
from .secret_vault import parse_serialized_secret, textual_media_key, unwrap_database_key
from .sqlite_reader import SQLITE_MAGIC, DbImage
from .vfs_store import extract_all

log = logging.getLogger("chatsecure_forensics")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_CRYPTO = 2
EXIT_PARTIAL = 3

REDACTED = "<redacted>"


def _read(path):
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _passphrase(args):
    if args.passphrase is not None:
        return args.passphrase
    if args.passphrase_file:
        text = _read(args.passphrase_file).decode("utf-8")
        return text.rstrip("\r\n")
    return getpass.getpass("Passphrase: ")


def _parse_key_hex(text):
    try:
        return RawKey.from_hex(text).key
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _open_image(path, settings, key_hex=None, key_text=None, media=False, page_size=None, kdf_iter=None):
    """Plaintext SQLite images are used as-is; anything else is decrypted with the given key."""
    raw = _read(path)
    if raw.startswith(SQLITE_MAGIC):
        return DbImage(raw)
    if not key_hex and not key_text:
        raise InputError(f"{path} is encrypted; pass --key-hex or --key-text")
    profile = _profile(settings, key_hex, key_text, media, page_size, kdf_iter)
    return DbImage(decrypt_database(raw, profile))


def _profile(settings, key_hex, key_text, media, page_size=None, kdf_iter=None):
    ov = {}
    if page_size:
        ov["page_size"] = page_size
    if kdf_iter:
        ov["kdf_iterations"] = kdf_iter
    try:
        if key_text is None:
            key = _parse_key_hex(key_hex)
            if not media:
                return settings.impsenc_profile(key, **ov)
            key_text = textual_media_key(key)
        if media:
            return settings.media_profile(text=key_text, **ov)
        return settings.impsenc_profile(bytes(32), **ov).with_key(TextKey(key_text))
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _emit(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


# -- subcommands -----------------------------------------------------------

def cmd_decrypt_key(args, settings):
    secret = parse_serialized_secret(_read(args.prefs), args.entry_name or settings.entry_name,
                                     byteorder=settings.ic_byteorder)
    key = unwrap_database_key(secret, _passphrase(args), hash_name=settings.kdf_hash)
    print(textual_media_key(key) if args.media else key.hex())
    return EXIT_OK


def cmd_decrypt_db(args, settings):
    raw = _read(args.input)
    profile = _profile(settings, args.key_hex, args.key_text, args.media, args.page_size, args.kdf_iter)
    plain = decrypt_database(raw, profile)
    img = DbImage(plain)
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(plain)
        log.info("wrote %s (%d pages, %d tables)", args.out, img.page_count, len(img.tables))
    if args.check_zeroed:
        rep = img.check_zeroed()
        print(json.dumps(rep.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def _log_accounts(rows, show_credentials):
    for r in rows:
        pw = r.password if show_credentials or not r.password else REDACTED
        log.info("account %s %s pw=%s", r.account_id, r.identity, pw)


def cmd_report(args, settings):
    img = _open_image(args.db, settings, args.key_hex, args.key_text, page_size=args.page_size)
    db = load_artifact_db(img)
    inputs = [args.db]
    if args.kind == "accounts":
        data = build_account_report(db, ReportConfig())
        _log_accounts(data, args.show_credentials)
    elif args.kind == "contacts":
        data = build_contact_report(db)
    elif args.kind == "messages":
        data = build_chronology(db, ChronologyFilter(args.account, args.contact, args.since, args.until))
    else:
        media = None
        if args.media_db:
            mimg = _open_image(args.media_db, settings, args.key_hex, None, media=True)
            media = load_media_db(mimg)
            inputs.append(args.media_db)
        data = correlate_file_transfers(db, media)
    doc = report_document(args.kind, data, inputs)
    _emit(to_csv(doc) if args.format == "csv" else to_json(doc), args.out)
    return EXIT_OK


def cmd_extract_files(args, settings):
    media = load_media_db(_open_image(args.media_db, settings, args.key_hex, args.key_text, media=True))
    correlation = None
    if args.imps_db:
        img = _open_image(args.imps_db, settings, args.key_hex, None)
        correlation = correlation_index(correlate_file_transfers(load_artifact_db(img), media))
    manifest = extract_all(media, args.out, correlation)
    done = sum(1 for e in manifest["files"] if e["status"] == "extracted")
    log.info("extracted %d file(s) to %s", done, args.out)
    for path in manifest["failures"]:
        log.warning("could not reassemble %s", path)
    return EXIT_PARTIAL if manifest["failures"] else EXIT_OK


def cmd_scan_memory(args, settings):
    secret = parse_serialized_secret(_read(args.prefs), args.entry_name or settings.entry_name,
                                     byteorder=settings.ic_byteorder)
    if not os.path.exists(args.dump):
        raise InputError(f"cannot read {args.dump}: no such file")
    cands = scan_dump(args.dump, settings.signature, max_len=settings.max_len)
    kept = prune_candidates(cands, args.min_occurrences or settings.min_occurrences)
    log.info("%d string(s) carved, %d kept", len(cands), len(kept))
    db, profile = None, None
    if args.db:
        db = _read(args.db)
        profile = settings.media_profile(text="") if args.media else settings.impsenc_profile(bytes(32))
    evaluated = evaluate_candidates(kept, secret, db, profile)
    best = best_candidate(evaluated)
    out = {
        "candidates": [c.to_dict() for c in evaluated],
        "passphrase": best.text if best else None,
        "validation": best.validation.name.lower() if best else None,
        "key_hex": best.key.hex() if best else None,
    }
    _emit(json.dumps(out, indent=2, sort_keys=True, ensure_ascii=False) + "\n", args.out)
    return EXIT_OK if best else EXIT_CRYPTO


def cmd_make_fixture(args, settings):
    scenario, seed = args.scenario[0], 0
    if scenario not in SCENARIOS:
        raise InputError(f"unknown scenario {scenario!r}")
    if scenario == "random":
        if len(args.scenario) != 2:
            raise InputError("--scenario random needs a SEED")
        try:
            seed = int(args.scenario[1])
        except ValueError as exc:
            raise InputError("SEED must be an integer") from exc
    elif len(args.scenario) != 1:
        raise InputError(f"--scenario {scenario} takes no SEED")
    info = make_fixture(scenario, args.out, passphrase=args.passphrase, seed=seed, ic=args.ic,
                        dump_size=args.dump_size << 20)
    log.info("fixture %s written to %s", info["scenario"], args.out)
    return EXIT_OK


# -- parser ----------------------------------------------------------------

def _add_passphrase(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--passphrase", help="passphrase text (prompted when neither option is given)")
    g.add_argument("--passphrase-file", help="file whose first line is the passphrase")


def _add_key(p, required=False):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--key-hex", help="64 hex digits (x'...' accepted)")
    g.add_argument("--key-text", help="textual key, run through PBKDF2 with the file salt")


def build_parser():
    ap = argparse.ArgumentParser(prog="chatsecure-forensics", description="Decrypt and report on ChatSecure for Android evidence.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("--config", help="INI file with cipher/secret/memscan defaults")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    ap.add_argument("--show-credentials", action="store_true",
                    help="do not redact account passwords in log output")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decrypt-key", help="unwrap the database key from the CacheWord prefs file")
    p.add_argument("--prefs", required=True)
    p.add_argument("--entry-name")
    p.add_argument("--media", action="store_true", help="print the 32-char media.db key instead")
    _add_passphrase(p)
    p.set_defaults(func=cmd_decrypt_key)

    p = sub.add_parser("decrypt-db", help="decrypt an SQLCipher database to a plain SQLite file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out")
    _add_key(p, required=True)
    p.add_argument("--media", action="store_true",
                   help="media.db recipe: hex key truncated to 32 chars as text key, 8192-byte pages")
    p.add_argument("--page-size", type=int)
    p.add_argument("--kdf-iter", type=int)
    p.add_argument("--check-zeroed", action="store_true",
                   help="report whether freed pages and cells are zero-filled")
    p.set_defaults(func=cmd_decrypt_db)

    p = sub.add_parser("report", help="accounts, contacts, messages or files report")
    p.add_argument("kind", choices=("accounts", "contacts", "messages", "files"))
    p.add_argument("--db", required=True, help="impsenc.db (plain or encrypted)")
    p.add_argument("--media-db", help="media.db for the files report")
    _add_key(p)
    p.add_argument("--page-size", type=int)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--account", type=int)
    p.add_argument("--contact", type=int)
    p.add_argument("--since", type=int, help="epoch milliseconds, inclusive")
    p.add_argument("--until", type=int, help="epoch milliseconds, inclusive")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("extract-files", help="reassemble files stored in media.db")
    p.add_argument("--media-db", required=True)
    p.add_argument("--imps-db", help="impsenc.db for message correlation")
    _add_key(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract_files)

    p = sub.add_parser("scan-memory", help="carve passphrase candidates from a memory dump")
    p.add_argument("--dump", required=True)
    p.add_argument("--prefs", required=True)
    p.add_argument("--entry-name")
    p.add_argument("--db", help="encrypted impsenc.db (or media.db with --media) for confirmation")
    p.add_argument("--media", action="store_true")
    p.add_argument("--min-occurrences", type=int)
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_scan_memory)

    p = sub.add_parser("make-fixture", help="generate a synthetic evidence set")
    p.add_argument("--scenario", nargs="+", required=True, metavar="NAME [SEED]",
                   help=f"one of {', '.join(SCENARIOS)}; random takes a SEED")
    p.add_argument("--passphrase", default=DEFAULT_PASSPHRASE)
    p.add_argument("--ic", type=int, default=100)
    p.add_argument("--dump-size", type=int, default=0, help="memory dump size in MiB (0 = none)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_make_fixture)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s: %(message)s")
    try:
        settings = load_settings(args.config)
    except (OSError, ValueError) as exc:
        log.error("config: %s", exc)
        return EXIT_INPUT
    try:
        return args.func(args, settings)
    except ForensicsError as exc:
        log.error("%s", exc)
        return exc.exit_code
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
