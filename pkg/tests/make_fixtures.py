#!/usr/bin/env python3
"""Regenerate the committed fixture binaries and, optionally, the golden reports.

    python3 tests/make_fixtures.py                  # rewrite tests/fixtures/
    python3 tests/make_fixtures.py --update-goldens # also rewrite tests/golden/
    python3 tests/make_fixtures.py --check          # exit 1 if anything differs
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import fixturelib as fl  # noqa: E402
from vrscan.builders.dexasm import assemble  # noqa: E402
from vrscan.report import aggregate, render_json, scan_app  # noqa: E402


def fixture_files():
    """Relative path -> bytes for everything under tests/fixtures/."""
    files = {}
    for cat, (pos, neg) in fl.CATEGORY_FIXTURES.items():
        for label, listing in (("pos", pos), ("neg", neg)):
            stem = f"category/{cat.lower()}_{label}"
            files[stem + ".smali"] = listing.encode("utf-8")
            files[stem + ".dex"] = assemble(listing)
            sidecar = fl.listing_sidecar(listing)
            files[stem + ".json"] = (json.dumps(sidecar, indent=2, sort_keys=True) + "\n").encode("utf-8")
    for name, (apk, policy) in fl.app_fixtures().items():
        files[f"apps/{name}.apk"] = apk
        if policy is not None:
            files[f"policies/{name}{fl.policy_ext(policy)}"] = policy.encode("utf-8")
    return files


def write_tree(root, files):
    for rel, data in sorted(files.items()):
        path = os.path.join(root, rel)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        with open(path, "wb") as fh:
            fh.write(data)


def find_policy(root, name):
    for ext in (".txt", ".html"):
        p = os.path.join(root, "policies", name + ext)
        if os.path.exists(p):
            return p
    return None


def golden_reports(root):
    """Golden name -> bytes, scanning the fixture tree under ``root``."""
    out = {}
    reports = []
    apps_dir = os.path.join(root, "apps")
    for fn in sorted(os.listdir(apps_dir)):
        name = fn[:-4]
        rep = scan_app(os.path.join(apps_dir, fn), find_policy(root, name))
        reports.append(rep)
        out[f"{name}.json"] = render_json(rep.to_dict())
    out["corpus_stats.json"] = render_json(aggregate(reports))
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--update-goldens", action="store_true")
    ap.add_argument("--check", action="store_true", help="compare against the committed files only")
    args = ap.parse_args(argv)

    files = fixture_files()
    if args.check:
        with tempfile.TemporaryDirectory() as tmp:
            write_tree(tmp, files)
            goldens = golden_reports(tmp)
        bad = [rel for rel, data in files.items() if _read(os.path.join(fl.FIXTURE_DIR, rel)) != data]
        bad += [f"golden/{g}" for g, data in goldens.items() if _read(os.path.join(fl.GOLDEN_DIR, g)) != data]
        for rel in bad:
            print("differs:", rel)
        return 1 if bad else 0

    write_tree(fl.FIXTURE_DIR, files)
    print(f"wrote {len(files)} fixture files")
    if args.update_goldens:
        goldens = golden_reports(fl.FIXTURE_DIR)
        write_tree(fl.GOLDEN_DIR, goldens)
        print(f"wrote {len(goldens)} golden files")
    return 0


def _read(path):
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError:
        return None


if __name__ == "__main__":
    sys.exit(main())
