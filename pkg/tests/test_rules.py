import glob
import json
import os

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import fixturelib as fl
from vrscan.builders.dexasm import assemble
from vrscan.dex import parse_dex
from vrscan.errors import BadPattern, ConfigError, DuplicateRuleId, RuleError, UnknownCategory
from vrscan.rules import (
    CATEGORIES,
    TrackerDb,
    detect_trackers,
    evaluate_rules,
    find_pii_methods,
    has_rd_indicator,
    load_ruleset,
    segments,
)

RULES = load_ruleset()
TRACKERS = TrackerDb.load()


def categories(listing):
    prog = parse_dex([assemble(listing)])
    return {f.category for f in evaluate_rules(prog, RULES, TRACKERS)}


def load_fixture(cat, label):
    with open(os.path.join(fl.FIXTURE_DIR, "category", f"{cat.lower()}_{label}.dex"), "rb") as fh:
        return parse_dex([fh.read()])


@pytest.mark.parametrize("cat", fl.CATEGORY_NAMES)
def test_category_positive(cat):
    cats = {f.category for f in evaluate_rules(load_fixture(cat, "pos"), RULES, TRACKERS)}
    assert cat in cats


@pytest.mark.parametrize("cat", fl.CATEGORY_NAMES)
def test_category_negative(cat):
    cats = {f.category for f in evaluate_rules(load_fixture(cat, "neg"), RULES, TRACKERS)}
    assert cat not in cats


def test_default_ruleset_covers_categories():
    assert {r.category for r in RULES} == set(CATEGORIES)
    assert len({r.id for r in RULES}) == len(RULES)


def _doc(*rules):
    return {"rules": list(rules)}


GOOD = {"id": "X-1", "category": "SDI", "predicates": [{"kind": "method", "pattern": "*->rawQuery"}]}


@pytest.mark.parametrize("doc,exc", [
    (_doc(GOOD, GOOD), DuplicateRuleId),
    (_doc(dict(GOOD, category="NOPE")), UnknownCategory),
    (_doc(dict(GOOD, predicates=[{"kind": "method", "pattern": "no arrow"}])), BadPattern),
    (_doc(dict(GOOD, predicates=[{"kind": "string", "regex": "("}])), BadPattern),
    (_doc(dict(GOOD, polarity="absence")), RuleError),
    (_doc(dict(GOOD, predicates=[])), RuleError),
    (_doc(dict(GOOD, severity="critical")), RuleError),
    ({"nope": 1}, RuleError),
])
def test_bad_rulesets(doc, exc):
    with pytest.raises(exc):
        load_ruleset(doc)


def test_ruleset_sources(tmp_path):
    p = tmp_path / "r.json"
    p.write_text(json.dumps(_doc(GOOD)))
    assert [r.id for r in load_ruleset(str(p))] == ["X-1"]
    assert [r.id for r in load_ruleset(json.dumps(_doc(GOOD)))] == ["X-1"]
    with pytest.raises(ConfigError):
        load_ruleset("{not json")


def test_cooccur_scope_is_same_class():
    # the weak algorithm string lives in another class: no IEF finding
    listing = fl.dex_class("Lc/A;", [fl.dex_method(
        "static f()V", "const-string v1, \"AES/GCM/NoPadding\"\n"
        "invoke-static {v1}, Ljavax/crypto/Cipher;->getInstance(Ljava/lang/String;)Ljavax/crypto/Cipher;\n"
        "return-void")]) + fl.dex_class("Lc/B;", [fl.dex_method(
            "static g()V", "const-string v1, \"DES\"\nreturn-void")])
    assert "IEF" not in categories(listing)


def test_ipd_excludes_loopback_and_finds_ipv6():
    assert "IPD" not in categories(fl._activity('const-string v1, "0.0.0.0"'))
    assert "IPD" in categories(fl._activity('const-string v1, "fe80::1ff:fe23:4567:890a"'))
    assert "IPD" not in categories(fl._activity('const-string v1, "version 1.2.3.4.5"'))


def test_root_indicator_by_method_name():
    listing = fl._activity("invoke-static {}, Lcom/x/RootCheck;->isRooted()Z")
    prog = parse_dex([assemble(listing)])
    assert has_rd_indicator(prog, RULES)
    assert "RD" not in categories(listing)


def test_tracker_finding_names_library():
    prog = load_fixture("TRACKER", "pos")
    (f,) = detect_trackers(prog, TRACKERS)
    assert f.evidence[0] == "Unity3d Ads"
    assert f.evidence[1] == "Lcom/unity3d/ads/UnityAds;"


@pytest.mark.parametrize("name,segs", [
    ("getUserId", ["get", "user", "id"]),
    ("get_device_ID", ["get", "device", "id"]),
    ("android", ["android"]),
    ("parseHTTPResponse2", ["parse", "http", "response", "2"]),
])
def test_segments(name, segs):
    assert segments(name) == segs


def test_pii_keywords():
    listing = fl.dex_class("Lp/Q;", [
        fl.dex_method("static getUserId()V", "return-void", 1),
        fl.dex_method("static android()V", "return-void", 1),
        fl.dex_method("static paid()V", "return-void", 1),
        fl.dex_method("static setPhoneNumber()V", "return-void", 1),
        fl.dex_method("static readEmail()V", "return-void", 1),
    ])
    prog = parse_dex([assemble(listing)])
    hits = sorted((u.method.name, u.keyword) for u in find_pii_methods(prog))
    assert hits == [("getUserId", "id"), ("getUserId", "user"),
                    ("readEmail", "email"), ("setPhoneNumber", "phone")]


# --- properties over composed programs ---------------------------------------

def _renamed(cat, label, i):
    listing = fl.CATEGORY_FIXTURES[cat][0 if label == "pos" else 1]
    return listing.replace("Lfix/app/Main;", f"Lfix/app/Main{i};").replace("Lfix/app/TrustAll;", f"Lfix/app/T{i};")


PIECES = [(c, lab) for c in fl.CATEGORY_NAMES for lab in ("pos", "neg")]
subsets = st.lists(st.sampled_from(range(len(PIECES))), min_size=1, max_size=6, unique=True)


def _program(indices):
    text = "".join(_renamed(*PIECES[i], i) for i in indices)
    return parse_dex([assemble(text)])


def _allowed_evidence(prog):
    allowed = set(prog.strings) | {str(s) for s in prog.methods} | {str(s) for s in prog.method_refs}
    allowed |= {name for name, _ in TRACKERS.trackers}
    allowed |= {c for c in prog.class_names} | {s.class_descriptor for s in prog.method_refs}
    for r in RULES:
        for p in r.predicates:
            allowed |= set(p.keywords)
    return allowed


@settings(max_examples=60, deadline=None)
@given(subsets, subsets)
def test_presence_findings_are_monotone(a, b):
    small = {f.category for f in evaluate_rules(_program(a), RULES, TRACKERS)}
    big = {f.category for f in evaluate_rules(_program(sorted(set(a) | set(b))), RULES, TRACKERS)}
    assert small - {"RD"} <= big


@settings(max_examples=60, deadline=None)
@given(subsets)
def test_exactly_one_rd_finding_iff_no_indicator(indices):
    prog = _program(indices)
    rd = [f for f in evaluate_rules(prog, RULES, TRACKERS) if f.category == "RD"]
    has_root_string = any("/system/xbin/su" in _renamed(*PIECES[i], i) for i in indices)
    assert len(rd) == (0 if has_root_string else 1)
    assert has_rd_indicator(prog, RULES) is has_root_string


@settings(max_examples=60, deadline=None)
@given(subsets)
def test_evidence_comes_from_program(indices):
    prog = _program(indices)
    allowed = _allowed_evidence(prog)
    for f in evaluate_rules(prog, RULES, TRACKERS):
        for ev in f.evidence:
            assert ev in allowed, (f.rule_id, ev)


def test_findings_sorted_and_deterministic():
    prog = _program(range(len(PIECES)))
    a = evaluate_rules(prog, RULES, TRACKERS)
    b = evaluate_rules(prog, RULES, TRACKERS)
    assert a == b
    assert a == sorted(a, key=lambda f: f.sort_key())


def test_committed_listings_match_fixturelib():
    for path in glob.glob(os.path.join(fl.FIXTURE_DIR, "category", "*.smali")):
        cat, label = os.path.basename(path)[:-6].split("_")
        with open(path) as fh:
            assert fh.read() == fl.CATEGORY_FIXTURES[cat.upper()][0 if label == "pos" else 1]
