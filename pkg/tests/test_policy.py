import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import fixturelib as fl
from vrscan.errors import ConfigError
from vrscan.policy import (
    DataOntology,
    check_gdpr,
    default_ontology,
    detect_contradictions,
    extract_statements,
    looks_like_html,
    looks_non_english,
    strip_html,
)
from vrscan.policy.contradictions import EXACT, NEGATIVE_BROADER, NEGATIVE_NARROWER, relation_of
from vrscan.policy.gdpr import find_timestamp, load_terms
from vrscan.policy.text import split_sentences

ONT = default_ontology()
TERMS = load_terms()


def triples(text):
    return sorted((s.entity, s.action, s.data_type) for s in extract_statements(text))


def test_face_pinch_sentence():
    assert triples(fl.FACE_PINCH_SENTENCE) == [("we", "collect", "photo information"),
                                               ("we", "collect", "voice information")]


def test_third_party_collect_contradicts_no_sell():
    stmts = extract_statements(fl.NO_SELL_SENTENCE + " " + fl.THIRD_PARTY_COLLECT_SENTENCE)
    (c,) = detect_contradictions(stmts)
    assert c.relation == NEGATIVE_BROADER
    assert (c.positive.data_type, c.negative.data_type) == ("device identifier", "personal information")
    assert (c.positive.action, c.negative.action) == ("share", "not_share")
    assert not c.informational


@pytest.mark.parametrize("text,expected", [
    ("We collect your email address.", [("we", "collect", "email address")]),
    ("We do not collect your email address.", [("we", "not_collect", "email address")]),
    ("We never share your location with advertisers.", [("third party", "not_share", "location")]),
    ("This game is fun.", []),
])
def test_extraction_cases(text, expected):
    assert triples(text) == expected


def test_exact_and_narrower_relations():
    exact = extract_statements("We collect your email address. We do not collect your email address.")
    assert [c.relation for c in detect_contradictions(exact)] == [EXACT]
    narrower = extract_statements("We collect personal information. We do not collect your device identifier.")
    assert [c.relation for c in detect_contradictions(narrower)] == [NEGATIVE_NARROWER]


def test_no_contradiction_between_unrelated_types():
    stmts = extract_statements("We collect your photo information. We do not collect your voice information.")
    assert detect_contradictions(stmts) == []


def test_relation_of_unrelated_is_none():
    assert relation_of("photo information", "voice information", ONT) is None


# --- text handling -------------------------------------------------------------

def test_html_is_stripped_before_extraction():
    assert looks_like_html(fl.HTML_POLICY)
    plain = strip_html(fl.HTML_POLICY)
    assert "var collect" not in plain and "color: red" not in plain
    assert "We collect your email address" in plain
    assert ("we", "collect", "email address") in triples(plain)
    assert not looks_like_html(plain)


def test_non_english_detection():
    assert looks_non_english(fl.GERMAN_POLICY * 2)
    assert not looks_non_english(fl.SILENT_POLICY * 3)
    assert not looks_non_english(strip_html(fl.HTML_POLICY))


def test_sentence_split():
    assert split_sentences("One here. Two there!  Three?") == ["One here.", "Two there!", "Three?"]


# --- GDPR checklist ------------------------------------------------------------

def test_empty_policy_violates_every_term():
    res = check_gdpr("")
    assert len(TERMS) == 13
    assert res.violations == [t.term for t in TERMS]
    assert not res.compliant
    assert set(res.to_dict()) == {t.term for t in TERMS}


def test_dates_near_cues():
    assert find_timestamp("Last updated: March 3rd, 2023. Hello.", ["last updated"])
    assert find_timestamp("Effective 2024-01-15", ["effective(?: date| as of| from| on)?"])
    assert find_timestamp("Last updated: soon", ["last updated"]) is None
    assert find_timestamp("Last updated: 2023-13-45", ["last updated"]) is None


def test_rich_policy_satisfies_checklist():
    text = ("Privacy Policy. Last updated: 12 January 2024. This policy follows the GDPR. "
            "Information we collect: your email address. How we use it: to run the game. "
            "We share data with third parties such as Facebook only with your consent. "
            "The data controller is Example Ltd. You have the right to access and the right to erasure. "
            "We retain data as long as necessary and protect it with encryption. "
            "You may lodge a complaint with your supervisory authority. Your rights are listed below. "
            "Contact us at privacy@example.org or read https://example.org/privacy.")
    res = check_gdpr(text)
    assert res.violations == []
    assert res.compliant


def test_missing_sections_needs_three():
    term = next(t for t in TERMS if t.term == "Missing Sections")
    two = check_gdpr("Information we collect. How we use it.", [term])
    three = check_gdpr("Information we collect. How we use it. Contact us.", [term])
    assert two.violations == ["Missing Sections"] and three.violations == []


# --- properties ----------------------------------------------------------------

SENTENCES = [fl.FACE_PINCH_SENTENCE, fl.NO_SELL_SENTENCE, fl.THIRD_PARTY_COLLECT_SENTENCE,
             "We collect your email address.", "We do not collect your email address.",
             "We collect personal information.", "We never share your location with advertisers.",
             "We share your location with advertisers.", fl.SILENT_POLICY]
docs = st.lists(st.sampled_from(SENTENCES), min_size=1, max_size=6)


@settings(max_examples=100, deadline=None)
@given(docs, st.sampled_from([" ", "  ", "\n", " \n\t "]))
def test_extraction_ignores_whitespace_layout(sents, sep):
    assert extract_statements(" ".join(sents)) == extract_statements(sep.join(sents))
    assert check_gdpr(" ".join(sents)).to_dict() == check_gdpr(sep.join(sents)).to_dict()


@settings(max_examples=100, deadline=None)
@given(docs, st.randoms())
def test_contradictions_ignore_statement_order(sents, rnd):
    stmts = extract_statements(" ".join(sents))
    shuffled = list(stmts)
    rnd.shuffle(shuffled)
    assert detect_contradictions(stmts) == detect_contradictions(shuffled)


@settings(max_examples=100, deadline=None)
@given(docs, docs)
def test_more_text_never_removes_contradictions(a, b):
    small = {(c.positive.data_type, c.negative.data_type, c.relation)
             for c in detect_contradictions(extract_statements(" ".join(a)))}
    big = {(c.positive.data_type, c.negative.data_type, c.relation)
           for c in detect_contradictions(extract_statements(" ".join(a + b)))}
    assert small <= big


@settings(max_examples=100, deadline=None)
@given(docs, docs)
def test_gdpr_violations_antitone_in_text(a, b):
    small = set(check_gdpr(" ".join(a)).violations)
    big = set(check_gdpr(" ".join(a + b)).violations)
    assert big <= small


@pytest.mark.parametrize("edge", ONT.edges(), ids=lambda e: f"{e[0]}>{e[1]}")
def test_every_ontology_edge_gives_negative_broader(edge):
    general, specific = edge
    text = f"We collect your {specific}. We do not collect your {general}."
    stmts = extract_statements(text)
    assert [(s.action, s.data_type) for s in stmts] == [("collect", specific), ("not_collect", general)]
    (c,) = detect_contradictions(stmts)
    assert c.relation == NEGATIVE_BROADER


def test_ontology_rejects_cycles_and_unknown_parents():
    base = {"entities": [], "data_types": [{"name": "a", "parents": ["b"]}, {"name": "b", "parents": ["a"]}]}
    with pytest.raises(ConfigError):
        DataOntology.from_dict(base)
    with pytest.raises(ConfigError):
        DataOntology.from_dict({"entities": [], "data_types": [{"name": "a", "parents": ["zz"]}]})


def independent_ancestors(node):
    found, frontier = set(), [node]
    edges = ONT.edges()
    while frontier:
        nxt = [g for g, s in edges if s in frontier and g not in found]
        found.update(nxt)
        frontier = nxt
    return found


@pytest.mark.parametrize("node", sorted(ONT.nodes))
def test_ancestors_match_edge_closure(node):
    assert ONT.ancestors(node) == independent_ancestors(node)
