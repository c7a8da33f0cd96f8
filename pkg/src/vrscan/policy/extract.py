"""Lexicon and window based extraction of <entity, action, data type> statements.

Per sentence: split into clauses, find action verbs, decide polarity from
negation cues earlier in the same clause, then attach the data types of the
verb's clause and of any following verbless clauses (list continuations).
Subjects are looked up before the verb, recipients of sharing verbs after it.
A third party that collects is recorded as the first party sharing with it.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from ..resources import load_json
from .ontology import FIRST_PARTY, default_ontology
from .text import normalize_whitespace, split_sentences

COLLECT, NOT_COLLECT, SHARE, NOT_SHARE = "collect", "not_collect", "share", "not_share"
POSITIVE = {COLLECT, SHARE}
NEGATION_OF = {COLLECT: NOT_COLLECT, SHARE: NOT_SHARE}
ACTIONS = (COLLECT, NOT_COLLECT, SHARE, NOT_SHARE)
FIRST_PARTY_ENTITY = "we"
GENERIC_THIRD_PARTY = "third party"


@dataclass(frozen=True, order=True)
class PolicyStatement:
    sentence_index: int
    entity: str
    action: str
    data_type: str

    @property
    def positive(self):
        return self.action in POSITIVE

    def to_dict(self):
        return {"entity": self.entity, "action": self.action, "data_type": self.data_type,
                "sentence_index": self.sentence_index}


def _forms(verb):
    out = {verb, verb + "s", verb + "ed", verb + "ing"}
    if verb.endswith("e"):
        out |= {verb + "d", verb[:-1] + "ing"}
    if verb.endswith(("s", "sh", "ss")):
        out.add(verb + "es")
    if re.fullmatch(r".*[^aeiou][aeiou][rtnpg]", verb) and len(verb) <= 5:
        out |= {verb + verb[-1] + "ed", verb + verb[-1] + "ing"}
    return out


class Lexicon:
    def __init__(self, data):
        self.verb_action = {}
        for action, verbs in data["actions"].items():
            for v in verbs:
                for f in _forms(v) | set(data.get("irregular", {}).get(v, ())):
                    self.verb_action[f] = action
        alts = sorted(self.verb_action, key=lambda w: (-len(w), w))
        self.verb_rx = re.compile(r"\b(?:%s)\b" % "|".join(map(re.escape, alts)), re.IGNORECASE)
        cues = sorted(data["negation_cues"], key=lambda w: (-len(w), w))
        parts = [re.escape(c) if c == "n't" else r"\b" + r"\s+".join(map(re.escape, c.split())) + r"\b" for c in cues]
        self.neg_rx = re.compile("|".join(parts), re.IGNORECASE)
        seps = data.get("clause_separators", [";", ","])
        words = [s for s in seps if s.isalpha()]
        punct = [s for s in seps if not s.isalpha()]
        pat = "|".join([re.escape(p) for p in punct] + [r"\b%s\b" % w for w in words])
        self.clause_rx = re.compile(pat, re.IGNORECASE)

    @classmethod
    def load(cls, path=None):
        return cls(load_json("verb_lexicon.json", path))

    def clauses(self, sentence):
        """(start, end) spans of clauses within ``sentence``."""
        spans, pos = [], 0
        for m in self.clause_rx.finditer(sentence):
            spans.append((pos, m.start()))
            pos = m.end()
        spans.append((pos, len(sentence)))
        return [(a, b) for a, b in spans if sentence[a:b].strip()]


_DEFAULT_LEXICON = None


def default_lexicon():
    global _DEFAULT_LEXICON
    if _DEFAULT_LEXICON is None:
        _DEFAULT_LEXICON = Lexicon.load()
    return _DEFAULT_LEXICON


def _sentence_statements(idx, sent, ontology, lexicon):
    clauses = lexicon.clauses(sent)
    info = []
    for a, b in clauses:
        verbs = [(m.start() + a, lexicon.verb_action[m.group().lower()]) for m in lexicon.verb_rx.finditer(sent, a, b)]
        info.append({
            "span": (a, b),
            "verbs": verbs,
            "negs": [m.start() + a for m in lexicon.neg_rx.finditer(sent[a:b])],
            "types": [n for s, _, n in ontology.find_data_types(sent[a:b])],
            "ents": [(s + a, n) for s, _, n in ontology.find_entities(sent[a:b])],
        })
    verb_clauses = [i for i, c in enumerate(info) if c["verbs"]]
    if not verb_clauses:
        return set()
    # verbless clauses attach to the nearest verb clause before them (or the first one)
    owner = {}
    for i in range(len(info)):
        before = [v for v in verb_clauses if v <= i]
        owner[i] = before[-1] if before else verb_clauses[0]
    out = set()
    for vi in verb_clauses:
        c = info[vi]
        attached = [j for j in range(len(info)) if owner[j] == vi]
        types = sorted({t for j in attached for t in info[j]["types"]})
        if not types:
            continue
        for vpos, action in c["verbs"]:
            negated = any(p < vpos for p in c["negs"])
            entity = _entity_for(action, vpos, vi, info, owner, ontology)
            if action == COLLECT and ontology.entity_class(entity) != FIRST_PARTY:
                action = SHARE
            if negated:
                action = NEGATION_OF[action]
            for t in types:
                out.add(PolicyStatement(idx, entity, action, t))
    return out


def _entity_for(action, vpos, vi, info, owner, ontology):
    if action == COLLECT:
        before = [n for p, n in info[vi]["ents"] if p < vpos]
        if before:
            return before[-1]
        # subject split off by a comma: nearest verbless clause before this one
        for j in range(vi - 1, -1, -1):
            if info[j]["verbs"]:
                break
            if info[j]["ents"]:
                return info[j]["ents"][-1][1]
        return FIRST_PARTY_ENTITY
    after = [n for p, n in info[vi]["ents"] if p > vpos and ontology.entity_class(n) != FIRST_PARTY]
    if after:
        return after[0]
    for j in range(vi + 1, len(info)):
        if owner[j] != vi:
            break
        ents = [n for _, n in info[j]["ents"] if ontology.entity_class(n) != FIRST_PARTY]
        if ents:
            return ents[0]
    return GENERIC_THIRD_PARTY


def extract_statements(text, ontology=None, lexicon=None):
    """Statements found in plain ``text``, sorted by sentence then triple."""
    ontology = ontology or default_ontology()
    lexicon = lexicon or default_lexicon()
    out = set()
    for idx, sent in enumerate(split_sentences(normalize_whitespace(text or ""))):
        out |= _sentence_statements(idx, sent, ontology, lexicon)
    return sorted(out)
