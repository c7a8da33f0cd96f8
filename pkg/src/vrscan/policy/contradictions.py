"""Contradiction search between positive and negative policy statements."""
from __future__ import annotations

from dataclasses import dataclass

from .extract import NEGATION_OF, POSITIVE
from .ontology import default_ontology

EXACT = "exact"
NEGATIVE_NARROWER = "negative-narrower"
NEGATIVE_BROADER = "negative-broader"
RELATIONS = (EXACT, NEGATIVE_BROADER, NEGATIVE_NARROWER)


@dataclass(frozen=True)
class Contradiction:
    positive: object  # PolicyStatement
    negative: object
    relation: str
    informational: bool = False  # entities of different classes

    def to_dict(self):
        return {"positive": self.positive.to_dict(), "negative": self.negative.to_dict(),
                "relation": self.relation, "informational": self.informational}


def relation_of(positive_type, negative_type, ontology):
    if positive_type == negative_type:
        return EXACT
    if ontology.subsumes(negative_type, positive_type):
        return NEGATIVE_BROADER
    if ontology.subsumes(positive_type, negative_type):
        return NEGATIVE_NARROWER
    return None


def detect_contradictions(statements, ontology=None, include_cross_entity=False):
    """One Contradiction per (positive sentence, negative sentence) pair.

    When several statement pairs share the same two sentences, the one with
    the closest relation (exact, then broader, then narrower) is kept.
    """
    ontology = ontology or default_ontology()
    stmts = sorted(set(statements))
    pos = [s for s in stmts if s.action in POSITIVE]
    neg = [s for s in stmts if s.action not in POSITIVE]
    best = {}
    for p in pos:
        for n in neg:
            if n.action != NEGATION_OF[p.action]:
                continue
            same = ontology.entity_class(p.entity) == ontology.entity_class(n.entity)
            if not same and not include_cross_entity:
                continue
            rel = relation_of(p.data_type, n.data_type, ontology)
            if rel is None:
                continue
            key = (p.sentence_index, n.sentence_index, not same)
            cand = (RELATIONS.index(rel), p, n)
            if key not in best or cand < best[key][0]:
                best[key] = (cand, Contradiction(p, n, rel, informational=not same))
    return [c for _, c in (best[k] for k in sorted(best))]
