"""Cue-phrase checklist over the 13 GDPR violation terms."""
from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import datetime

from ..resources import load_json
from .text import normalize_whitespace

_MONTHS = "january|february|march|april|may|june|july|august|september|october|november|december"
_DATE_FORMATS = [
    (r"\d{4}-\d{1,2}-\d{1,2}", ("%Y-%m-%d",)),
    (r"\d{4}/\d{1,2}/\d{1,2}", ("%Y/%m/%d",)),
    (r"\d{1,2}/\d{1,2}/\d{4}", ("%m/%d/%Y", "%d/%m/%Y")),
    (r"\d{1,2}\.\d{1,2}\.\d{4}", ("%d.%m.%Y",)),
    (r"(?:%s)\.? \d{1,2}(?:st|nd|rd|th)?,? \d{4}" % _MONTHS, ("%B %d %Y",)),
    (r"\d{1,2}(?:st|nd|rd|th)? (?:%s),? \d{4}" % _MONTHS, ("%d %B %Y",)),
    (r"(?:%s) \d{4}" % _MONTHS, ("%B %Y",)),
]
DATE_WINDOW = 60


@dataclass(frozen=True)
class GdprTerm:
    term: str
    risk: str
    kind: str
    cues: tuple
    minimum: int = 1


@dataclass(frozen=True)
class GdprResult:
    violated: bool
    risk: str
    evidence: str

    def to_dict(self):
        return {"violated": self.violated, "risk": self.risk, "evidence": self.evidence}


@dataclass
class GdprChecklist:
    results: dict  # term -> GdprResult, in checklist order

    @property
    def violations(self):
        return [t for t, r in self.results.items() if r.violated]

    @property
    def compliant(self):
        return not self.violations

    def to_dict(self):
        return {t: r.to_dict() for t, r in self.results.items()}


def load_terms(path=None):
    data = load_json("gdpr_cues.json", path)
    return [GdprTerm(t["term"], t["risk"], t.get("kind", "any"), tuple(t["cues"]), int(t.get("min", 1)))
            for t in data["terms"]]


def _parse_date(raw):
    cleaned = re.sub(r"(\d)(st|nd|rd|th)", r"\1", raw).replace(",", "").replace(".", " ").strip()
    cleaned = re.sub(r"\s+", " ", cleaned)
    for rx, fmts in _DATE_FORMATS:
        if re.fullmatch(rx, raw, re.IGNORECASE):
            for fmt in fmts:
                for cand in (raw, cleaned):
                    try:
                        return datetime.strptime(cand, fmt).date()
                    except ValueError:
                        continue
    return None


def find_timestamp(text, cues):
    for cue in cues:
        for m in re.finditer(cue, text, re.IGNORECASE):
            window = text[m.end():m.end() + DATE_WINDOW]
            for rx, _ in _DATE_FORMATS:
                d = re.search(rx, window, re.IGNORECASE)
                if d and _parse_date(d.group()) is not None:
                    return f"{m.group()} {d.group()}"
    return None


def _evaluate(term, text):
    if term.kind == "timestamp":
        hit = find_timestamp(text, term.cues)
        return (hit is None), (f"matched: {hit}" if hit else "no parseable date near an update/effective cue")
    hits = []
    for cue in term.cues:
        m = re.search(cue, text, re.IGNORECASE)
        if m:
            hits.append(m.group())
    need = term.minimum if term.kind == "min_distinct" else 1
    if len(hits) >= need:
        return False, "matched: " + ", ".join(hits[:need] if need > 1 else hits[:1])
    if term.kind == "min_distinct":
        return True, f"only {len(hits)} of {need} required section cues found"
    return True, "no cue matched"


def check_gdpr(text, terms=None):
    terms = load_terms() if terms is None else terms
    text = normalize_whitespace(text or "")
    results = {}
    for t in terms:
        violated, ev = _evaluate(t, text)
        results[t.term] = GdprResult(violated, t.risk, ev)
    return GdprChecklist(results)
