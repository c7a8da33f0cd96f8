"""Data-driven vulnerability rules evaluated over a DEX program.

Rules file format (JSON)::

    {"format": "vrscan-rules", "version": "1", "rules": [
        {"id": "...", "category": "SDI", "severity": "medium",
         "polarity": "presence", "combine": "any-of",
         "predicates": [
            {"kind": "method", "pattern": "Lcls;->name", "where": "invoked"},
            {"kind": "string", "regex": "...", "exclude": ["..."]},
            {"kind": "cooccur", "pattern": "...", "regex": "...", "scope": "same-class"},
            {"kind": "trackers"},
            {"kind": "pii", "keywords": ["user", "id"], "segment_keywords": ["id"]}]}]}

``where`` is ``invoked`` (call sites, default) or ``defined`` (method bodies in
the program). ``scope`` is one of same-method, same-class, whole-program.
"""
from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from typing import Optional

from .dex.model import CONST_STRING
from .dex.query import MethodPattern, compile_regex, iter_invocations
from .errors import BadPattern, ConfigError, DuplicateRuleId, RuleError, UnknownCategory
from .findings import SEVERITIES, Finding, Location, sort_findings
from .resources import load_json

CATEGORIES = ("SDI", "ICV", "IRG", "IWI", "RWD", "IEF", "IHF", "RD", "IPD", "TRACKER", "PII")
TABLE_CATEGORIES = CATEGORIES[:9]
SCOPES = ("same-method", "same-class", "whole-program")
DEFAULT_PII_KEYWORDS = ("user", "password", "username", "phone", "id", "email")


@dataclass(frozen=True)
class Predicate:
    kind: str  # method | string | cooccur | trackers | pii
    pattern: Optional[MethodPattern] = None
    regex: Optional[re.Pattern] = None
    scope: str = "whole-program"
    where: str = "invoked"
    exclude: tuple = ()
    keywords: tuple = ()
    segment_keywords: tuple = ()

    def describe(self):
        if self.kind == "method":
            return f"{self.where} method {self.pattern}"
        if self.kind == "string":
            return f"string /{self.regex.pattern}/"
        if self.kind == "cooccur":
            return f"call {self.pattern} with string /{self.regex.pattern}/ in {self.scope}"
        if self.kind == "pii":
            return "pii keywords " + ",".join(self.keywords)
        return self.kind


@dataclass(frozen=True)
class Rule:
    id: str
    category: str
    severity: str
    polarity: str = "presence"
    combine: str = "any-of"
    predicates: tuple = ()
    description: str = ""


@dataclass(frozen=True)
class PiiUsage:
    keyword: str
    method: object  # MethodSig


@dataclass
class TrackerDb:
    trackers: list = field(default_factory=list)  # [(name, (prefix, ...))]
    version: str = ""

    @classmethod
    def load(cls, path=None):
        data = load_json("trackers.json", path)
        try:
            entries = [(t["name"], tuple(t["class_prefixes"])) for t in data["trackers"]]
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed tracker db: {exc}") from exc
        if not entries:
            raise ConfigError("tracker db is empty")
        return cls(entries, str(data.get("version", "")))


def _predicate(raw, rule_id):
    if not isinstance(raw, dict) or "kind" not in raw:
        raise BadPattern(f"{rule_id}: predicate must be an object with a kind")
    kind = raw["kind"]
    try:
        if kind == "method":
            where = raw.get("where", "invoked")
            if where not in ("invoked", "defined"):
                raise BadPattern(f"{rule_id}: bad 'where' value {where!r}")
            return Predicate("method", pattern=MethodPattern.parse(raw["pattern"]), where=where)
        if kind == "string":
            return Predicate("string", regex=compile_regex(raw["regex"]), exclude=tuple(raw.get("exclude", ())))
        if kind == "cooccur":
            scope = raw.get("scope", "same-method")
            if scope not in SCOPES:
                raise BadPattern(f"{rule_id}: bad co-occurrence scope {scope!r}")
            return Predicate("cooccur", pattern=MethodPattern.parse(raw["pattern"]),
                             regex=compile_regex(raw["regex"]), scope=scope, exclude=tuple(raw.get("exclude", ())))
        if kind == "trackers":
            return Predicate("trackers")
        if kind == "pii":
            kws = tuple(raw.get("keywords", DEFAULT_PII_KEYWORDS))
            if any(k != k.lower() or not k for k in kws):
                raise BadPattern(f"{rule_id}: PII keywords must be non-empty lowercase")
            return Predicate("pii", keywords=kws, segment_keywords=tuple(raw.get("segment_keywords", ("id",))))
    except KeyError as exc:
        raise BadPattern(f"{rule_id}: predicate missing field {exc}") from exc
    raise BadPattern(f"{rule_id}: unknown predicate kind {kind!r}")


def parse_ruleset(data):
    if not isinstance(data, dict) or not isinstance(data.get("rules"), list):
        raise RuleError("rules document must be an object with a 'rules' list")
    rules, seen = [], set()
    for raw in data["rules"]:
        rid = raw.get("id")
        if not rid or not isinstance(rid, str):
            raise RuleError("rule without an id")
        if rid in seen:
            raise DuplicateRuleId(f"duplicate rule id {rid}")
        seen.add(rid)
        cat = raw.get("category")
        if cat not in CATEGORIES:
            raise UnknownCategory(f"{rid}: unknown category {cat!r}")
        sev = raw.get("severity", "medium")
        if sev not in SEVERITIES:
            raise RuleError(f"{rid}: unknown severity {sev!r}")
        pol = raw.get("polarity", "presence")
        if pol not in ("presence", "absence"):
            raise RuleError(f"{rid}: unknown polarity {pol!r}")
        if pol == "absence" and cat != "RD":
            raise RuleError(f"{rid}: absence polarity is reserved for RD rules")
        comb = raw.get("combine", "any-of")
        if comb not in ("any-of", "all-of"):
            raise RuleError(f"{rid}: unknown combine mode {comb!r}")
        preds = tuple(_predicate(p, rid) for p in raw.get("predicates", ()))
        if not preds:
            raise RuleError(f"{rid}: rule has no predicates")
        rules.append(Rule(rid, cat, sev, pol, comb, preds, raw.get("description", "")))
    return rules


def load_ruleset(source=None):
    """Load rules from a path, JSON text or parsed dict; the bundled default when ``source`` is None."""
    if source is None:
        data = load_json("default_rules.json")
    elif isinstance(source, dict):
        data = source
    elif isinstance(source, (str, os.PathLike)) and os.path.isfile(source):
        data = load_json(os.path.basename(str(source)), str(source))
    else:
        try:
            data = json.loads(source)
        except (TypeError, json.JSONDecodeError) as exc:
            raise ConfigError(f"rules source is neither a file nor JSON: {exc}") from exc
    return parse_ruleset(data)


# -- matching ----------------------------------------------------------------


def _loc(sig, offset=None):
    return Location(sig.class_descriptor, sig.short, offset)


def _string_hits(rx, exclude, s):
    for m in rx.finditer(s):
        if m.group(0) not in exclude:
            return True
    return False


def _string_sites(program, pred):
    """(method sig, offset, string) for every const-string load matching the predicate."""
    out = []
    for sig in program.defined_methods():
        body = program.body_of(sig)
        if body is None:
            continue
        for ins in body.instructions:
            if ins.kind == CONST_STRING and _string_hits(pred.regex, pred.exclude, ins.string):
                out.append((sig, ins.offset, ins.string))
    return out


def _match_predicate(program, pred, ctx):
    """Return a list of (Location, evidence tuple) matches."""
    if pred.kind == "method":
        if pred.where == "defined":
            return [(_loc(sig), (str(sig),)) for sig in program.defined_methods()
                    if program.body_of(sig) is not None and pred.pattern.matches(sig)]
        return [(_loc(caller, ins.offset), (str(ins.method),))
                for caller, ins in ctx["invocations"] if pred.pattern.matches(ins.method)]
    if pred.kind == "string":
        return [(_loc(sig, off), (s,)) for sig, off, s in _string_sites(program, pred)]
    if pred.kind == "cooccur":
        sites = _string_sites(program, pred)
        out = []
        for caller, ins in ctx["invocations"]:
            if not pred.pattern.matches(ins.method):
                continue
            if pred.scope == "same-method":
                strs = sorted({s for sig, _, s in sites if sig == caller})
            elif pred.scope == "same-class":
                strs = sorted({s for sig, _, s in sites if sig.class_descriptor == caller.class_descriptor})
            else:
                strs = sorted({s for _, _, s in sites})
            if strs:
                out.append((_loc(caller, ins.offset), (str(ins.method),) + tuple(strs)))
        return out
    raise RuleError(f"predicate kind {pred.kind} is not location-based")


def _any_pool_match(program, pred, ctx):
    """Program-wide indicator test used by absence rules (string pool, not only loads)."""
    if pred.kind == "string":
        return any(_string_hits(pred.regex, pred.exclude, s) for s in program.strings)
    if pred.kind == "method" and pred.where == "invoked":
        return any(pred.pattern.matches(s) for s in program.method_refs)
    return bool(_match_predicate(program, pred, ctx))


def segments(name):
    """Split an identifier on camelCase, snake_case and digit boundaries, lowercased."""
    parts = re.findall(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+|[A-Z]+|\d+", name)
    return [p.lower() for p in parts]


def find_pii_methods(program, keywords=DEFAULT_PII_KEYWORDS, segment_keywords=("id",)):
    sigs = set(program.methods) | set(program.method_refs)
    out = []
    for sig in sorted(sigs):
        lname = sig.name.lower()
        segs = None
        for kw in keywords:
            if kw in segment_keywords:
                if segs is None:
                    segs = segments(sig.name)
                hit = kw in segs
            else:
                hit = kw in lname
            if hit:
                out.append(PiiUsage(kw, sig))
    return out


def _tracker_hits(program, tracker_db):
    names = sorted(program.class_names | {s.class_descriptor for s in program.method_refs})
    hits = []
    for name, prefixes in tracker_db.trackers:
        matched = [c for c in names if c.startswith(prefixes)]
        if matched:
            hits.append((name, matched))
    return hits


def detect_trackers(program, tracker_db=None, rule_id="TRACKER-LIBRARY", severity="info"):
    if tracker_db is None:
        tracker_db = TrackerDb.load()
    elif isinstance(tracker_db, list):
        tracker_db = TrackerDb([(t["name"], tuple(t["class_prefixes"])) for t in tracker_db])
    if not tracker_db.trackers:
        raise ConfigError("tracker db is empty")
    out = []
    for name, matched in _tracker_hits(program, tracker_db):
        out.append(Finding(rule_id, "TRACKER", severity, Location(matched[0]), (name, matched[0])))
    return sort_findings(out)


def evaluate_rules(program, rules=None, tracker_db=None):
    """Evaluate ``rules`` (default ruleset when None) and return sorted findings."""
    if rules is None:
        rules = load_ruleset()
    ctx = {"invocations": list(iter_invocations(program))}
    findings = []
    for rule in rules:
        if rule.polarity == "absence":
            matched = [_any_pool_match(program, p, ctx) for p in rule.predicates]
            ok = all(matched) if rule.combine == "all-of" else any(matched)
            if not ok:
                findings.append(Finding(rule.id, rule.category, rule.severity, None, (),
                                        tuple(p.describe() for p in rule.predicates)))
            continue
        per_pred = []
        for p in rule.predicates:
            if p.kind == "trackers":
                per_pred.append([(f.location, f.evidence)
                                 for f in detect_trackers(program, tracker_db, rule.id, rule.severity)])
            elif p.kind == "pii":
                per_pred.append([(_loc(u.method), (u.keyword, str(u.method)))
                                 for u in find_pii_methods(program, p.keywords, p.segment_keywords)])
            else:
                per_pred.append(_match_predicate(program, p, ctx))
        if rule.combine == "all-of" and not all(per_pred):
            continue
        merged = {}
        for matches in per_pred:
            for loc, ev in matches:
                prev = merged.get(loc, ())
                merged[loc] = prev + tuple(e for e in ev if e not in prev)
        for loc, ev in merged.items():
            findings.append(Finding(rule.id, rule.category, rule.severity, loc, ev))
    return sort_findings(findings)


def has_rd_indicator(program, rules=None):
    """True when some RD predicate matches (so no "No RD" finding is due)."""
    rules = load_ruleset() if rules is None else rules
    ctx = {"invocations": list(iter_invocations(program))}
    return any(_any_pool_match(program, p, ctx) for r in rules if r.category == "RD" for p in r.predicates)
