"""Biometric API detection and in-app-purchase receipt verification for Unity payloads."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from ..resources import load_json
from .cil import split_qualified

KINDS = ("hand", "eye", "body", "face")
CIL_TIER = "cil-call-graph"
IL2CPP_TIER = "il2cpp-string"

RECEIPT_GETTER = "get_receipt"
LOCAL_VALIDATOR = "CrossPlatformValidator::Validate"


@dataclass(frozen=True)
class BiometricFunction:
    kind: str
    symbol: str
    markers: tuple = ()  # ((text, exact), ...) used against IL2CPP names

    def matches_cil(self, sym):
        t, m = split_qualified(sym)
        return f"{t}.{m}".endswith(self.symbol)


@dataclass(frozen=True)
class BiometricUsage:
    kind: str
    matched_symbol: str
    evidence_tier: str

    def to_dict(self):
        return {"kind": self.kind, "matched_symbol": self.matched_symbol, "evidence_tier": self.evidence_tier}


@dataclass
class IapAssessment:
    uses_iap: bool
    verification: str  # none | local | server | not-applicable
    evidence: list = field(default_factory=list)
    tier: str = ""
    low_confidence: bool = False

    def to_dict(self):
        return {"uses_iap": self.uses_iap, "verification": self.verification, "evidence": list(self.evidence),
                "tier": self.tier, "low_confidence": self.low_confidence}


def load_biometric_table(path=None):
    data = load_json("biometric_functions.json", path)
    out = []
    for f in data["functions"]:
        if f["kind"] not in KINDS:
            raise ValueError(f"unknown biometric kind {f['kind']!r}")
        markers = tuple((m["text"], bool(m.get("exact"))) for m in f.get("il2cpp_markers", ()))
        if not markers:
            markers = ((f["symbol"].rsplit(".", 1)[-1], True),)
        out.append(BiometricFunction(f["kind"], f["symbol"], markers))
    return out


def load_network_table(path=None):
    return list(load_json("network_apis.json", path)["patterns"])


def _marker_hits(names, text, exact):
    if exact:
        return [n for n in names if n == text or n.endswith("." + text)]
    return [n for n in names if text in n]


def detect_biometric_functions(cil=None, il2cpp=None, table=None):
    table = load_biometric_table() if table is None else table
    found = set()
    if cil is not None:
        syms = sorted(cil.symbols())
        for fn in table:
            for s in syms:
                if fn.matches_cil(s):
                    found.add(BiometricUsage(fn.kind, s, CIL_TIER))
    if il2cpp is not None:
        names = sorted(il2cpp.method_names)
        for fn in table:
            hits = [_marker_hits(names, text, exact) for text, exact in fn.markers]
            if all(hits):
                found.add(BiometricUsage(fn.kind, hits[0][0], IL2CPP_TIER))
    return sorted(found, key=lambda u: (KINDS.index(u.kind), u.evidence_tier, u.matched_symbol))


def network_match(pattern, sym):
    """``Ns.Type`` covers every member of that type (and of types named with it as prefix);
    ``Ns.Type::Method`` is exact."""
    if "::" in pattern:
        return sym == pattern
    t, _ = split_qualified(sym)
    return t.startswith(pattern)


def _is_receipt_getter(sym):
    return split_qualified(sym)[1] == RECEIPT_GETTER


def _is_validator(sym):
    return sym == LOCAL_VALIDATOR or sym.endswith("." + LOCAL_VALIDATOR)


def _bfs_paths(edges, roots):
    """Shortest predecessor chains from ``roots`` over ``edges``."""
    parent = {r: None for r in roots}
    queue = deque(roots)
    while queue:
        m = queue.popleft()
        for callee in sorted(edges.get(m, ())):
            if callee not in parent:
                parent[callee] = m
                queue.append(callee)
    return parent


def _chain(parent, node):
    out = []
    while node is not None:
        out.append(node)
        node = parent[node]
    return out[::-1]


def _assess_cil(cil, network):
    edges = cil.call_edges
    if not any(_is_receipt_getter(s) for s in cil.symbols()):
        return IapAssessment(False, "not-applicable", [], CIL_TIER)
    roots = sorted(m for m, callees in edges.items() if any(_is_receipt_getter(c) for c in callees))
    parent = _bfs_paths(edges, roots)
    reached = sorted(parent, key=lambda m: (len(_chain(parent, m)), m))
    for test, verdict in ((_is_validator, "local"),
                          (lambda s: any(network_match(p, s) for p in network), "server")):
        for m in reached:
            hits = sorted(c for c in edges.get(m, ()) if test(c))
            if hits:
                return IapAssessment(True, verdict, _chain(parent, m) + [hits[0]], CIL_TIER)
    return IapAssessment(True, "none", roots, CIL_TIER)


def _assess_il2cpp(sym, network):
    names = sym.method_names
    if RECEIPT_GETTER not in names:
        return IapAssessment(False, "not-applicable", [], sym.tier)
    validator_type = LOCAL_VALIDATOR.split("::")[0]
    if "Validate" in names and any(validator_type in n for n in names):
        ev = [RECEIPT_GETTER, "Validate"] + sorted(n for n in names if validator_type in n)[:1]
        return IapAssessment(True, "local", ev, sym.tier)
    net_hits = sorted({n for n in names for p in network if p.rsplit(".", 1)[-1].split("::")[0] in n})
    if net_hits:
        return IapAssessment(True, "server", [RECEIPT_GETTER] + net_hits, sym.tier, low_confidence=True)
    return IapAssessment(True, "none", [RECEIPT_GETTER], sym.tier)


def assess_iap(cil=None, il2cpp=None, network_api_table=None):
    network = sorted(set(load_network_table() if network_api_table is None else network_api_table))
    if cil is not None:
        res = _assess_cil(cil, network)
        if res.uses_iap or il2cpp is None:
            return res
    if il2cpp is not None:
        return _assess_il2cpp(il2cpp, network)
    return IapAssessment(False, "not-applicable", [], "")
