"""Cross-checks between manifest permissions, code evidence and policy statements."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .errors import ConfigError
from .resources import load_json

POLICY = "policy"
MANIFEST = "manifest"
NEGATED_WARNING = "policy explicitly denies collecting or sharing this data"


@dataclass(frozen=True)
class Gap:
    subject: str
    evidence: tuple
    missing_side: str
    warning: Optional[str] = None

    def to_dict(self):
        return {"subject": self.subject, "evidence": list(self.evidence), "missing_side": self.missing_side,
                "warning": self.warning}


@dataclass
class MappingTable:
    permission_to_datatype: dict
    pii_keyword_to_datatype: dict
    biometric_kind_to_datatype: dict
    biometric_kind_to_permission: dict = field(default_factory=dict)

    def validate(self, ontology):
        nodes = ontology.nodes
        for table in (self.permission_to_datatype, self.pii_keyword_to_datatype, self.biometric_kind_to_datatype):
            for k, v in table.items():
                if v not in nodes:
                    raise ConfigError(f"mapping: {k!r} targets {v!r}, which is not an ontology node")
        return self

    @classmethod
    def load(cls, path=None, ontology=None):
        d = load_json("mapping.json", path)
        m = cls(dict(d["permission_to_datatype"]), dict(d["pii_keyword_to_datatype"]),
                dict(d["biometric_kind_to_datatype"]), dict(d.get("biometric_kind_to_permission", {})))
        if ontology is not None:
            m.validate(ontology)
        return m


@dataclass
class ConsistencyReport:
    permission_vs_policy: list = field(default_factory=list)
    pii_code_vs_policy: list = field(default_factory=list)
    biometric_code_vs_policy: list = field(default_factory=list)
    biometric_code_vs_manifest: list = field(default_factory=list)

    def to_dict(self):
        return {k: [g.to_dict() for g in getattr(self, k)] for k in GAP_CLASSES}


GAP_CLASSES = ("permission_vs_policy", "pii_code_vs_policy", "biometric_code_vs_policy", "biometric_code_vs_manifest")


def _coverage(datatype, statements, ontology):
    """(covered, denied) for ``datatype``: a statement about the type or one of its ancestors."""
    scope = {datatype} | set(ontology.ancestors(datatype))
    covered = any(s.positive and s.data_type in scope for s in statements)
    denied = any(not s.positive and s.data_type in scope for s in statements)
    return covered, denied


def _policy_gaps(subjects, table, statements, ontology):
    """``subjects``: {subject: [evidence, ...]}."""
    out = []
    for subj in sorted(subjects):
        dt = table.get(subj)
        if dt is None:
            continue
        covered, denied = _coverage(dt, statements, ontology)
        if not covered:
            out.append(Gap(subj, tuple(sorted(set(subjects[subj]))), POLICY, NEGATED_WARNING if denied else None))
    return out


def check_permission_policy(summary, statements, mapping, ontology):
    subjects = {p: ["AndroidManifest.xml"] for p in summary.permission_names() if p in mapping.permission_to_datatype}
    return _policy_gaps(subjects, mapping.permission_to_datatype, statements, ontology)


def check_pii_policy(usages, statements, mapping, ontology):
    subjects = {}
    for u in usages:
        subjects.setdefault(u.keyword, []).append(str(u.method))
    return _policy_gaps(subjects, mapping.pii_keyword_to_datatype, statements, ontology)


def check_biometric_policy(usages, statements, mapping, ontology):
    subjects = {}
    for u in usages:
        subjects.setdefault(u.kind, []).append(f"{u.evidence_tier}:{u.matched_symbol}")
    return _policy_gaps(subjects, mapping.biometric_kind_to_datatype, statements, ontology)


def check_biometric_permission(usages, summary, mapping=None):
    perms = (mapping.biometric_kind_to_permission if mapping is not None and mapping.biometric_kind_to_permission
             else {k: f"com.oculus.permission.{k.upper()}_TRACKING" for k in ("hand", "eye", "body", "face")})
    declared = summary.permission_names() if summary is not None else set()
    out = []
    for kind in sorted({u.kind for u in usages}):
        perm = perms.get(kind)
        if perm is not None and perm not in declared:
            out.append(Gap(kind, (f"missing {perm}",), MANIFEST))
    return out


def check_consistency(summary, statements, pii_usages, biometric_usages, mapping, ontology):
    statements = list(statements or ())
    return ConsistencyReport(
        check_permission_policy(summary, statements, mapping, ontology) if summary is not None else [],
        check_pii_policy(pii_usages, statements, mapping, ontology),
        check_biometric_policy(biometric_usages, statements, mapping, ontology),
        check_biometric_permission(biometric_usages, summary, mapping),
    )
