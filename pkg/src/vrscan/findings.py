from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

SEVERITIES = ("high", "medium", "info")


@dataclass(frozen=True, order=True)
class Location:
    """Where a finding was observed. ``method`` and ``offset`` are absent for
    class-level or manifest-level evidence."""

    class_name: str
    method: Optional[str] = None
    offset: Optional[int] = None

    def to_dict(self):
        return {"class": self.class_name, "method": self.method, "offset": self.offset}


@dataclass(frozen=True)
class Finding:
    rule_id: str
    category: str
    severity: str
    location: Optional[Location] = None
    evidence: tuple = ()
    polarity_note: tuple = ()

    def sort_key(self):
        loc = self.location
        return (
            self.category,
            self.rule_id,
            loc is not None,
            loc.class_name if loc else "",
            (loc.method or "") if loc else "",
            (loc.offset if loc and loc.offset is not None else -1),
            self.evidence,
        )

    def to_dict(self):
        return {
            "rule_id": self.rule_id,
            "category": self.category,
            "severity": self.severity,
            "location": self.location.to_dict() if self.location else None,
            "evidence": list(self.evidence),
            "polarity_note": list(self.polarity_note),
        }


def sort_findings(findings):
    return sorted(findings, key=Finding.sort_key)
