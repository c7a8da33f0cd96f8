"""Taint source/sink configuration."""
from __future__ import annotations

import os
from dataclasses import dataclass, field

from ..dex.query import MethodPattern
from ..errors import ConfigError
from ..resources import load_json

DEFAULT_MAX_DEPTH = 5


@dataclass(frozen=True)
class TaintConfig:
    sources: tuple  # MethodPattern, ...
    sinks: tuple
    pii_labels: dict = field(default_factory=dict)  # source pattern text -> label
    entry_points: tuple = ()
    max_depth: int = DEFAULT_MAX_DEPTH
    approximate: frozenset = frozenset()

    def __post_init__(self):
        overlap = {p.text for p in self.sources} & {p.text for p in self.sinks}
        if overlap:
            raise ConfigError(f"patterns used as both source and sink: {sorted(overlap)}")
        if self.max_depth < 0:
            raise ConfigError("max_depth must be >= 0")

    def source_match(self, sig):
        for p in self.sources:
            if p.matches(sig):
                return p
        return None

    def sink_match(self, sig):
        for p in self.sinks:
            if p.matches(sig):
                return p
        return None

    def label_of(self, pattern):
        return self.pii_labels.get(pattern.text if isinstance(pattern, MethodPattern) else pattern, "unlabeled")

    @classmethod
    def build(cls, sources, sinks, entry_points=(), max_depth=DEFAULT_MAX_DEPTH):
        """``sources`` is a list of pattern strings or (pattern, label) pairs."""
        pats, labels = [], {}
        for s in sources:
            text, label = (s, "unlabeled") if isinstance(s, str) else s
            pats.append(MethodPattern.parse(text))
            labels[text] = label
        return cls(tuple(pats), tuple(MethodPattern.parse(s) for s in sinks), labels,
                   tuple(entry_points), max_depth)

    @classmethod
    def from_dict(cls, data):
        try:
            sources = [(s["pattern"], s.get("label", "unlabeled")) for s in data["sources"]]
            sinks = [s["pattern"] if isinstance(s, dict) else s for s in data["sinks"]]
            approx = frozenset(s["pattern"] for s in data["sources"] if s.get("approximate"))
            cfg = cls.build(sources, sinks, data.get("entry_points", ()), int(data.get("max_depth", DEFAULT_MAX_DEPTH)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed taint config: {exc}") from exc
        object.__setattr__(cfg, "approximate", approx)
        return cfg

    @classmethod
    def load(cls, path=None):
        if path is not None and not os.path.isfile(path):
            raise ConfigError(f"taint config not found: {path}")
        return cls.from_dict(load_json("taint_config.json", path))
