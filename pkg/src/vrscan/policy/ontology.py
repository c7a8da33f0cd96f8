"""Data-type subsumption ontology and entity classes for policy statements."""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from ..errors import ConfigError
from ..resources import load_json

FIRST_PARTY = "first party"
THIRD_PARTY = "third party"
NAMED_THIRD_PARTY = "named third party"
ENTITY_CLASSES = (FIRST_PARTY, THIRD_PARTY, NAMED_THIRD_PARTY)


def _phrase_regex(phrases):
    alts = sorted({p.lower() for p in phrases}, key=lambda p: (-len(p), p))
    body = "|".join(r"\s+".join(map(re.escape, p.split())) for p in alts)
    return re.compile(r"(?<![\w-])(?:%s)s?(?![\w-])" % body, re.IGNORECASE)


@dataclass
class DataOntology:
    parents: dict  # node -> tuple of parent nodes (general side)
    synonyms: dict  # node -> tuple of phrases, canonical name included
    entities: dict  # entity name -> class
    entity_synonyms: dict  # entity name -> tuple of phrases
    version: int = 1
    _anc: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for n, ps in self.parents.items():
            for p in ps:
                if p not in self.parents:
                    raise ConfigError(f"ontology: {n!r} has unknown parent {p!r}")
        for cls in self.entities.values():
            if cls not in ENTITY_CLASSES:
                raise ConfigError(f"ontology: unknown entity class {cls!r}")
        self._check_acyclic()
        owner = {}
        for kind, table in (("data type", self.synonyms), ("entity", self.entity_synonyms)):
            for n, syns in table.items():
                for s in syns:
                    key = s.lower()
                    if key in owner and owner[key] != (kind, n):
                        raise ConfigError(f"ontology: synonym {s!r} shared by {owner[key][1]!r} and {n!r}")
                    owner[key] = (kind, n)
        self._data_rx = [(n, _phrase_regex(s)) for n, s in sorted(self.synonyms.items())]
        self._entity_rx = [(n, _phrase_regex(s)) for n, s in sorted(self.entity_synonyms.items())]

    def _check_acyclic(self):
        state = {}

        def visit(n, stack):
            st = state.get(n)
            if st == 1:
                raise ConfigError(f"ontology: subsumption cycle through {' -> '.join(stack + [n])}")
            if st == 2:
                return
            state[n] = 1
            for p in self.parents[n]:
                visit(p, stack + [n])
            state[n] = 2

        for n in sorted(self.parents):
            visit(n, [])

    @property
    def nodes(self):
        return set(self.parents)

    def edges(self):
        """(general, specific) pairs."""
        return sorted((p, n) for n, ps in self.parents.items() for p in ps)

    def ancestors(self, node):
        """Strict ancestors (more general types) of ``node``."""
        got = self._anc.get(node)
        if got is None:
            out, stack = set(), list(self.parents.get(node, ()))
            while stack:
                p = stack.pop()
                if p not in out:
                    out.add(p)
                    stack.extend(self.parents[p])
            got = self._anc[node] = frozenset(out)
        return got

    def subsumes(self, general, specific):
        return general in self.ancestors(specific)

    def entity_class(self, entity):
        return self.entities.get(entity, THIRD_PARTY)

    @staticmethod
    def _longest(hits):
        hits.sort(key=lambda h: (h[0], -(h[1] - h[0]), h[2]))
        out, end = [], -1
        for h in hits:
            if h[0] >= end:
                out.append(h)
                end = h[1]
        return out

    def find_data_types(self, text):
        """Non-overlapping (start, end, node) mentions, longest match first."""
        return self._longest([(m.start(), m.end(), n) for n, rx in self._data_rx for m in rx.finditer(text)])

    def find_entities(self, text):
        return self._longest([(m.start(), m.end(), n) for n, rx in self._entity_rx for m in rx.finditer(text)])

    @classmethod
    def from_dict(cls, data):
        try:
            parents = {d["name"]: tuple(d.get("parents", ())) for d in data["data_types"]}
            syn = {d["name"]: tuple([d["name"]] + list(d.get("synonyms", ()))) for d in data["data_types"]}
            ents = {e["name"]: e["class"] for e in data["entities"]}
            esyn = {e["name"]: tuple([e["name"]] + list(e.get("synonyms", ()))) for e in data["entities"]}
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"ontology: malformed data ({exc})") from exc
        if len(parents) != len(data["data_types"]):
            raise ConfigError("ontology: duplicate data type name")
        return cls(parents, syn, ents, esyn, int(data.get("version", 1)))

    @classmethod
    def load(cls, path=None):
        return cls.from_dict(load_json("ontology.json", path))


_DEFAULT = None


def default_ontology():
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = DataOntology.load()
    return _DEFAULT
