"""Signature patterns and program queries (call sites, string constants)."""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from ..errors import BadPattern
from .model import INVOKE, MethodSig

EXACT = "exact"
CLASS_PREFIX = "class_prefix"
NAME_SUBSTRING = "name_substring"


@dataclass(frozen=True)
class MethodPattern:
    """Matcher over method signatures.

    Accepted forms::

        Lcom/a/B;->name            exact class and name, any proto
        Lcom/a/B;->name(I)         ... with a proto prefix
        Lcom/a/B;->*               any method of one class
        Lcom/a/  or  Lcom/a/*      any method of any class under a package prefix
        *->name                    exact name, any class
        *->*sub*                   name contains "sub" (case-insensitive), any class
    """

    text: str
    class_exact: Optional[str] = None
    class_prefix: Optional[str] = None
    name: Optional[str] = None
    name_sub: Optional[str] = None
    proto_prefix: Optional[str] = None

    @classmethod
    def parse(cls, text):
        if isinstance(text, MethodPattern):
            return text
        if not isinstance(text, str) or not text.strip():
            raise BadPattern(f"empty method pattern: {text!r}")
        t = text.strip()
        if "->" not in t:
            prefix = t[:-1] if t.endswith("*") else t
            if not prefix.startswith("L") or ";" in prefix[:-1] or " " in prefix:
                raise BadPattern(f"bad class prefix pattern: {text!r}")
            return cls(t, class_prefix=prefix)
        cpart, mpart = t.split("->", 1)
        kw = {}
        if cpart == "*":
            pass
        elif cpart.startswith("L") and cpart.endswith(";") and " " not in cpart:
            kw["class_exact"] = cpart
        elif cpart.startswith("L") and cpart.endswith("*"):
            kw["class_prefix"] = cpart[:-1]
        else:
            raise BadPattern(f"bad class part in pattern: {text!r}")
        if not mpart:
            raise BadPattern(f"missing method name in pattern: {text!r}")
        if "(" in mpart:
            mname, proto = mpart.split("(", 1)
            kw["proto_prefix"] = "(" + proto
        else:
            mname = mpart
        if mname == "*":
            pass
        elif len(mname) > 2 and mname.startswith("*") and mname.endswith("*"):
            kw["name_sub"] = mname[1:-1].lower()
        elif re.fullmatch(r"[\w$<>-]+", mname):
            kw["name"] = mname
        else:
            raise BadPattern(f"bad method name in pattern: {text!r}")
        return cls(t, **kw)

    @property
    def kind(self):
        if self.name_sub is not None:
            return NAME_SUBSTRING
        if self.class_exact is not None and self.name is not None:
            return EXACT
        if self.class_prefix is not None or self.class_exact is not None:
            return CLASS_PREFIX
        return NAME_SUBSTRING

    def matches(self, sig: MethodSig):
        if self.class_exact is not None and sig.class_descriptor != self.class_exact:
            return False
        if self.class_prefix is not None and not sig.class_descriptor.startswith(self.class_prefix):
            return False
        if self.name is not None and sig.name != self.name:
            return False
        if self.name_sub is not None and self.name_sub not in sig.name.lower():
            return False
        if self.proto_prefix is not None and not sig.proto.startswith(self.proto_prefix):
            return False
        return True

    def class_prefix_pattern(self):
        """The class-prefix pattern covering this one (used to widen exact matches)."""
        if self.class_exact is not None:
            return MethodPattern.parse(self.class_exact[:-1])
        return self

    def __str__(self):
        return self.text


def compile_regex(expr):
    try:
        return re.compile(expr)
    except (re.error, TypeError) as exc:
        raise BadPattern(f"bad regular expression {expr!r}: {exc}") from exc


def iter_invocations(program):
    for cls in sorted(program.classes, key=lambda c: c.descriptor):
        for m in sorted(cls.methods, key=lambda m: m.sig):
            if m.body is None:
                continue
            for ins in m.body.instructions:
                if ins.kind == INVOKE:
                    yield m.sig, ins


def find_invocations(program, pattern):
    """Every call site whose target matches ``pattern``, ordered by (class, method, offset)."""
    pat = MethodPattern.parse(pattern)
    return [(caller, ins) for caller, ins in iter_invocations(program) if pat.matches(ins.method)]


def find_strings(program, matcher):
    """Pool strings matching ``matcher`` (re.search) with the methods that load them."""
    rx = matcher if isinstance(matcher, re.Pattern) else compile_regex(matcher)
    out = []
    for s in sorted(set(program.strings)):
        if rx.search(s):
            out.append((s, frozenset(program.string_refs.get(s, ()))))
    return out


def find_methods(program, pattern, defined_only=False):
    """Method signatures (defined, and unless ``defined_only`` also referenced) matching ``pattern``."""
    pat = MethodPattern.parse(pattern)
    sigs = set(program.methods)
    if not defined_only:
        sigs.update(program.method_refs)
    return sorted(s for s in sigs if pat.matches(s))
