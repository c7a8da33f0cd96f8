"""Method-level intermediate representation of Dalvik bytecode."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

# Instruction kinds. Only these are modelled; everything else is OTHER with
# def/use metadata.
INVOKE = "invoke"
CONST_STRING = "const-string"
MOVE = "move"
MOVE_RESULT = "move-result"
RETURN = "return"
BRANCH = "branch"
OTHER = "other"

# pseudo-register holding the value produced by the last invoke or
# filled-new-array, consumed by move-result*
RESULT_REG = -1


@dataclass(frozen=True, order=True)
class MethodSig:
    class_descriptor: str
    name: str
    proto: str

    def __str__(self):
        return f"{self.class_descriptor}->{self.name}{self.proto}"

    @property
    def short(self):
        return f"{self.name}{self.proto}"

    @classmethod
    def parse(cls, text):
        cls_part, rest = text.split("->", 1)
        paren = rest.index("(")
        return cls(cls_part, rest[:paren], rest[paren:])

    def param_types(self):
        return split_descriptor_list(self.proto[1:self.proto.index(")")])


def split_descriptor_list(text):
    out, i = [], 0
    while i < len(text):
        j = i
        while text[j] == "[":
            j += 1
        if text[j] == "L":
            j = text.index(";", j)
        out.append(text[i:j + 1])
        i = j + 1
    return out


@dataclass(frozen=True)
class Instruction:
    offset: int
    kind: str
    opcode: int
    name: str
    method: Optional[MethodSig] = None
    args: tuple = ()
    string: Optional[str] = None
    dst: Optional[int] = None
    src: Optional[int] = None
    targets: tuple = ()
    falls_through: bool = True
    defs: tuple = ()
    uses: tuple = ()
    weak: bool = False
    field: Optional[str] = None
    field_op: Optional[str] = None
    is_static: bool = False
    width: int = 1

    def registers(self):
        regs = set(self.args) | set(self.defs) | set(self.uses)
        for r in (self.dst, self.src):
            if r is not None:
                regs.add(r)
        regs.discard(RESULT_REG)
        return regs


@dataclass(frozen=True)
class TryBlock:
    start: int
    end: int
    handlers: tuple  # ((exception type or None, handler offset), ...)

    @property
    def handler(self):
        return self.handlers[0][1] if self.handlers else None


@dataclass(frozen=True)
class MethodBody:
    registers: int
    ins_size: int
    instructions: tuple
    try_blocks: tuple = ()

    def param_registers(self):
        return range(self.registers - self.ins_size, self.registers)


@dataclass(frozen=True)
class EncodedMethod:
    sig: MethodSig
    access_flags: int
    body: Optional[MethodBody]

    @property
    def is_static(self):
        return bool(self.access_flags & 0x8)


@dataclass(frozen=True)
class ClassDef:
    descriptor: str
    superclass: Optional[str]
    interfaces: tuple
    access_flags: int
    methods: tuple
    member: int = 0


@dataclass
class DexProgram:
    strings: list = field(default_factory=list)
    types: list = field(default_factory=list)
    method_refs: list = field(default_factory=list)
    classes: list = field(default_factory=list)
    call_graph: dict = field(default_factory=dict)
    diagnostics: list = field(default_factory=list)

    def __post_init__(self):
        self._index()

    def _index(self):
        self.methods = {}
        self.string_refs = {}
        for cls in self.classes:
            for m in cls.methods:
                self.methods.setdefault(m.sig, m)
                if m.body is None:
                    continue
                for ins in m.body.instructions:
                    if ins.kind == CONST_STRING:
                        self.string_refs.setdefault(ins.string, set()).add(m.sig)
        self.class_names = {c.descriptor for c in self.classes}

    def body_of(self, sig):
        m = self.methods.get(sig)
        return m.body if m is not None else None

    def defined_methods(self):
        return sorted(self.methods)
