"""ECMA-335 metadata reader for managed assemblies (PE/CLI).

Reads enough of the metadata tables to name types and methods and to pull
call/callvirt/newobj tokens out of IL method bodies.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

from ..errors import MalformedMetadata, NoCliHeader, NotPe

# coded index definitions: (tag bits, [table ids])
_CODED = {
    "TypeDefOrRef": (2, [0x02, 0x01, 0x1B]),
    "HasConstant": (2, [0x04, 0x08, 0x17]),
    "HasCustomAttribute": (5, [0x06, 0x04, 0x01, 0x02, 0x08, 0x09, 0x0A, 0x00, 0x0E, 0x17, 0x14, 0x11,
                               0x1A, 0x1B, 0x20, 0x23, 0x26, 0x27, 0x28, 0x2A, 0x2C, 0x2B]),
    "HasFieldMarshal": (1, [0x04, 0x08]),
    "HasDeclSecurity": (2, [0x02, 0x06, 0x20]),
    "MemberRefParent": (3, [0x02, 0x01, 0x1A, 0x06, 0x1B]),
    "HasSemantics": (1, [0x14, 0x17]),
    "MethodDefOrRef": (1, [0x06, 0x0A]),
    "MemberForwarded": (1, [0x04, 0x06]),
    "Implementation": (2, [0x26, 0x23, 0x27]),
    "CustomAttributeType": (3, [None, None, 0x06, 0x0A, None]),
    "ResolutionScope": (2, [0x00, 0x1A, 0x23, 0x01]),
    "TypeOrMethodDef": (1, [0x02, 0x06]),
}

# column kinds: integers are fixed byte widths; "s" string, "g" guid, "b" blob,
# ("t", table) simple index, ("c", coded) coded index
_SCHEMA = {
    0x00: ("Module", [2, "s", "g", "g", "g"]),
    0x01: ("TypeRef", [("c", "ResolutionScope"), "s", "s"]),
    0x02: ("TypeDef", [4, "s", "s", ("c", "TypeDefOrRef"), ("t", 0x04), ("t", 0x06)]),
    0x03: ("FieldPtr", [("t", 0x04)]),
    0x04: ("Field", [2, "s", "b"]),
    0x05: ("MethodPtr", [("t", 0x06)]),
    0x06: ("MethodDef", [4, 2, 2, "s", "b", ("t", 0x08)]),
    0x07: ("ParamPtr", [("t", 0x08)]),
    0x08: ("Param", [2, 2, "s"]),
    0x09: ("InterfaceImpl", [("t", 0x02), ("c", "TypeDefOrRef")]),
    0x0A: ("MemberRef", [("c", "MemberRefParent"), "s", "b"]),
    0x0B: ("Constant", [2, ("c", "HasConstant"), "b"]),
    0x0C: ("CustomAttribute", [("c", "HasCustomAttribute"), ("c", "CustomAttributeType"), "b"]),
    0x0D: ("FieldMarshal", [("c", "HasFieldMarshal"), "b"]),
    0x0E: ("DeclSecurity", [2, ("c", "HasDeclSecurity"), "b"]),
    0x0F: ("ClassLayout", [2, 4, ("t", 0x02)]),
    0x10: ("FieldLayout", [4, ("t", 0x04)]),
    0x11: ("StandAloneSig", ["b"]),
    0x12: ("EventMap", [("t", 0x02), ("t", 0x14)]),
    0x13: ("EventPtr", [("t", 0x14)]),
    0x14: ("Event", [2, "s", ("c", "TypeDefOrRef")]),
    0x15: ("PropertyMap", [("t", 0x02), ("t", 0x17)]),
    0x16: ("PropertyPtr", [("t", 0x17)]),
    0x17: ("Property", [2, "s", "b"]),
    0x18: ("MethodSemantics", [2, ("t", 0x06), ("c", "HasSemantics")]),
    0x19: ("MethodImpl", [("t", 0x02), ("c", "MethodDefOrRef"), ("c", "MethodDefOrRef")]),
    0x1A: ("ModuleRef", ["s"]),
    0x1B: ("TypeSpec", ["b"]),
    0x1C: ("ImplMap", [2, ("c", "MemberForwarded"), "s", ("t", 0x1A)]),
    0x1D: ("FieldRVA", [4, ("t", 0x04)]),
    0x1E: ("EncLog", [4, 4]),
    0x1F: ("EncMap", [4]),
    0x20: ("Assembly", [4, 2, 2, 2, 2, 4, "b", "s", "s"]),
    0x21: ("AssemblyProcessor", [4]),
    0x22: ("AssemblyOS", [4, 4, 4]),
    0x23: ("AssemblyRef", [2, 2, 2, 2, 4, "b", "s", "s", "b"]),
    0x24: ("AssemblyRefProcessor", [4, ("t", 0x23)]),
    0x25: ("AssemblyRefOS", [4, 4, 4, ("t", 0x23)]),
    0x26: ("File", [4, "s", "b"]),
    0x27: ("ExportedType", [4, 4, "s", "s", ("c", "Implementation")]),
    0x28: ("ManifestResource", [4, 4, "s", ("c", "Implementation")]),
    0x29: ("NestedClass", [("t", 0x02), ("t", 0x02)]),
    0x2A: ("GenericParam", [2, 2, ("c", "TypeOrMethodDef"), "s"]),
    0x2B: ("MethodSpec", [("c", "MethodDefOrRef"), "b"]),
    0x2C: ("GenericParamConstraint", [("t", 0x2A), ("c", "TypeDefOrRef")]),
}

# IL operand sizes; 0xFF marks the variable-length switch operand
_OPERAND_1 = {0x0E: 1, 0x0F: 1, 0x10: 1, 0x11: 1, 0x12: 1, 0x13: 1, 0x1F: 1, 0x20: 4, 0x21: 8, 0x22: 4,
              0x23: 8, 0x27: 4, 0x28: 4, 0x29: 4, 0x45: 0xFF, 0x6F: 4, 0x70: 4, 0x71: 4, 0x72: 4, 0x73: 4,
              0x74: 4, 0x75: 4, 0x79: 4, 0x7B: 4, 0x7C: 4, 0x7D: 4, 0x7E: 4, 0x7F: 4, 0x80: 4, 0x81: 4,
              0x8C: 4, 0x8D: 4, 0x8F: 4, 0xA3: 4, 0xA4: 4, 0xA5: 4, 0xC2: 4, 0xC6: 4, 0xD0: 4, 0xDD: 4,
              0xDE: 1}
_OPERAND_1.update({op: 1 for op in range(0x2B, 0x38)})  # short branches
_OPERAND_1.update({op: 4 for op in range(0x38, 0x45)})  # long branches
_OPERAND_FE = {0x06: 4, 0x07: 4, 0x09: 2, 0x0A: 2, 0x0B: 2, 0x0C: 2, 0x0D: 2, 0x0E: 2, 0x12: 1, 0x15: 4,
               0x16: 4, 0x19: 1, 0x1C: 4}
CALL_OPCODES = {0x28: "call", 0x6F: "callvirt", 0x73: "newobj"}


@dataclass
class CilModule:
    type_defs: list = field(default_factory=list)  # qualified type names
    method_defs: list = field(default_factory=list)  # (declaring type, name, token)
    member_refs: list = field(default_factory=list)  # (type, name)
    call_edges: dict = field(default_factory=dict)  # "Type::Method" -> set of "Type::Method"
    diagnostics: list = field(default_factory=list)

    def symbols(self):
        """Qualified names of every defined and referenced method."""
        out = {f"{t}::{n}" for t, n, _ in self.method_defs}
        out.update(f"{t}::{n}" for t, n in self.member_refs)
        return out

    def defined(self):
        return {f"{t}::{n}" for t, n, _ in self.method_defs}


def qualified(namespace, name):
    return f"{namespace}.{name}" if namespace else name


def split_qualified(sym):
    t, _, m = sym.partition("::")
    return t, m


class _Pe:
    def __init__(self, data):
        self.data = data
        if len(data) < 0x40 or data[:2] != b"MZ":
            raise NotPe("missing MZ header")
        (lfanew,) = struct.unpack_from("<I", data, 0x3C)
        if lfanew + 24 > len(data) or data[lfanew:lfanew + 4] != b"PE\0\0":
            raise NotPe("missing PE signature")
        coff = lfanew + 4
        nsect, = struct.unpack_from("<H", data, coff + 2)
        opt_size, = struct.unpack_from("<H", data, coff + 16)
        opt = coff + 20
        if opt + 2 > len(data):
            raise NotPe("truncated optional header")
        magic, = struct.unpack_from("<H", data, opt)
        if magic == 0x10B:
            ndir_off, dir_off = opt + 92, opt + 96
        elif magic == 0x20B:
            ndir_off, dir_off = opt + 108, opt + 112
        else:
            raise NotPe(f"unknown optional header magic {magic:#x}")
        if dir_off > len(data):
            raise NotPe("truncated optional header")
        ndir, = struct.unpack_from("<I", data, ndir_off)
        self.sections = []
        sect = opt + opt_size
        for i in range(nsect):
            o = sect + 40 * i
            if o + 40 > len(data):
                raise NotPe("truncated section table")
            vsize, va, rawsize, rawptr = struct.unpack_from("<IIII", data, o + 8)
            self.sections.append((va, max(vsize, rawsize), rawptr, rawsize))
        if ndir <= 14 or dir_off + 15 * 8 > len(data):
            raise NoCliHeader("no CLI header data directory")
        self.cli_rva, self.cli_size = struct.unpack_from("<II", data, dir_off + 14 * 8)
        if not self.cli_rva:
            raise NoCliHeader("CLI header directory is empty")

    def offset(self, rva):
        for va, size, rawptr, rawsize in self.sections:
            if va <= rva < va + size:
                off = rawptr + (rva - va)
                if rva - va >= rawsize or off >= len(self.data):
                    break
                return off
        raise MalformedMetadata(f"RVA {rva:#x} not mapped by any section")


def _compressed_uint(data, pos):
    b = data[pos]
    if b & 0x80 == 0:
        return b, pos + 1
    if b & 0xC0 == 0x80:
        return ((b & 0x3F) << 8) | data[pos + 1], pos + 2
    if b & 0xE0 == 0xC0:
        return ((b & 0x1F) << 24) | (data[pos + 1] << 16) | (data[pos + 2] << 8) | data[pos + 3], pos + 4
    raise MalformedMetadata("bad compressed integer")


class _Metadata:
    def __init__(self, data, pe):
        self.data = data
        cli = pe.offset(pe.cli_rva)
        if cli + 16 > len(data):
            raise NoCliHeader("truncated CLI header")
        md_rva, md_size = struct.unpack_from("<II", data, cli + 8)
        root = pe.offset(md_rva)
        if data[root:root + 4] != b"BSJB":
            raise MalformedMetadata("metadata root signature missing")
        vlen, = struct.unpack_from("<I", data, root + 12)
        p = root + 16 + vlen
        nstreams, = struct.unpack_from("<H", data, p + 2)
        p += 4
        self.streams = {}
        for _ in range(nstreams):
            off, size = struct.unpack_from("<II", data, p)
            p += 8
            end = data.index(b"\0", p)
            name = data[p:end].decode("ascii", "replace")
            p = (end + 4) & ~3
            if root + off + size > len(data):
                raise MalformedMetadata(f"stream {name} exceeds file")
            self.streams[name] = (root + off, size)
        tables = self.streams.get("#~") or self.streams.get("#-")
        if tables is None:
            raise MalformedMetadata("no metadata tables stream")
        self._read_tables(*tables)

    def _heap(self, name):
        return self.streams.get(name, (0, 0))

    def string(self, idx):
        start, size = self._heap("#Strings")
        if idx >= size and idx:
            raise MalformedMetadata(f"string index {idx} out of range")
        p = start + idx
        end = self.data.index(b"\0", p)
        return self.data[p:end].decode("utf-8", "replace")

    def blob(self, idx):
        start, size = self._heap("#Blob")
        if idx >= size and idx:
            raise MalformedMetadata(f"blob index {idx} out of range")
        if not size:
            return b""
        n, p = _compressed_uint(self.data, start + idx)
        return self.data[p:p + n]

    def _read_tables(self, start, size):
        d = self.data
        heap_sizes = d[start + 6]
        valid, = struct.unpack_from("<Q", d, start + 8)
        p = start + 24
        self.rows = {}
        for t in range(64):
            if valid >> t & 1:
                self.rows[t], = struct.unpack_from("<I", d, p)
                p += 4
        if heap_sizes & 0x40:
            p += 4  # extra data
        str_w = 4 if heap_sizes & 1 else 2
        guid_w = 4 if heap_sizes & 2 else 2
        blob_w = 4 if heap_sizes & 4 else 2

        def coded_width(kind):
            bits, tables = _CODED[kind]
            most = max((self.rows.get(t, 0) for t in tables if t is not None), default=0)
            return 2 if most < (1 << (16 - bits)) else 4

        self.tables = {}
        for t in sorted(self.rows):
            if t not in _SCHEMA:
                raise MalformedMetadata(f"unknown metadata table {t:#x}")
            name, cols = _SCHEMA[t]
            widths = []
            for c in cols:
                if isinstance(c, int):
                    widths.append(c)
                elif c == "s":
                    widths.append(str_w)
                elif c == "g":
                    widths.append(guid_w)
                elif c == "b":
                    widths.append(blob_w)
                elif c[0] == "t":
                    widths.append(2 if self.rows.get(c[1], 0) < 0x10000 else 4)
                else:
                    widths.append(coded_width(c[1]))
            row_size = sum(widths)
            n = self.rows[t]
            if p + row_size * n > start + size:
                raise MalformedMetadata(f"table {name} exceeds the tables stream")
            fmt = "<" + "".join({1: "B", 2: "H", 4: "I"}[w] for w in widths)
            self.tables[t] = [struct.unpack_from(fmt, d, p + i * row_size) for i in range(n)]
            p += row_size * n

    def table(self, t):
        return self.tables.get(t, [])

    @staticmethod
    def decode(kind, value):
        bits, tables = _CODED[kind]
        tag = value & ((1 << bits) - 1)
        if tag >= len(tables) or tables[tag] is None:
            raise MalformedMetadata(f"bad {kind} tag {tag}")
        return tables[tag], value >> bits


def parse_cil(data) -> CilModule:
    """Parse a managed PE image into names and IL call edges."""
    data = bytes(data)
    pe = _Pe(data)
    try:
        md = _Metadata(data, pe)
        return _build(md, pe, data)
    except (struct.error, IndexError, ValueError) as exc:
        if isinstance(exc, MalformedMetadata):
            raise
        raise MalformedMetadata(f"metadata truncated or inconsistent: {exc}") from exc


def _build(md, pe, data):
    mod = CilModule()
    typedefs = md.table(0x02)
    typerefs = md.table(0x01)
    methods = md.table(0x06)
    memberrefs = md.table(0x0A)

    nested_parent = {row[0]: row[1] for row in md.table(0x29)}
    td_names = {}

    def typedef_name(idx):
        if idx in td_names:
            return td_names[idx]
        row = typedefs[idx - 1]
        name = qualified(md.string(row[2]), md.string(row[1]))
        if idx in nested_parent and nested_parent[idx] != idx:
            td_names[idx] = "?"  # cycle guard
            name = typedef_name(nested_parent[idx]) + "." + md.string(row[1])
        td_names[idx] = name
        return name

    def typeref_name(idx, depth=0):
        row = typerefs[idx - 1]
        name = qualified(md.string(row[2]), md.string(row[1]))
        if row[0] and depth < 16:
            tab, ridx = md.decode("ResolutionScope", row[0])
            if tab == 0x01 and ridx:
                name = typeref_name(ridx, depth + 1) + "." + md.string(row[1])
        return name

    def type_name(kind, value):
        tab, idx = md.decode(kind, value)
        if not idx:
            return ""
        if tab == 0x02:
            return typedef_name(idx)
        if tab == 0x01:
            return typeref_name(idx)
        if tab == 0x1B:
            return typespec_name(idx)
        if tab == 0x1A:
            return md.string(md.table(0x1A)[idx - 1][0])
        if tab == 0x06:
            return method_owner.get(idx, "")
        return ""

    def typespec_name(idx):
        sig = md.blob(md.table(0x1B)[idx - 1][0])
        # GENERICINST (CLASS|VALUETYPE) TypeDefOrRef ...
        if len(sig) >= 3 and sig[0] == 0x15 and sig[1] in (0x11, 0x12):
            coded, _ = _compressed_uint(sig, 2)
            return type_name("TypeDefOrRef", coded)
        if len(sig) >= 2 and sig[0] in (0x11, 0x12):
            coded, _ = _compressed_uint(sig, 1)
            return type_name("TypeDefOrRef", coded)
        return f"<TypeSpec#{idx}>"

    # method ownership from TypeDef.MethodList ranges
    method_owner = {}
    for i, row in enumerate(typedefs):
        first = row[5]
        last = typedefs[i + 1][5] if i + 1 < len(typedefs) else len(methods) + 1
        for m in range(first, min(last, len(methods) + 1)):
            method_owner.setdefault(m, typedef_name(i + 1))

    for i in range(1, len(typedefs) + 1):
        name = typedef_name(i)
        if name != "<Module>":
            mod.type_defs.append(name)

    method_names = {}
    for i, row in enumerate(methods, 1):
        name = md.string(row[3])
        owner = method_owner.get(i, "")
        method_names[i] = f"{owner}::{name}"
        mod.method_defs.append((owner, name, 0x06000000 | i))

    ref_names = {}
    for i, row in enumerate(memberrefs, 1):
        owner = type_name("MemberRefParent", row[0])
        name = md.string(row[1])
        ref_names[i] = f"{owner}::{name}"
        mod.member_refs.append((owner, name))

    specs = md.table(0x2B)

    def resolve(token):
        tab, idx = token >> 24, token & 0xFFFFFF
        if tab == 0x06 and 1 <= idx <= len(methods):
            return method_names[idx]
        if tab == 0x0A and 1 <= idx <= len(memberrefs):
            return ref_names[idx]
        if tab == 0x2B and 1 <= idx <= len(specs):
            t, j = md.decode("MethodDefOrRef", specs[idx - 1][0])
            return resolve((t << 24) | j)
        return None

    for i, row in enumerate(methods, 1):
        rva = row[0]
        if not rva:
            continue
        try:
            code = _method_code(data, pe.offset(rva))
            targets = set()
            for token in _call_tokens(code):
                target = resolve(token)
                if target is None:
                    mod.diagnostics.append(f"cil: unresolved call token {token:#010x} in {method_names[i]}")
                else:
                    targets.add(target)
        except MalformedMetadata as exc:
            mod.diagnostics.append(f"cil: body of {method_names[i]} skipped: {exc}")
            continue
        mod.call_edges.setdefault(method_names[i], set()).update(targets)
    return mod


def _method_code(data, off):
    if off >= len(data):
        raise MalformedMetadata("method body outside file")
    b = data[off]
    if b & 3 == 2:
        size = b >> 2
        start = off + 1
    elif b & 3 == 3:
        if off + 12 > len(data):
            raise MalformedMetadata("truncated fat method header")
        flags_size, = struct.unpack_from("<H", data, off)
        hdr = (flags_size >> 12) * 4
        size, = struct.unpack_from("<I", data, off + 4)
        start = off + hdr
    else:
        raise MalformedMetadata(f"bad method header byte {b:#x}")
    if start + size > len(data):
        raise MalformedMetadata("method body exceeds file")
    return data[start:start + size]


def _call_tokens(code):
    p, n = 0, len(code)
    while p < n:
        op = code[p]
        p += 1
        if op == 0xFE:
            if p >= n:
                raise MalformedMetadata("truncated two-byte opcode")
            p += 1 + _OPERAND_FE.get(code[p], 0)
            continue
        size = _OPERAND_1.get(op, 0)
        if size == 0xFF:
            if p + 4 > n:
                raise MalformedMetadata("truncated switch")
            count, = struct.unpack_from("<I", code, p)
            p += 4 + 4 * count
            continue
        if op in CALL_OPCODES:
            if p + 4 > n:
                raise MalformedMetadata("truncated call operand")
            yield struct.unpack_from("<I", code, p)[0]
        p += size
    if p > n:
        raise MalformedMetadata("instruction operand runs past end of body")
