"""Minimal managed-assembly writer for test fixtures.

Listing syntax::

    .assembly Assembly-CSharp
    .class Shop.Store
    .method Buy
        call UnityEngine.Purchasing.Product::get_receipt
        callvirt Shop.Store::Check
        newobj UnityEngine.Networking.UnityWebRequest::.ctor
        ldstr "hello"
        ldc.i4 7
        brtrue done
        pop
      done:
        ret
    .end method
    .method Helper abstract
    .end class

Call targets naming a method defined in the listing become MethodDef
tokens, all others MemberRef tokens against a TypeRef. Output is a PE32 DLL
with one section holding the CLI header, IL bodies and metadata.
"""
from __future__ import annotations

import hashlib
import re
import struct

NOARG = {
    "nop": 0x00, "ldarg.0": 0x02, "ldarg.1": 0x03, "ldloc.0": 0x06, "stloc.0": 0x0A, "ldnull": 0x14,
    "ldc.i4.0": 0x16, "ldc.i4.1": 0x17, "dup": 0x25, "pop": 0x26, "ret": 0x2A, "add": 0x58, "throw": 0x7A,
}
TOKEN_OPS = {"call": 0x28, "callvirt": 0x6F, "newobj": 0x73}
BRANCH_OPS = {"br": 0x38, "brfalse": 0x39, "brtrue": 0x3A}

SECTION_RVA = 0x2000
FILE_ALIGN = 0x200


class CilAsmError(ValueError):
    pass


def _split_name(q):
    ns, _, name = q.rpartition(".")
    return ns, name


def _compressed(n):
    if n < 0x80:
        return bytes([n])
    if n < 0x4000:
        return struct.pack(">H", 0x8000 | n)
    return struct.pack(">I", 0xC0000000 | n)


class _Heap:
    def __init__(self, first=b"\0"):
        self.data = bytearray(first)
        self.index = {}

    def add(self, key, encoded):
        if key in self.index:
            return self.index[key]
        i = len(self.data)
        self.data += encoded
        self.index[key] = i
        return i


def parse_cil_listing(text):
    assembly = "Assembly-CSharp"
    classes = []  # [name, [(method name, abstract, [instructions])]]
    cls = meth = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("//") or line.startswith("#"):
            continue
        words = line.split()
        if words[0] == ".assembly":
            assembly = words[1]
        elif words[0] == ".class":
            cls = [words[1], []]
            classes.append(cls)
        elif words[0] == ".end" and words[1] == "class":
            cls = None
        elif words[0] == ".method":
            if cls is None:
                raise CilAsmError(f"line {lineno}: .method outside .class")
            abstract = "abstract" in words[2:]
            meth = [words[1], abstract, []]
            cls[1].append(meth)
            if abstract:
                meth = None
        elif words[0] == ".end" and words[1] == "method":
            meth = None
        else:
            if meth is None:
                raise CilAsmError(f"line {lineno}: instruction outside method body")
            meth[2].append((lineno, line))
    return assembly, classes


def assemble_cil(text):
    assembly, classes = parse_cil_listing(text)
    strings = _Heap()
    blobs = _Heap()
    us = _Heap()

    def s(x):
        return strings.add(x, x.encode("utf-8") + b"\0") if x else 0

    def blob(b):
        return blobs.add(b, _compressed(len(b)) + b)

    def user_string(x):
        enc = x.encode("utf-16-le")
        flag = 1 if any(ord(c) > 0x7E or ord(c) in (0x01, 0x7F) for c in x) else 0
        return us.add(x, _compressed(len(enc) + 1) + enc + bytes([flag]))

    sig = blob(b"\x20\x00\x01")  # instance, no params, void

    # method defs in class order; row numbers start at 1
    defined = {}
    method_rows = []
    for cname, methods in classes:
        for mname, abstract, body in methods:
            method_rows.append((cname, mname, abstract, body))
            defined.setdefault(f"{cname}::{mname}", len(method_rows))

    typerefs, memberrefs = {}, {}

    def token_for(target):
        if "::" not in target:
            raise CilAsmError(f"call target must be Type::Method, got {target!r}")
        if target in defined:
            return 0x06000000 | defined[target]
        if target not in memberrefs:
            tname = target.split("::", 1)[0]
            if tname not in typerefs:
                typerefs[tname] = len(typerefs) + 1
            memberrefs[target] = len(memberrefs) + 1
        return 0x0A000000 | memberrefs[target]

    def encode_body(lines):
        # two passes for labels
        items, labels, pc = [], {}, 0
        for lineno, line in lines:
            if line.endswith(":") and " " not in line:
                labels[line[:-1]] = pc
                continue
            op, _, arg = line.partition(" ")
            arg = arg.strip()
            if op in NOARG:
                size = 1
            elif op in TOKEN_OPS or op in BRANCH_OPS or op in ("ldstr", "ldc.i4"):
                size = 5
            else:
                raise CilAsmError(f"line {lineno}: unsupported IL opcode {op}")
            items.append((pc, op, arg, lineno))
            pc += size
        out = bytearray()
        for at, op, arg, lineno in items:
            if op in NOARG:
                out.append(NOARG[op])
            elif op in TOKEN_OPS:
                out.append(TOKEN_OPS[op])
                out += struct.pack("<I", token_for(arg))
            elif op in BRANCH_OPS:
                if arg not in labels:
                    raise CilAsmError(f"line {lineno}: undefined label {arg}")
                out.append(BRANCH_OPS[op])
                out += struct.pack("<i", labels[arg] - (at + 5))
            elif op == "ldstr":
                m = re.fullmatch(r'"(.*)"', arg)
                if not m:
                    raise CilAsmError(f"line {lineno}: ldstr needs a quoted string")
                out.append(0x72)
                out += struct.pack("<I", 0x70000000 | user_string(m.group(1)))
            elif op == "ldc.i4":
                out.append(0x20)
                out += struct.pack("<i", int(arg, 0))
        return bytes(out)

    # --- section layout: CLI header, method bodies, metadata
    text = bytearray(72)
    rvas = []
    for cname, mname, abstract, body in method_rows:
        if abstract:
            rvas.append(0)
            continue
        code = encode_body(body)
        if len(code) < 64:
            rvas.append(SECTION_RVA + len(text))
            text.append((len(code) << 2) | 0x2)
            text += code
        else:
            while len(text) % 4:
                text.append(0)
            rvas.append(SECTION_RVA + len(text))
            text += struct.pack("<HHII", 0x3003, 8, len(code), 0)
            text += code
    while len(text) % 4:
        text.append(0)

    # --- tables
    module_name = s(assembly + ".dll")
    tables = {}
    tables[0x00] = [(0, module_name, 1, 0, 0)]
    tables[0x01] = []
    for tname, _ in sorted(typerefs.items(), key=lambda kv: kv[1]):
        ns, name = _split_name(tname)
        tables[0x01].append((0, s(name), s(ns)))
    type_rows = [(0, s("<Module>"), 0, 0, 1, 1)]
    first_method = 1
    for cname, methods in classes:
        ns, name = _split_name(cname)
        type_rows.append((0x00100001, s(name), s(ns), 0, 1, first_method))
        first_method += len(methods)
    tables[0x02] = type_rows
    tables[0x06] = []
    for (cname, mname, abstract, _), rva in zip(method_rows, rvas):
        flags = 0x0446 if abstract else 0x0086
        tables[0x06].append((rva, 0, flags, s(mname), sig, 1))
    tables[0x0A] = []
    for target, _ in sorted(memberrefs.items(), key=lambda kv: kv[1]):
        tname, mname = target.split("::", 1)
        parent = (typerefs[tname] << 3) | 1  # MemberRefParent: TypeRef
        tables[0x0A].append((parent, s(mname), sig))
    tables = {k: v for k, v in tables.items() if v}

    big = any(len(h.data) > 0xFFFF for h in (strings, blobs))
    heap_sizes = (1 if len(strings.data) > 0xFFFF else 0) | (4 if len(blobs.data) > 0xFFFF else 0)
    sw = 4 if heap_sizes & 1 else 2
    bw = 4 if heap_sizes & 4 else 2
    del big
    col_widths = {
        0x00: [2, sw, 2, 2, 2],
        0x01: [2, sw, sw],
        0x02: [4, sw, sw, 2, 2, 2],
        0x06: [4, 2, 2, sw, bw, 2],
        0x0A: [2, sw, bw],
    }
    tstream = bytearray(struct.pack("<IBBBBQQ", 0, 2, 0, heap_sizes, 1,
                                    sum(1 << t for t in tables), 0))
    for t in sorted(tables):
        tstream += struct.pack("<I", len(tables[t]))
    for t in sorted(tables):
        fmt = "<" + "".join({2: "H", 4: "I"}[w] for w in col_widths[t])
        for row in tables[t]:
            tstream += struct.pack(fmt, *row)
    while len(tstream) % 4:
        tstream.append(0)

    guid = hashlib.md5(assembly.encode()).digest()

    def pad4(b):
        b = bytes(b)
        return b + b"\0" * (-len(b) % 4)

    streams = [("#~", pad4(tstream)), ("#Strings", pad4(strings.data)), ("#US", pad4(us.data)),
               ("#GUID", guid), ("#Blob", pad4(blobs.data))]
    version = pad4(b"v4.0.30319\0")
    header = struct.pack("<IHHII", 0x424A5342, 1, 1, 0, len(version)) + version + struct.pack("<HH", 0, len(streams))
    hdr_len = len(header) + sum(8 + len(pad4(name.encode() + b"\0")) for name, _ in streams)
    off = hdr_len
    stream_hdrs = b""
    for name, body in streams:
        stream_hdrs += struct.pack("<II", off, len(body)) + pad4(name.encode() + b"\0")
        off += len(body)
    metadata = header + stream_hdrs + b"".join(body for _, body in streams)
    md_rva = SECTION_RVA + len(text)
    text += metadata
    struct.pack_into("<IHHII", text, 0, 72, 2, 5, md_rva, len(metadata))
    struct.pack_into("<I", text, 16, 1)  # ILONLY

    return _pe_image(bytes(text))


def _pe_image(section):
    raw_size = (len(section) + FILE_ALIGN - 1) // FILE_ALIGN * FILE_ALIGN
    dos = bytearray(0x80)
    dos[0:2] = b"MZ"
    struct.pack_into("<I", dos, 0x3C, 0x80)
    coff = struct.pack("<HHIIIHH", 0x14C, 1, 0, 0, 0, 0xE0, 0x2102)
    opt = bytearray(0xE0)
    struct.pack_into("<HBBIII", opt, 0, 0x10B, 8, 0, raw_size, 0, 0)
    struct.pack_into("<III", opt, 16, 0, SECTION_RVA, SECTION_RVA)  # entry, code base, data base
    struct.pack_into("<III", opt, 28, 0x10000000, 0x2000, FILE_ALIGN)
    struct.pack_into("<HHHHHH", opt, 40, 4, 0, 0, 0, 4, 0)
    image_size = SECTION_RVA + (len(section) + 0x1FFF) // 0x2000 * 0x2000
    struct.pack_into("<IIII", opt, 56, image_size, FILE_ALIGN, 0, 3)
    struct.pack_into("<HIIII", opt, 70, 0x8540, 0x100000, 0x1000, 0x100000, 0x1000)
    struct.pack_into("<II", opt, 88, 0, 16)
    struct.pack_into("<II", opt, 96 + 14 * 8, SECTION_RVA, 72)
    sect = bytearray(40)
    sect[0:8] = b".text\0\0\0"
    struct.pack_into("<IIII", sect, 8, len(section), SECTION_RVA, raw_size, FILE_ALIGN)
    struct.pack_into("<I", sect, 36, 0x60000020)
    headers = bytes(dos) + b"PE\0\0" + coff + bytes(opt) + bytes(sect)
    headers += b"\0" * (FILE_ALIGN - len(headers))
    return headers + section + b"\0" * (raw_size - len(section))
