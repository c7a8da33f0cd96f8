"""A small smali-style assembler that writes valid DEX files.

Used to produce test fixtures from readable listings. Supported syntax::

    .class public Lcom/example/Main;
    .super Ljava/lang/Object;
    .implements Ljava/lang/Runnable;
    .method public static run(I)V
        .registers 3
        :start
        invoke-static {v2}, Lcom/example/Util;->use(I)V
        const-string v0, "AES/ECB"
        if-eqz v2, :done
        packed-switch v2, 0, :a, :b
        sparse-switch v2, 3->:a, 9->:b
        :done
        return-void
        .catch Ljava/io/IOException; {:start .. :done} :handler
        .catchall {:start .. :done} :handler
    .end method

Only instruction formats are checked, not register types.
"""
from __future__ import annotations

import ast
import hashlib
import re
import struct
import zlib
from dataclasses import dataclass, field

from ..dex.model import split_descriptor_list
from ..dex.opcodes import FORMAT_UNITS, OPCODE_BY_NAME

ACCESS = {
    "public": 0x1, "private": 0x2, "protected": 0x4, "static": 0x8, "final": 0x10,
    "synchronized": 0x20, "bridge": 0x40, "varargs": 0x80, "native": 0x100, "interface": 0x200,
    "abstract": 0x400, "strict": 0x800, "synthetic": 0x1000, "annotation": 0x2000, "enum": 0x4000,
    "constructor": 0x10000,
}
NO_INDEX = 0xFFFFFFFF


class AsmError(ValueError):
    pass


@dataclass
class _Method:
    cls: str
    name: str
    proto: str
    access: int
    registers: int = 0
    lines: list = field(default_factory=list)
    catches: list = field(default_factory=list)
    code: list = None
    tries: list = None
    outs: int = 0

    @property
    def is_direct(self):
        return bool(self.access & (0x8 | 0x2 | 0x10000)) or self.name in ("<init>", "<clinit>")

    @property
    def abstract(self):
        return bool(self.access & (0x400 | 0x100))


@dataclass
class _Class:
    name: str
    access: int
    superclass: str = "Ljava/lang/Object;"
    interfaces: list = field(default_factory=list)
    methods: list = field(default_factory=list)


def encode_mutf8(s):
    out = bytearray()
    for ch in s:
        cp = ord(ch)
        if cp > 0xFFFF:
            cp -= 0x10000
            units = (0xD800 | (cp >> 10), 0xDC00 | (cp & 0x3FF))
        else:
            units = (cp,)
        for u in units:
            if 0 < u < 0x80:
                out.append(u)
            elif u < 0x800:
                out += bytes((0xC0 | (u >> 6), 0x80 | (u & 0x3F)))
            else:
                out += bytes((0xE0 | (u >> 12), 0x80 | ((u >> 6) & 0x3F), 0x80 | (u & 0x3F)))
    return bytes(out)


def _utf16_len(s):
    return sum(2 if ord(c) > 0xFFFF else 1 for c in s)


def uleb128(v):
    out = bytearray()
    while True:
        b = v & 0x7F
        v >>= 7
        if v:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


def sleb128(v):
    out = bytearray()
    while True:
        b = v & 0x7F
        v >>= 7
        if (v == 0 and not b & 0x40) or (v == -1 and b & 0x40):
            out.append(b)
            return bytes(out)
        out.append(b | 0x80)


def _shorty_char(t):
    return "L" if t[0] in "L[" else t


def _split_method_ref(ref):
    m = re.fullmatch(r"(\S+?;)->([^(\s]+)(\(.*\)\S+)", ref)
    if not m:
        raise AsmError(f"bad method reference {ref!r}")
    return m.group(1), m.group(2), m.group(3)


def _split_field_ref(ref):
    m = re.fullmatch(r"(\S+?;)->([^:\s]+):(\S+)", ref)
    if not m:
        raise AsmError(f"bad field reference {ref!r}")
    return m.group(1), m.group(2), m.group(3)


def _proto_parts(proto):
    close = proto.index(")")
    return split_descriptor_list(proto[1:close]), proto[close + 1:]


def _reg(tok):
    tok = tok.strip()
    if not re.fullmatch(r"[vp]\d+", tok):
        raise AsmError(f"expected register, got {tok!r}")
    return tok


def _lit(tok):
    return int(tok.strip().rstrip("LlTt"), 0)


class _Pools:
    def __init__(self):
        self.strings = set()
        self.types = set()
        self.protos = set()
        self.fields = set()
        self.methods = set()

    def type(self, t):
        self.types.add(t)
        self.strings.add(t)

    def proto(self, proto):
        params, ret = _proto_parts(proto)
        for t in params + [ret]:
            self.type(t)
        shorty = "".join(_shorty_char(t) for t in [ret] + params)
        self.strings.add(shorty)
        self.protos.add(proto)

    def method(self, cls, name, proto):
        self.type(cls)
        self.strings.add(name)
        self.proto(proto)
        self.methods.add((cls, name, proto))

    def field(self, cls, name, typ):
        self.type(cls)
        self.type(typ)
        self.strings.add(name)
        self.fields.add((cls, name, typ))


def parse_listing(text):
    classes = []
    cls = meth = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            words = line.split()
            head = words[0]
            if head == ".class":
                cls = _Class(words[-1], sum(ACCESS[w] for w in words[1:-1]))
                classes.append(cls)
            elif head == ".super":
                cls.superclass = None if words[1] == "none" else words[1]
            elif head == ".implements":
                cls.interfaces.append(words[1])
            elif head == ".end" and words[1] == "class":
                cls = None
            elif head == ".method":
                if cls is None:
                    raise AsmError(".method outside of .class")
                sig = words[-1]
                paren = sig.index("(")
                meth = _Method(cls.name, sig[:paren], sig[paren:], sum(ACCESS[w] for w in words[1:-1]))
                if meth.name in ("<init>", "<clinit>"):
                    meth.access |= 0x10000
                cls.methods.append(meth)
            elif head == ".end" and words[1] == "method":
                meth = None
            elif head == ".registers":
                meth.registers = int(words[1])
            elif head in (".catch", ".catchall"):
                m = re.fullmatch(r"\.catch(all)?\s*(\S+;)?\s*\{\s*(:\w+)\s*\.\.\s*(:\w+)\s*\}\s*(:\w+)", line)
                if not m:
                    raise AsmError("bad catch directive")
                meth.catches.append((m.group(2) if not m.group(1) else None, m.group(3), m.group(4), m.group(5)))
            else:
                if meth is None:
                    raise AsmError(f"instruction outside method: {line}")
                meth.lines.append((lineno, line))
        except (KeyError, IndexError, ValueError) as exc:
            raise AsmError(f"line {lineno}: {exc}") from exc
    return classes


def _operands(rest):
    """Split an operand string on top-level commas, keeping quoted strings and braces intact."""
    out, cur, depth, quote, esc = [], "", 0, False, False
    for ch in rest:
        if quote:
            cur += ch
            if esc:
                esc = False
            elif ch == "\\":
                esc = True
            elif ch == '"':
                quote = False
            continue
        if ch == '"':
            quote = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
        elif ch == "," and depth == 0:
            out.append(cur.strip())
            cur = ""
            continue
        cur += ch
    if cur.strip():
        out.append(cur.strip())
    return out


def _unquote(tok):
    if not (tok.startswith('"') and tok.endswith('"')):
        raise AsmError(f"expected string literal, got {tok!r}")
    return ast.literal_eval(tok)


class _Insn:
    def __init__(self, name, fmt, ops, lineno):
        self.name, self.fmt, self.ops, self.lineno = name, fmt, ops, lineno
        self.offset = 0
        self.payload = None


def _scan_method(meth, pools):
    insns, labels = [], {}
    pools.method(meth.cls, meth.name, meth.proto)
    params, _ = _proto_parts(meth.proto)
    ins = sum(2 if t in ("J", "D") else 1 for t in params) + (0 if meth.access & 0x8 else 1)
    if meth.abstract:
        if meth.lines:
            raise AsmError(f"{meth.name}: abstract/native method with code")
        return None
    if meth.registers < ins:
        raise AsmError(f"{meth.name}: .registers {meth.registers} < {ins} parameter registers")
    pc = 0
    for lineno, line in meth.lines:
        if line.startswith(":"):
            labels[line] = pc
            continue
        name, _, rest = line.partition(" ")
        if name not in OPCODE_BY_NAME:
            raise AsmError(f"line {lineno}: unknown opcode {name}")
        _, fmt = OPCODE_BY_NAME[name]
        insn = _Insn(name, fmt, _operands(rest), lineno)
        insn.offset = pc
        pc += FORMAT_UNITS[fmt]
        insns.append(insn)
        for op in insn.ops:
            if name in ("packed-switch", "sparse-switch"):
                break
            if op.startswith('"'):
                pools.strings.add(_unquote(op))
            elif "->" in op and "(" in op and not op.startswith("{"):
                pools.method(*_split_method_ref(op))
            elif "->" in op and ":" in op.split("->", 1)[1]:
                pools.field(*_split_field_ref(op))
            elif re.fullmatch(r"\[*L\S+;|\[+[ZBSCIJFD]", op):
                pools.type(op)
        if name in ("packed-switch", "sparse-switch"):
            insn.payload = True
    for typ, *_ in meth.catches:
        if typ:
            pools.type(typ)
    meth.lines = (insns, labels, ins, pc)
    return insns


def _regno(tok, meth_regs, ins):
    tok = _reg(tok)
    n = int(tok[1:])
    return n if tok[0] == "v" else meth_regs - ins + n


class DexAssembler:
    def __init__(self):
        self.classes = []

    def add_listing(self, text):
        self.classes.extend(parse_listing(text))
        return self

    def build(self):
        pools = _Pools()
        for cls in self.classes:
            pools.type(cls.name)
            if cls.superclass:
                pools.type(cls.superclass)
            for i in cls.interfaces:
                pools.type(i)
            for m in cls.methods:
                _scan_method(m, pools)

        strings = sorted(pools.strings, key=lambda s: s.encode("utf-16-be"))
        sidx = {s: i for i, s in enumerate(strings)}
        types = sorted(pools.types, key=lambda t: sidx[t])
        tidx = {t: i for i, t in enumerate(types)}

        def proto_key(p):
            params, ret = _proto_parts(p)
            return (tidx[ret], [tidx[t] for t in params])

        protos = sorted(pools.protos, key=proto_key)
        pidx = {p: i for i, p in enumerate(protos)}
        fields = sorted(pools.fields, key=lambda f: (tidx[f[0]], sidx[f[1]], tidx[f[2]]))
        fidx = {f: i for i, f in enumerate(fields)}
        methods = sorted(pools.methods, key=lambda m: (tidx[m[0]], sidx[m[1]], pidx[m[2]]))
        midx = {m: i for i, m in enumerate(methods)}
        ctx = dict(sidx=sidx, tidx=tidx, fidx=fidx, midx=midx)

        for cls in self.classes:
            for m in cls.methods:
                if not m.abstract:
                    self._encode_method(m, ctx)

        return self._layout(strings, types, protos, fields, methods, sidx, tidx, pidx, midx)

    # -- instruction encoding --------------------------------------------

    def _encode_method(self, meth, ctx):
        insns, labels, ins, pc = meth.lines
        code = []
        payloads = []
        end = pc
        if any(i.payload for i in insns) and end % 2:
            end += 1
        for insn in insns:
            if insn.payload:
                insn.payload_at = end
                ops = insn.ops[1:]
                if insn.name == "packed-switch":
                    n = len(ops) - 1
                    end += 4 + 2 * n
                else:
                    end += 2 + 4 * len(ops)
        for insn in insns:
            try:
                units = self._encode(insn, meth, labels, ins, ctx)
            except (AsmError, KeyError, ValueError, IndexError) as exc:
                raise AsmError(f"line {insn.lineno}: {insn.name}: {exc}") from exc
            if len(units) != FORMAT_UNITS[insn.fmt]:
                raise AsmError(f"line {insn.lineno}: encoded width mismatch")
            code.extend(units)
            if insn.payload:
                payloads.append((insn, self._payload(insn, labels)))
        if payloads and len(code) % 2:
            code.append(0)
        for _, units in payloads:
            code.extend(units)
        meth.code = code
        tries = {}
        for typ, start, stop, handler in meth.catches:
            key = (labels[start], labels[stop])
            tries.setdefault(key, []).append((typ, labels[handler]))
        meth.tries = sorted(tries.items())

    def _label(self, tok, labels):
        tok = tok.strip()
        if tok not in labels:
            raise AsmError(f"undefined label {tok}")
        return labels[tok]

    def _payload(self, insn, labels):
        ops = insn.ops[1:]
        if insn.name == "packed-switch":
            first = _lit(ops[0])
            targets = [self._label(t, labels) - insn.offset for t in ops[1:]]
            units = [0x0100, len(targets), first & 0xFFFF, (first >> 16) & 0xFFFF]
            for t in targets:
                units += [t & 0xFFFF, (t >> 16) & 0xFFFF]
            return units
        keys, targets = [], []
        for op in ops:
            k, t = op.split("->")
            keys.append(_lit(k))
            targets.append(self._label(t, labels) - insn.offset)
        units = [0x0200, len(keys)]
        for k in keys:
            units += [k & 0xFFFF, (k >> 16) & 0xFFFF]
        for t in targets:
            units += [t & 0xFFFF, (t >> 16) & 0xFFFF]
        return units

    def _ref(self, name, tok, ctx):
        if name.startswith(("invoke",)):
            return ctx["midx"][_split_method_ref(tok)]
        if name.startswith(("iget", "iput", "sget", "sput")):
            return ctx["fidx"][_split_field_ref(tok)]
        if name.startswith("const-string"):
            return ctx["sidx"][_unquote(tok)]
        return ctx["tidx"][tok]

    def _encode(self, insn, meth, labels, ins, ctx):
        op, fmt = OPCODE_BY_NAME[insn.name]
        o = insn.ops
        R = lambda t: _regno(t, meth.registers, ins)  # noqa: E731

        def check(n, bits):
            if not 0 <= n < (1 << bits):
                raise AsmError(f"register v{n} does not fit in {bits} bits")
            if n >= meth.registers:
                raise AsmError(f"register v{n} >= .registers {meth.registers}")
            return n

        def rel(tok):
            return self._label(tok, labels) - insn.offset

        if fmt == "10x":
            return [op]
        if fmt == "12x":
            return [op | check(R(o[0]), 4) << 8 | check(R(o[1]), 4) << 12]
        if fmt == "11n":
            return [op | check(R(o[0]), 4) << 8 | (_lit(o[1]) & 0xF) << 12]
        if fmt == "11x":
            return [op | check(R(o[0]), 8) << 8]
        if fmt == "10t":
            return [op | (rel(o[0]) & 0xFF) << 8]
        if fmt == "20t":
            return [op, rel(o[0]) & 0xFFFF]
        if fmt == "30t":
            r = rel(o[0])
            return [op, r & 0xFFFF, (r >> 16) & 0xFFFF]
        if fmt == "22x":
            return [op | check(R(o[0]), 8) << 8, check(R(o[1]), 16)]
        if fmt == "32x":
            return [op, check(R(o[0]), 16), check(R(o[1]), 16)]
        if fmt == "21t":
            return [op | check(R(o[0]), 8) << 8, rel(o[1]) & 0xFFFF]
        if fmt == "21s":
            return [op | check(R(o[0]), 8) << 8, _lit(o[1]) & 0xFFFF]
        if fmt == "21h":
            shift = 48 if "wide" in insn.name else 16
            return [op | check(R(o[0]), 8) << 8, (_lit(o[1]) >> shift) & 0xFFFF]
        if fmt == "21c":
            return [op | check(R(o[0]), 8) << 8, self._ref(insn.name, o[1], ctx)]
        if fmt == "31c":
            idx = self._ref(insn.name, o[1], ctx)
            return [op | check(R(o[0]), 8) << 8, idx & 0xFFFF, idx >> 16]
        if fmt == "23x":
            return [op | check(R(o[0]), 8) << 8, check(R(o[1]), 8) | check(R(o[2]), 8) << 8]
        if fmt == "22b":
            return [op | check(R(o[0]), 8) << 8, check(R(o[1]), 8) | (_lit(o[2]) & 0xFF) << 8]
        if fmt == "22t":
            return [op | check(R(o[0]), 4) << 8 | check(R(o[1]), 4) << 12, rel(o[2]) & 0xFFFF]
        if fmt == "22s":
            return [op | check(R(o[0]), 4) << 8 | check(R(o[1]), 4) << 12, _lit(o[2]) & 0xFFFF]
        if fmt == "22c":
            return [op | check(R(o[0]), 4) << 8 | check(R(o[1]), 4) << 12, self._ref(insn.name, o[2], ctx)]
        if fmt == "31i":
            v = _lit(o[1])
            return [op | check(R(o[0]), 8) << 8, v & 0xFFFF, (v >> 16) & 0xFFFF]
        if fmt == "31t":
            r = insn.payload_at - insn.offset
            return [op | check(R(o[0]), 8) << 8, r & 0xFFFF, (r >> 16) & 0xFFFF]
        if fmt == "51l":
            v = _lit(o[1]) & 0xFFFFFFFFFFFFFFFF
            return [op | check(R(o[0]), 8) << 8] + [(v >> s) & 0xFFFF for s in (0, 16, 32, 48)]
        if fmt in ("35c", "3rc"):
            inner = o[0].strip()[1:-1].strip()
            if fmt == "35c":
                regs = [check(R(t), 4) for t in inner.split(",") if t.strip()] if inner else []
                if len(regs) > 5:
                    raise AsmError("more than 5 argument registers; use /range")
                meth.outs = max(meth.outs, len(regs))
                g = regs[4] if len(regs) == 5 else 0
                regs4 = regs[:4] + [0] * (4 - min(4, len(regs)))
                word = regs4[0] | regs4[1] << 4 | regs4[2] << 8 | regs4[3] << 12
                return [op | g << 8 | len(regs) << 12, self._ref(insn.name, o[1], ctx), word]
            if inner:
                a, b = [t.strip() for t in inner.split("..")]
                first, last = R(a), R(b)
                count = last - first + 1
                check(last, 16)
            else:
                first, count = 0, 0
            meth.outs = max(meth.outs, count)
            return [op | count << 8, self._ref(insn.name, o[1], ctx), first]
        raise AsmError(f"format {fmt} not supported by the assembler")

    # -- file layout ------------------------------------------------------

    def _layout(self, strings, types, protos, fields, methods, sidx, tidx, pidx, midx):
        header_size = 0x70
        off = header_size
        sections = {}
        for name, count, size in (("string_ids", len(strings), 4), ("type_ids", len(types), 4),
                                  ("proto_ids", len(protos), 12), ("field_ids", len(fields), 8),
                                  ("method_ids", len(methods), 8), ("class_defs", len(self.classes), 32)):
            sections[name] = (off if count else 0, count)
            off += count * size
        data_off = off
        data = bytearray()

        def here():
            return data_off + len(data)

        def align4():
            while here() % 4:
                data.append(0)

        map_items = []

        # code items
        code_offs = {}
        first_code = None
        n_code = 0
        for cls in self.classes:
            for m in cls.methods:
                if m.abstract:
                    continue
                align4()
                if first_code is None:
                    first_code = here()
                code_offs[id(m)] = here()
                n_code += 1
                _, _, ins, _ = m.lines
                data.extend(struct.pack("<4HII", m.registers, ins, m.outs, len(m.tries), 0, len(m.code)))
                data.extend(struct.pack(f"<{len(m.code)}H", *m.code))
                if m.tries:
                    if len(m.code) % 2:
                        data.extend(b"\0\0")
                    handler_lists = []
                    blob = bytearray(uleb128(len(m.tries)))
                    for (start, end), handlers in m.tries:
                        handler_lists.append(len(blob))
                        typed = [(t, h) for t, h in handlers if t]
                        catch_all = [h for t, h in handlers if not t]
                        blob += sleb128(-len(typed) if catch_all else len(typed))
                        for t, h in typed:
                            blob += uleb128(tidx[t]) + uleb128(h)
                        if catch_all:
                            blob += uleb128(catch_all[0])
                    for ((start, end), _), h_off in zip(m.tries, handler_lists):
                        data.extend(struct.pack("<IHH", start, end - start, h_off))
                    data.extend(blob)
        if n_code:
            map_items.append((0x2001, n_code, first_code))

        # type lists
        align4()
        type_list_offs = {}
        lists = []
        for p in protos:
            params, _ = _proto_parts(p)
            if params:
                lists.append(tuple(params))
        for cls in self.classes:
            if cls.interfaces:
                lists.append(tuple(cls.interfaces))
        first_tl = None
        for tl in dict.fromkeys(lists):
            align4()
            if first_tl is None:
                first_tl = here()
            type_list_offs[tl] = here()
            data.extend(struct.pack("<I", len(tl)))
            data.extend(struct.pack(f"<{len(tl)}H", *(tidx[t] for t in tl)))
        if type_list_offs:
            map_items.append((0x1001, len(type_list_offs), first_tl))

        # string data
        string_offs = []
        first_sd = here()
        for s in strings:
            string_offs.append(here())
            data.extend(uleb128(_utf16_len(s)) + encode_mutf8(s) + b"\0")
        if strings:
            map_items.append((0x2002, len(strings), first_sd))

        # class data
        class_data_offs = []
        first_cd = None
        n_cd = 0
        for cls in self.classes:
            if not cls.methods:
                class_data_offs.append(0)
                continue
            if first_cd is None:
                first_cd = here()
            n_cd += 1
            class_data_offs.append(here())
            direct = sorted((m for m in cls.methods if m.is_direct), key=lambda m: midx[(m.cls, m.name, m.proto)])
            virtual = sorted((m for m in cls.methods if not m.is_direct),
                             key=lambda m: midx[(m.cls, m.name, m.proto)])
            blob = bytearray(uleb128(0) + uleb128(0) + uleb128(len(direct)) + uleb128(len(virtual)))
            for group in (direct, virtual):
                prev = 0
                for m in group:
                    idx = midx[(m.cls, m.name, m.proto)]
                    blob += uleb128(idx - prev) + uleb128(m.access) + uleb128(code_offs.get(id(m), 0))
                    prev = idx
            data.extend(blob)
        if n_cd:
            map_items.append((0x2000, n_cd, first_cd))

        align4()
        map_off = here()
        ids = [(0x0000, 1, 0)]
        for code, name in ((0x0001, "string_ids"), (0x0002, "type_ids"), (0x0003, "proto_ids"),
                           (0x0004, "field_ids"), (0x0005, "method_ids"), (0x0006, "class_defs")):
            o, c = sections[name]
            if c:
                ids.append((code, c, o))
        items = sorted(ids + map_items + [(0x1000, 1, map_off)], key=lambda t: t[2])
        data.extend(struct.pack("<I", len(items)))
        for code, count, o in items:
            data.extend(struct.pack("<HHII", code, 0, count, o))

        out = bytearray(header_size)
        so, sc = sections["string_ids"]
        for o in string_offs:
            out.extend(struct.pack("<I", o))
        for t in types:
            out.extend(struct.pack("<I", sidx[t]))
        for p in protos:
            params, ret = _proto_parts(p)
            shorty = "".join(_shorty_char(t) for t in [ret] + params)
            out.extend(struct.pack("<III", sidx[shorty], tidx[ret], type_list_offs.get(tuple(params), 0)))
        for c, n, t in fields:
            out.extend(struct.pack("<HHI", tidx[c], tidx[t], sidx[n]))
        for c, n, p in methods:
            out.extend(struct.pack("<HHI", tidx[c], pidx[p], sidx[n]))
        for cls, cd_off in zip(self.classes, class_data_offs):
            out.extend(struct.pack(
                "<8I", tidx[cls.name], cls.access, tidx[cls.superclass] if cls.superclass else NO_INDEX,
                type_list_offs.get(tuple(cls.interfaces), 0) if cls.interfaces else 0,
                NO_INDEX, 0, cd_off, 0))
        assert len(out) == data_off
        out.extend(data)
        file_size = len(out)
        struct.pack_into("<8s", out, 0, b"dex\n035\0")
        struct.pack_into("<III", out, 0x20, file_size, header_size, 0x12345678)
        struct.pack_into("<III", out, 0x2C, 0, 0, map_off)
        vals = []
        for name in ("string_ids", "type_ids", "proto_ids", "field_ids", "method_ids", "class_defs"):
            o, c = sections[name]
            vals += [c, o]
        struct.pack_into("<12I", out, 0x38, *vals)
        struct.pack_into("<II", out, 0x68, len(data), data_off)
        out[12:32] = hashlib.sha1(bytes(out[32:])).digest()
        struct.pack_into("<I", out, 8, zlib.adler32(bytes(out[12:])) & 0xFFFFFFFF)
        return bytes(out)


def assemble(text):
    """Assemble a listing into DEX bytes."""
    return DexAssembler().add_listing(text).build()
