"""DEX file parsing into :class:`DexProgram`."""
from __future__ import annotations

import struct

from ..errors import BadMagic, DexError, OffsetOutOfBounds, UnsupportedVersion
from . import model as M
from .model import MethodSig
from .opcodes import (
    FILL_ARRAY_DATA_PAYLOAD,
    FORMAT_UNITS,
    OPCODES,
    PACKED_SWITCH_PAYLOAD,
    SPARSE_SWITCH_PAYLOAD,
)

NO_INDEX = 0xFFFFFFFF
SUPPORTED_VERSIONS = {b"035", b"036", b"037", b"038", b"039", b"040"}


class MalformedCode(DexError):
    """A single method body is inconsistent; the method is kept without a body."""


class _Reader:
    def __init__(self, data):
        self.data = data
        self.size = len(data)

    def check(self, off, n):
        if off < 0 or n < 0 or off + n > self.size:
            raise OffsetOutOfBounds(f"read of {n} bytes at {off:#x} exceeds file size {self.size:#x}")

    def u16(self, off):
        self.check(off, 2)
        return struct.unpack_from("<H", self.data, off)[0]

    def u32(self, off):
        self.check(off, 4)
        return struct.unpack_from("<I", self.data, off)[0]

    def array(self, fmt, off, count):
        n = struct.calcsize(fmt)
        self.check(off, n * count)
        return [struct.unpack_from(fmt, self.data, off + i * n) for i in range(count)]

    def uleb(self, off):
        result = shift = 0
        for i in range(5):
            self.check(off, 1)
            b = self.data[off]
            off += 1
            result |= (b & 0x7F) << shift
            if not b & 0x80:
                return result, off
            shift += 7
        raise OffsetOutOfBounds(f"unterminated uleb128 at {off:#x}")

    def sleb(self, off):
        start = off
        result, off = self.uleb(off)
        nbits = 7 * (off - start)
        if result & (1 << (nbits - 1)):
            result -= 1 << nbits
        return result, off


def decode_mutf8(raw):
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError:
        pass
    units = []
    i, n = 0, len(raw)
    while i < n:
        b = raw[i]
        if b < 0x80:
            units.append(b)
            i += 1
        elif b & 0xE0 == 0xC0 and i + 1 < n:
            units.append(((b & 0x1F) << 6) | (raw[i + 1] & 0x3F))
            i += 2
        elif b & 0xF0 == 0xE0 and i + 2 < n:
            units.append(((b & 0x0F) << 12) | ((raw[i + 1] & 0x3F) << 6) | (raw[i + 2] & 0x3F))
            i += 3
        else:
            units.append(0xFFFD)
            i += 1
    return b"".join(struct.pack("<H", u) for u in units).decode("utf-16-le", errors="replace")


class _DexFile:
    def __init__(self, data, member=0):
        if len(data) < 0x70 or data[:4] != b"dex\n" or data[7] != 0:
            raise BadMagic("missing DEX magic")
        version = bytes(data[4:7])
        if version not in SUPPORTED_VERSIONS:
            raise UnsupportedVersion(f"DEX version {version.decode('ascii', 'replace')} not supported")
        self.r = r = _Reader(data)
        self.member = member
        if r.u32(0x28) != 0x12345678:
            raise BadMagic("unsupported endian tag")
        (self.string_ids_size, self.string_ids_off, self.type_ids_size, self.type_ids_off,
         self.proto_ids_size, self.proto_ids_off, self.field_ids_size, self.field_ids_off,
         self.method_ids_size, self.method_ids_off, self.class_defs_size, self.class_defs_off) = (
            struct.unpack_from("<12I", data, 0x38))
        self.diagnostics = []
        self._load_pools()

    def _load_pools(self):
        r = self.r
        string_offs = [o for (o,) in r.array("<I", self.string_ids_off, self.string_ids_size)]
        self.strings = []
        for off in string_offs:
            _, p = r.uleb(off)
            end = r.data.find(b"\x00", p)
            if end < 0:
                raise OffsetOutOfBounds(f"unterminated string data at {off:#x}")
            self.strings.append(decode_mutf8(bytes(r.data[p:end])))
        self.types = [self.string(i) for (i,) in r.array("<I", self.type_ids_off, self.type_ids_size)]
        self.protos = []
        for shorty, ret, params_off in r.array("<III", self.proto_ids_off, self.proto_ids_size):
            params = "".join(self.type(t) for t in self.type_list(params_off))
            self.protos.append(f"({params}){self.type(ret)}")
        self.fields = []
        for cls, typ, name in r.array("<HHI", self.field_ids_off, self.field_ids_size):
            self.fields.append(f"{self.type(cls)}->{self.string(name)}:{self.type(typ)}")
        self.method_refs = []
        for cls, proto, name in r.array("<HHI", self.method_ids_off, self.method_ids_size):
            if proto >= len(self.protos):
                raise OffsetOutOfBounds(f"proto index {proto} out of range")
            self.method_refs.append(MethodSig(self.type(cls), self.string(name), self.protos[proto]))

    def string(self, idx):
        if idx >= len(self.strings):
            raise OffsetOutOfBounds(f"string index {idx} out of range")
        return self.strings[idx]

    def type(self, idx):
        if idx >= len(self.types):
            raise OffsetOutOfBounds(f"type index {idx} out of range")
        return self.types[idx]

    def method(self, idx):
        if idx >= len(self.method_refs):
            raise OffsetOutOfBounds(f"method index {idx} out of range")
        return self.method_refs[idx]

    def field(self, idx):
        if idx >= len(self.fields):
            raise OffsetOutOfBounds(f"field index {idx} out of range")
        return self.fields[idx]

    def type_list(self, off):
        if off == 0:
            return []
        n = self.r.u32(off)
        return [t for (t,) in self.r.array("<H", off + 4, n)]

    def classes(self):
        r = self.r
        out = []
        for row in r.array("<8I", self.class_defs_off, self.class_defs_size):
            class_idx, access, super_idx, ifaces_off, _src, _ann, data_off, _static = row
            descriptor = self.type(class_idx)
            superclass = self.type(super_idx) if super_idx != NO_INDEX else None
            interfaces = tuple(self.type(t) for t in self.type_list(ifaces_off))
            methods = self._class_data(data_off) if data_off else ()
            out.append(M.ClassDef(descriptor, superclass, interfaces, access, methods, self.member))
        return out

    def _class_data(self, off):
        r = self.r
        sizes = []
        for _ in range(4):
            v, off = r.uleb(off)
            sizes.append(v)
        n_static, n_inst, n_direct, n_virtual = sizes
        for _ in range(2 * (n_static + n_inst)):
            _, off = r.uleb(off)
        methods = []
        for count in (n_direct, n_virtual):
            idx = 0
            for _ in range(count):
                diff, off = r.uleb(off)
                access, off = r.uleb(off)
                code_off, off = r.uleb(off)
                idx += diff
                sig = self.method(idx)
                body = None
                if code_off:
                    try:
                        body = self._code(code_off, sig)
                    except MalformedCode as exc:
                        self.diagnostics.append(f"dex: {sig}: {exc}; body dropped")
                methods.append(M.EncodedMethod(sig, access, body))
        return tuple(methods)

    def _code(self, off, sig):
        r = self.r
        r.check(off, 16)
        registers, ins_size, _outs, tries_size = struct.unpack_from("<4H", r.data, off)
        insns_size = r.u32(off + 12)
        insns_off = off + 16
        r.check(insns_off, insns_size * 2)
        units = struct.unpack_from(f"<{insns_size}H", r.data, insns_off)
        instructions = _decode_instructions(units, self)
        try_blocks = ()
        if tries_size:
            tries_off = insns_off + insns_size * 2 + (2 if insns_size % 2 else 0)
            handlers_off = tries_off + tries_size * 8
            tries = r.array("<IHH", tries_off, tries_size)
            blocks = []
            for start, count, h_off in tries:
                blocks.append(M.TryBlock(start, start + count, self._handlers(handlers_off + h_off)))
            try_blocks = tuple(blocks)
        body = M.MethodBody(registers, ins_size, tuple(instructions), try_blocks)
        _validate_body(body)
        return body

    def _handlers(self, off):
        r = self.r
        size, off = r.sleb(off)
        handlers = []
        for _ in range(abs(size)):
            type_idx, off = r.uleb(off)
            addr, off = r.uleb(off)
            handlers.append((self.type(type_idx), addr))
        if size <= 0:
            addr, off = r.uleb(off)
            handlers.append((None, addr))
        return tuple(handlers)


def _validate_body(body):
    offsets = [i.offset for i in body.instructions]
    valid = set(offsets)
    for ins in body.instructions:
        for t in ins.targets:
            if t not in valid:
                raise MalformedCode(f"branch at {ins.offset:#x} targets {t:#x}, not an instruction boundary")
        for reg in ins.registers():
            if reg >= body.registers:
                raise MalformedCode(f"register v{reg} at {ins.offset:#x} >= {body.registers} registers")
    end = offsets[-1] + body.instructions[-1].width if offsets else 0
    for tb in body.try_blocks:
        for _, h in tb.handlers:
            if h not in valid:
                raise MalformedCode(f"handler {h:#x} not an instruction boundary")
        if tb.start > end or tb.end > end:
            raise MalformedCode("try block outside code")
    if body.ins_size > body.registers:
        raise MalformedCode("ins_size exceeds register count")


def _s8(v):
    return v - 0x100 if v & 0x80 else v


def _s16(v):
    return v - 0x10000 if v & 0x8000 else v


def _s32(lo, hi):
    v = lo | (hi << 16)
    return v - 0x100000000 if v & 0x80000000 else v


def _is_wide_type(t):
    return t in ("long", "double")


def _decode_instructions(units, dex):
    out = []
    pc = 0
    n = len(units)
    payload_targets = {}
    while pc < n:
        u = units[pc]
        op = u & 0xFF
        if op == 0 and u in (PACKED_SWITCH_PAYLOAD, SPARSE_SWITCH_PAYLOAD, FILL_ARRAY_DATA_PAYLOAD):
            pc += _payload_units(units, pc)
            continue
        name, fmt = OPCODES[op]
        width = FORMAT_UNITS[fmt]
        if pc + width > n:
            raise MalformedCode(f"instruction at {pc:#x} runs past end of code")
        w = units[pc:pc + width]
        out.append(_build(pc, op, name, fmt, w, dex, units, payload_targets))
        pc += width
    return out


def _payload_units(units, pc):
    ident = units[pc]
    if pc + 2 > len(units):
        raise MalformedCode("truncated payload")
    size = units[pc + 1]
    if ident == PACKED_SWITCH_PAYLOAD:
        total = 4 + size * 2
    elif ident == SPARSE_SWITCH_PAYLOAD:
        total = 2 + size * 4
    else:
        if pc + 4 > len(units):
            raise MalformedCode("truncated payload")
        count = units[pc + 2] | (units[pc + 3] << 16)
        total = 4 + (count * size + 1) // 2
    if pc + total > len(units):
        raise MalformedCode("payload runs past end of code")
    return total


def _switch_targets(units, pc, payload_pc):
    if payload_pc < 0 or payload_pc + 2 > len(units):
        raise MalformedCode(f"switch payload at {payload_pc:#x} out of range")
    ident, size = units[payload_pc], units[payload_pc + 1]
    if ident == PACKED_SWITCH_PAYLOAD:
        base = payload_pc + 4
    elif ident == SPARSE_SWITCH_PAYLOAD:
        base = payload_pc + 2 + size * 2
    else:
        raise MalformedCode(f"switch at {pc:#x} does not point at a switch payload")
    if base + size * 2 > len(units):
        raise MalformedCode("switch payload truncated")
    return tuple(pc + _s32(units[base + 2 * i], units[base + 2 * i + 1]) for i in range(size))


def _build(pc, op, name, fmt, w, dex, units, _cache):
    I = M.Instruction
    a8 = w[0] >> 8
    a4, b4 = (w[0] >> 8) & 0xF, w[0] >> 12
    width = len(w)
    common = dict(offset=pc, opcode=op, name=name, width=width)

    # invokes
    if fmt in ("35c", "45cc", "3rc", "4rcc") and name.startswith(("invoke", "filled-new-array")):
        if fmt in ("35c", "45cc"):
            count = b4
            regs = (w[2] & 0xF, (w[2] >> 4) & 0xF, (w[2] >> 8) & 0xF, w[2] >> 12, a4)[:count]
            if count > 5:
                raise MalformedCode(f"invoke at {pc:#x} with {count} arguments")
        else:
            count = a8
            regs = tuple(range(w[2], w[2] + count))
        if name.startswith("filled-new-array"):
            return I(kind=M.OTHER, defs=(M.RESULT_REG,), uses=regs, **common)
        if name.startswith("invoke-custom"):
            return I(kind=M.OTHER, defs=(M.RESULT_REG,), uses=regs, **common)
        return I(kind=M.INVOKE, method=dex.method(w[1]), args=regs,
                 is_static=name.startswith("invoke-static"), defs=(M.RESULT_REG,), uses=regs, **common)

    if name in ("const-string", "const-string/jumbo"):
        idx = w[1] if fmt == "21c" else w[1] | (w[2] << 16)
        return I(kind=M.CONST_STRING, string=dex.string(idx), dst=a8, defs=(a8,), **common)

    if name.startswith("move-result"):
        return I(kind=M.MOVE_RESULT, dst=a8, defs=(a8,), uses=(M.RESULT_REG,), **common)
    if name in ("move", "move-object"):
        return I(kind=M.MOVE, dst=a4, src=b4, defs=(a4,), uses=(b4,), **common)
    if name in ("move/from16", "move-object/from16"):
        return I(kind=M.MOVE, dst=a8, src=w[1], defs=(a8,), uses=(w[1],), **common)
    if name in ("move/16", "move-object/16"):
        return I(kind=M.MOVE, dst=w[1], src=w[2], defs=(w[1],), uses=(w[2],), **common)
    if name.startswith("move-wide"):
        if fmt == "12x":
            d, s = a4, b4
        elif fmt == "22x":
            d, s = a8, w[1]
        else:
            d, s = w[1], w[2]
        return I(kind=M.OTHER, defs=(d, d + 1), uses=(s, s + 1), **common)
    if name == "move-exception":
        return I(kind=M.OTHER, defs=(a8,), **common)

    if name == "return-void":
        return I(kind=M.RETURN, falls_through=False, **common)
    if name.startswith("return"):
        return I(kind=M.RETURN, src=a8, uses=(a8,), falls_through=False, **common)

    if name == "throw":
        return I(kind=M.OTHER, uses=(a8,), falls_through=False, **common)
    if name.startswith("goto"):
        if fmt == "10t":
            off = _s8(a8)
        elif fmt == "20t":
            off = _s16(w[1])
        else:
            off = _s32(w[1], w[2])
        return I(kind=M.BRANCH, targets=(pc + off,), falls_through=False, **common)
    if name.startswith("if-"):
        if fmt == "22t":
            return I(kind=M.BRANCH, targets=(pc + _s16(w[1]),), uses=(a4, b4), **common)
        return I(kind=M.BRANCH, targets=(pc + _s16(w[1]),), uses=(a8,), **common)
    if name in ("packed-switch", "sparse-switch"):
        targets = _switch_targets(units, pc, pc + _s32(w[1], w[2]))
        return I(kind=M.BRANCH, targets=targets, uses=(a8,), **common)

    # field access (field-insensitive heap)
    if fmt == "22c" and name.startswith(("iget", "iput")):
        fld = dex.field(w[1])
        wide = name.endswith("-wide")
        if name.startswith("iget"):
            return I(kind=M.OTHER, defs=(a4, a4 + 1) if wide else (a4,), uses=(b4,),
                     field=fld, field_op="load", **common)
        return I(kind=M.OTHER, uses=(a4, b4), src=a4, field=fld, field_op="store", **common)
    if fmt == "21c" and name.startswith(("sget", "sput")):
        fld = dex.field(w[1])
        wide = name.endswith("-wide")
        if name.startswith("sget"):
            return I(kind=M.OTHER, defs=(a8, a8 + 1) if wide else (a8,), field=fld, field_op="load", **common)
        return I(kind=M.OTHER, uses=(a8,), src=a8, field=fld, field_op="store", **common)

    if name.startswith("aget"):
        c, b = w[1] >> 8, w[1] & 0xFF
        wide = name.endswith("-wide")
        return I(kind=M.OTHER, defs=(a8, a8 + 1) if wide else (a8,), uses=(b, c), **common)
    if name.startswith("aput"):
        c, b = w[1] >> 8, w[1] & 0xFF
        vals = (a8, a8 + 1) if name.endswith("-wide") else (a8,)
        return I(kind=M.OTHER, defs=(b,), uses=vals + (c,), weak=True, **common)

    if name.startswith("const"):
        if "wide" in name:
            return I(kind=M.OTHER, defs=(a8, a8 + 1), **common)
        if fmt == "11n":
            return I(kind=M.OTHER, defs=(a4,), **common)
        return I(kind=M.OTHER, defs=(a8,), **common)
    if name in ("new-instance", "check-cast") or name in ("const-class",):
        return I(kind=M.OTHER, defs=(a8,), uses=(a8,) if name == "check-cast" else (), **common)
    if name in ("instance-of", "new-array"):
        return I(kind=M.OTHER, defs=(a4,), uses=(b4,), **common)
    if name == "array-length":
        return I(kind=M.OTHER, defs=(a4,), uses=(b4,), **common)
    if name == "fill-array-data":
        return I(kind=M.OTHER, uses=(a8,), **common)
    if name in ("monitor-enter", "monitor-exit"):
        return I(kind=M.OTHER, uses=(a8,), **common)

    if fmt == "23x":  # cmp*, binops
        b, c = w[1] & 0xFF, w[1] >> 8
        wide_in = "-long" in name or "-double" in name
        shift = name.startswith(("shl", "shr", "ushr"))
        ub = (b, b + 1) if wide_in else (b,)
        uc = (c, c + 1) if wide_in and not shift else (c,)
        wide_out = wide_in and not name.startswith("cmp")
        return I(kind=M.OTHER, defs=(a8, a8 + 1) if wide_out else (a8,), uses=ub + uc, **common)
    if fmt == "12x":  # unary ops and /2addr binops
        if name.endswith("/2addr"):
            wide = any(t in name for t in ("-long", "-double"))
            shift = name.startswith(("shl", "shr", "ushr"))
            d = (a4, a4 + 1) if wide else (a4,)
            s = (b4,) if shift or not wide else (b4, b4 + 1)
            return I(kind=M.OTHER, defs=d, uses=d + s, **common)
        if "-to-" in name:
            src_t, dst_t = name.split("-to-")
        else:
            src_t = dst_t = name.split("-", 1)[1]
        d = (a4, a4 + 1) if _is_wide_type(dst_t) else (a4,)
        s = (b4, b4 + 1) if _is_wide_type(src_t) else (b4,)
        return I(kind=M.OTHER, defs=d, uses=s, **common)
    if fmt in ("22s", "22b"):
        if fmt == "22s":
            d, s = a4, b4
        else:
            d, s = a8, w[1] & 0xFF
        return I(kind=M.OTHER, defs=(d,), uses=(s,), **common)
    if fmt == "21c":  # const-method-handle / const-method-type
        return I(kind=M.OTHER, defs=(a8,), **common)
    # nop and unused opcodes
    return I(kind=M.OTHER, **common)


def parse_dex(members) -> M.DexProgram:
    """Parse one or more DEX images into a single merged program.

    Classes defined in more than one member keep their first definition.
    """
    if isinstance(members, (bytes, bytearray, memoryview)):
        members = [members]
    strings, types, method_refs = {}, {}, {}
    classes = []
    seen = {}
    diagnostics = []
    for idx, data in enumerate(members):
        dex = _DexFile(bytes(data), member=idx)
        for s in dex.strings:
            strings.setdefault(s, None)
        for t in dex.types:
            types.setdefault(t, None)
        for m in dex.method_refs:
            method_refs.setdefault(m, None)
        for cls in dex.classes():
            if cls.descriptor in seen:
                diagnostics.append(
                    f"dex: duplicate class {cls.descriptor} in member {idx}; keeping definition from member {seen[cls.descriptor]}")
                continue
            seen[cls.descriptor] = idx
            classes.append(cls)
        diagnostics.extend(dex.diagnostics)

    call_graph = {}
    for cls in classes:
        for m in cls.methods:
            if m.body is None or m.sig in call_graph:
                continue
            call_graph[m.sig] = frozenset(i.method for i in m.body.instructions if i.kind == M.INVOKE)
    return M.DexProgram(
        strings=list(strings),
        types=list(types),
        method_refs=list(method_refs),
        classes=classes,
        call_graph=call_graph,
        diagnostics=diagnostics,
    )
