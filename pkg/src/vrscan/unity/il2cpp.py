"""String-level scan of IL2CPP ``global-metadata.dat`` files.

Only the identifier and literal sections are read. Anything that does not look
like a metadata file is scanned for printable ASCII runs instead, so callers
always get some symbol set back together with a diagnostic.
"""
from __future__ import annotations

import re
import struct
from dataclasses import dataclass, field

METADATA_MAGIC = 0xFAB11BAF
TIER = "metadata-string-scan"
MIN_RUN = 4

_PRINTABLE = re.compile(rb"[\x20-\x7e]{%d,}" % MIN_RUN)
_IDENT = re.compile(r"^[A-Za-z_<][\w.<>`$|-]*$")


@dataclass
class Il2cppSymbols:
    method_names: set = field(default_factory=set)
    string_literals: set = field(default_factory=set)
    tier: str = TIER
    diagnostics: list = field(default_factory=list)

    def all_symbols(self):
        return self.method_names | self.string_literals


def printable_runs(data):
    return [m.group().decode("ascii") for m in _PRINTABLE.finditer(data)]


def _raw_scan(data, why):
    runs = printable_runs(data)
    sym = Il2cppSymbols(diagnostics=[f"il2cpp: {why}; fell back to raw printable-string scan"])
    sym.string_literals = set(runs)
    sym.method_names = {r for r in runs if _IDENT.match(r)}
    return sym


def _section(data, off, size, name):
    if off < 0 or size < 0 or off + size > len(data):
        raise ValueError(f"{name} section [{off:#x}, +{size:#x}) outside file of {len(data)} bytes")
    return data[off:off + size]


def scan_il2cpp_metadata(data) -> Il2cppSymbols:
    data = bytes(data)
    if not data:
        return Il2cppSymbols(diagnostics=["il2cpp: empty metadata file"])
    if len(data) < 32:
        return _raw_scan(data, "file too short for a metadata header")
    magic, version = struct.unpack_from("<Ii", data, 0)
    if magic != METADATA_MAGIC:
        return _raw_scan(data, f"bad magic {magic:#010x}")
    lit_off, lit_size, ldata_off, ldata_size, str_off, str_size = struct.unpack_from("<6i", data, 8)
    try:
        literals = _section(data, lit_off, lit_size, "stringLiteral")
        ldata = _section(data, ldata_off, ldata_size, "stringLiteralData")
        strings = _section(data, str_off, str_size, "string")
    except ValueError as exc:
        return _raw_scan(data, str(exc))
    sym = Il2cppSymbols()
    bad = 0
    for length, index in struct.iter_unpack("<Ii", literals[:len(literals) // 8 * 8]):
        if index < 0 or index + length > len(ldata):
            bad += 1
            continue
        sym.string_literals.add(ldata[index:index + length].decode("utf-8", "replace"))
    if bad:
        sym.diagnostics.append(f"il2cpp: {bad} string literal(s) point outside the literal data")
    for chunk in strings.split(b"\0"):
        if chunk:
            sym.method_names.add(chunk.decode("utf-8", "replace"))
    if version < 24:
        sym.diagnostics.append(f"il2cpp: metadata version {version} predates the supported layout")
    return sym
