"""Writer for small ``global-metadata.dat`` fixtures (header plus string sections)."""
from __future__ import annotations

import struct

from ..unity.il2cpp import METADATA_MAGIC

HEADER_SIZE = 0x100


def build_metadata(identifiers, literals=(), version=24, magic=METADATA_MAGIC):
    ldata = bytearray()
    entries = bytearray()
    for s in literals:
        b = s.encode("utf-8")
        entries += struct.pack("<Ii", len(b), len(ldata))
        ldata += b
    strings = b"".join(s.encode("utf-8") + b"\0" for s in identifiers)
    lit_off = HEADER_SIZE
    ldata_off = lit_off + len(entries)
    str_off = ldata_off + len(ldata)
    header = bytearray(HEADER_SIZE)
    struct.pack_into("<Ii6i", header, 0, magic, version, lit_off, len(entries),
                     ldata_off, len(ldata), str_off, len(strings))
    return bytes(header) + bytes(entries) + bytes(ldata) + strings
