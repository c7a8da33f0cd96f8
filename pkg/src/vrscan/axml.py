"""Decoder for Android binary XML (AXML) with a plain-text XML fallback.

Both paths return an :class:`xml.etree.ElementTree.Element` whose namespaced
attributes use Clark notation (``{uri}name``), so a binary manifest and its
source text compare equal.
"""
from __future__ import annotations

import struct
import xml.etree.ElementTree as ET

from .errors import MalformedChunk, NotAxml, StringPoolOverflow

ANDROID_NS = "http://schemas.android.com/apk/res/android"

RES_STRING_POOL_TYPE = 0x0001
RES_XML_TYPE = 0x0003
RES_XML_START_NAMESPACE_TYPE = 0x0100
RES_XML_END_NAMESPACE_TYPE = 0x0101
RES_XML_START_ELEMENT_TYPE = 0x0102
RES_XML_END_ELEMENT_TYPE = 0x0103
RES_XML_CDATA_TYPE = 0x0104
RES_XML_RESOURCE_MAP_TYPE = 0x0180

TYPE_NULL = 0x00
TYPE_REFERENCE = 0x01
TYPE_ATTRIBUTE = 0x02
TYPE_STRING = 0x03
TYPE_FLOAT = 0x04
TYPE_DIMENSION = 0x05
TYPE_FRACTION = 0x06
TYPE_INT_DEC = 0x10
TYPE_INT_HEX = 0x11
TYPE_INT_BOOLEAN = 0x12

UTF8_FLAG = 0x100
NO_INDEX = 0xFFFFFFFF

AXML_MAGIC = struct.pack("<HH", RES_XML_TYPE, 8)

# Framework attribute ids, used when an obfuscator blanks attribute names.
ATTRIBUTE_IDS = {
    0x01010001: "label",
    0x01010003: "name",
    0x0101000F: "debuggable",
    0x01010010: "exported",
    0x01010012: "taskAffinity",
    0x0101001D: "launchMode",
    0x0101020C: "minSdkVersion",
    0x0101021B: "versionCode",
    0x0101021C: "versionName",
    0x01010270: "targetSdkVersion",
    0x01010280: "allowBackup",
    0x010104EC: "usesCleartextTraffic",
}


def _u16(buf, off):
    if off + 2 > len(buf):
        raise MalformedChunk(f"read past end of buffer at {off:#x}")
    return struct.unpack_from("<H", buf, off)[0]


def _u32(buf, off):
    if off + 4 > len(buf):
        raise MalformedChunk(f"read past end of buffer at {off:#x}")
    return struct.unpack_from("<I", buf, off)[0]


class StringPool:
    def __init__(self, buf, off):
        header_size = _u16(buf, off + 2)
        size = _u32(buf, off + 4)
        if header_size < 28 or size < header_size or off + size > len(buf):
            raise MalformedChunk("string pool chunk out of bounds")
        count = _u32(buf, off + 8)
        flags = _u32(buf, off + 16)
        strings_start = _u32(buf, off + 20)
        if count * 4 > size - header_size:
            raise MalformedChunk("string pool offsets exceed chunk")
        self._buf = buf
        self._end = off + size
        self._base = off + strings_start
        self._utf8 = bool(flags & UTF8_FLAG)
        self._offsets = struct.unpack_from(f"<{count}I", buf, off + header_size)
        self._cache = {}

    def __len__(self):
        return len(self._offsets)

    def get(self, idx):
        if idx == NO_INDEX:
            return None
        if idx >= len(self._offsets):
            raise StringPoolOverflow(f"string index {idx} >= pool size {len(self._offsets)}")
        if idx not in self._cache:
            self._cache[idx] = self._decode(self._base + self._offsets[idx])
        return self._cache[idx]

    def _decode(self, pos):
        buf = self._buf
        if pos >= self._end:
            raise MalformedChunk("string offset outside pool")
        if self._utf8:
            # utf-16 length (skipped), then utf-8 byte length
            n = buf[pos]
            pos += 2 if n & 0x80 else 1
            if pos >= self._end:
                raise MalformedChunk("truncated string")
            n = buf[pos]
            if n & 0x80:
                n = ((n & 0x7F) << 8) | buf[pos + 1]
                pos += 2
            else:
                pos += 1
            if pos + n > self._end:
                raise MalformedChunk("string data exceeds pool")
            return buf[pos:pos + n].decode("utf-8", errors="replace")
        n = _u16(buf, pos)
        pos += 2
        if n & 0x8000:
            n = ((n & 0x7FFF) << 16) | _u16(buf, pos)
            pos += 2
        if pos + 2 * n > self._end:
            raise MalformedChunk("string data exceeds pool")
        return buf[pos:pos + 2 * n].decode("utf-16-le", errors="replace")


def _format_value(pool, raw_idx, dtype, data):
    if dtype == TYPE_STRING:
        return pool.get(data) if raw_idx == NO_INDEX else pool.get(raw_idx)
    if raw_idx != NO_INDEX:
        return pool.get(raw_idx)
    if dtype == TYPE_INT_BOOLEAN:
        return "true" if data else "false"
    if dtype == TYPE_INT_DEC:
        return str(struct.unpack("<i", struct.pack("<I", data))[0])
    if dtype == TYPE_INT_HEX:
        return f"0x{data:08x}"
    if dtype == TYPE_REFERENCE:
        return f"@0x{data:08x}"
    if dtype == TYPE_ATTRIBUTE:
        return f"?0x{data:08x}"
    if dtype == TYPE_FLOAT:
        return repr(struct.unpack("<f", struct.pack("<I", data))[0])
    if dtype == TYPE_NULL:
        return ""
    return f"0x{data:08x}"


def _decode_binary(buf):
    if len(buf) < 8:
        raise MalformedChunk("truncated file header")
    total = _u32(buf, 4)
    if total > len(buf) or total < 8:
        raise MalformedChunk(f"file header declares {total} bytes, have {len(buf)}")
    pool = None
    resource_ids = ()
    ns_prefix = {}
    stack = []
    root = None
    pos = 8
    while pos < total:
        if pos + 8 > total:
            raise MalformedChunk(f"truncated chunk header at {pos:#x}")
        ctype = _u16(buf, pos)
        hsize = _u16(buf, pos + 2)
        csize = _u32(buf, pos + 4)
        if csize < 8 or hsize < 8 or hsize > csize or pos + csize > total:
            raise MalformedChunk(f"bad chunk size at {pos:#x}")
        if ctype == RES_STRING_POOL_TYPE:
            pool = StringPool(buf, pos)
        elif ctype == RES_XML_RESOURCE_MAP_TYPE:
            n = (csize - hsize) // 4
            resource_ids = struct.unpack_from(f"<{n}I", buf, pos + hsize)
        elif ctype in (RES_XML_START_NAMESPACE_TYPE, RES_XML_END_NAMESPACE_TYPE):
            if pool is None or csize < 24:
                raise MalformedChunk("namespace chunk before string pool")
            prefix, uri = pool.get(_u32(buf, pos + 16)), pool.get(_u32(buf, pos + 20))
            if ctype == RES_XML_START_NAMESPACE_TYPE:
                ns_prefix[uri] = prefix
        elif ctype == RES_XML_START_ELEMENT_TYPE:
            if pool is None or csize < 36:
                raise MalformedChunk("element chunk malformed")
            ext = pos + hsize
            ns_idx, name_idx = _u32(buf, ext), _u32(buf, ext + 4)
            attr_start, attr_size, attr_count = struct.unpack_from("<HHH", buf, ext + 8)
            if attr_size < 20 or ext + attr_start + attr_size * attr_count > pos + csize:
                raise MalformedChunk("attributes exceed element chunk")
            tag = _qualify(pool.get(ns_idx), pool.get(name_idx))
            elem = ET.Element(tag)
            for i in range(attr_count):
                a = ext + attr_start + i * attr_size
                a_ns, a_name, a_raw = struct.unpack_from("<III", buf, a)
                dtype = buf[a + 15]
                data = _u32(buf, a + 16)
                name = pool.get(a_name)
                if not name and a_name < len(resource_ids):
                    name = ATTRIBUTE_IDS.get(resource_ids[a_name], f"attr_{resource_ids[a_name]:08x}")
                elem.set(_qualify(pool.get(a_ns), name), _format_value(pool, a_raw, dtype, data))
            if stack:
                stack[-1].append(elem)
            elif root is None:
                root = elem
            else:
                raise MalformedChunk("multiple root elements")
            stack.append(elem)
        elif ctype == RES_XML_END_ELEMENT_TYPE:
            if not stack:
                raise MalformedChunk("unbalanced end element")
            stack.pop()
        elif ctype == RES_XML_CDATA_TYPE:
            pass
        pos += csize
    if stack:
        raise MalformedChunk("unterminated element(s) at end of document")
    if root is None:
        raise MalformedChunk("document has no root element")
    return root


def _qualify(ns, name):
    if name is None:
        raise MalformedChunk("element or attribute without a name")
    return f"{{{ns}}}{name}" if ns else name


def is_axml(data: bytes) -> bool:
    return data[:4] == AXML_MAGIC


def decode_axml(data: bytes) -> ET.Element:
    """Decode a binary manifest, or parse ``data`` as text XML if it is not AXML."""
    if is_axml(data):
        return _decode_binary(data)
    text = data.lstrip(b"\xef\xbb\xbf \t\r\n")
    if not text.startswith(b"<"):
        raise NotAxml("neither binary AXML nor text XML")
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise NotAxml(f"text XML parse failed: {exc}") from exc
    for elem in root.iter():
        if elem.text is not None and not elem.text.strip():
            elem.text = None
        elem.tail = None
    return root


def tree_signature(elem):
    """Order-preserving, hashable form of an element tree for comparisons."""
    return (
        elem.tag,
        tuple(sorted(elem.attrib.items())),
        tuple(tree_signature(c) for c in elem),
    )
