"""Encode a text manifest into Android binary XML, the way aapt lays it out."""
from __future__ import annotations

import struct
import xml.etree.ElementTree as ET

from ..axml import (
    ANDROID_NS,
    ATTRIBUTE_IDS,
    NO_INDEX,
    RES_STRING_POOL_TYPE,
    RES_XML_END_ELEMENT_TYPE,
    RES_XML_END_NAMESPACE_TYPE,
    RES_XML_RESOURCE_MAP_TYPE,
    RES_XML_START_ELEMENT_TYPE,
    RES_XML_START_NAMESPACE_TYPE,
    RES_XML_TYPE,
    TYPE_INT_BOOLEAN,
    TYPE_INT_DEC,
    TYPE_STRING,
    UTF8_FLAG,
)

_ID_BY_NAME = {v: k for k, v in ATTRIBUTE_IDS.items()}
BOOLEAN_ATTRS = {"allowBackup", "debuggable", "usesCleartextTraffic", "exported", "enabled", "hasCode"}
INT_ATTRS = {"versionCode", "minSdkVersion", "targetSdkVersion", "maxSdkVersion"}
LAUNCH_MODES = {"standard": 0, "singleTop": 1, "singleTask": 2, "singleInstance": 3, "singleInstancePerTask": 4}


def _split(qname):
    if qname.startswith("{"):
        uri, name = qname[1:].split("}", 1)
        return uri, name
    return None, qname


class _Pool:
    def __init__(self):
        self.strings = []
        self.index = {}

    def add(self, s):
        if s is None:
            return NO_INDEX
        if s not in self.index:
            self.index[s] = len(self.strings)
            self.strings.append(s)
        return self.index[s]

    def encode(self, utf8):
        datas = []
        for s in self.strings:
            if utf8:
                raw = s.encode("utf-8")
                datas.append(_len8(len(s)) + _len8(len(raw)) + raw + b"\x00")
            else:
                raw = s.encode("utf-16-le")
                n = len(raw) // 2
                head = struct.pack("<H", n) if n < 0x8000 else struct.pack("<HH", 0x8000 | (n >> 16), n & 0xFFFF)
                datas.append(head + raw + b"\x00\x00")
        offsets, pos = [], 0
        for d in datas:
            offsets.append(pos)
            pos += len(d)
        body = b"".join(datas)
        body += b"\x00" * (-len(body) % 4)
        count = len(self.strings)
        header_size = 28
        strings_start = header_size + 4 * count
        size = strings_start + len(body)
        head = struct.pack(
            "<HHIIIIII", RES_STRING_POOL_TYPE, header_size, size, count, 0,
            UTF8_FLAG if utf8 else 0, strings_start, 0,
        )
        return head + struct.pack(f"<{count}I", *offsets) + body


def _len8(n):
    if n < 0x80:
        return bytes([n])
    return bytes([0x80 | (n >> 8), n & 0xFF])


def _typed(name, ns, value):
    """(raw string or None, data type, data) for one attribute value."""
    if ns == ANDROID_NS:
        if name in BOOLEAN_ATTRS and value.lower() in ("true", "false"):
            return None, TYPE_INT_BOOLEAN, 0xFFFFFFFF if value.lower() == "true" else 0
        if name in INT_ATTRS and value.lstrip("-").isdigit():
            return None, TYPE_INT_DEC, int(value) & 0xFFFFFFFF
        if name == "launchMode" and value in LAUNCH_MODES:
            return None, TYPE_INT_DEC, LAUNCH_MODES[value]
    return value, TYPE_STRING, None


def encode_axml(source, utf8: bool = False) -> bytes:
    """Encode ``source`` (text XML bytes/str or an Element) as AXML."""
    if isinstance(source, (bytes, str)):
        root = ET.fromstring(source)
    else:
        root = source

    pool = _Pool()
    # attribute names that carry framework resource ids go first, as aapt does
    res_names = []
    for elem in root.iter():
        for qname in elem.attrib:
            uri, name = _split(qname)
            if uri == ANDROID_NS and name in _ID_BY_NAME and name not in res_names:
                res_names.append(name)
    for name in res_names:
        pool.add(name)
    uses_android = any(_split(q)[0] == ANDROID_NS for e in root.iter() for q in e.attrib)
    if uses_android:
        pool.add("android")
        pool.add(ANDROID_NS)

    chunks = []
    line = 1
    if uses_android:
        chunks.append(struct.pack("<HHIIIII", RES_XML_START_NAMESPACE_TYPE, 16, 24, line, NO_INDEX,
                                  pool.add("android"), pool.add(ANDROID_NS)))

    def emit(elem):
        nonlocal line
        line += 1
        ns, tag = _split(elem.tag)
        attrs = []
        for qname, value in elem.attrib.items():
            a_ns, a_name = _split(qname)
            raw, dtype, data = _typed(a_name, a_ns, value)
            name_idx = pool.add(a_name)
            ns_idx = pool.add(a_ns)
            raw_idx = pool.add(raw) if raw is not None else NO_INDEX
            if data is None:
                data = raw_idx
            attrs.append((name_idx, ns_idx, raw_idx, dtype, data))
        attrs.sort(key=lambda a: a[0])
        body = b"".join(
            struct.pack("<IIIHBBI", a_ns, a_name, a_raw, 8, 0, dtype, data)
            for a_name, a_ns, a_raw, dtype, data in attrs
        )
        ext = struct.pack("<IIHHHHHH", pool.add(ns), pool.add(tag), 20, 20, len(attrs), 0, 0, 0)
        chunks.append(struct.pack("<HHIII", RES_XML_START_ELEMENT_TYPE, 16, 16 + len(ext) + len(body),
                                  line, NO_INDEX) + ext + body)
        for child in elem:
            emit(child)
        line += 1
        chunks.append(struct.pack("<HHIIIII", RES_XML_END_ELEMENT_TYPE, 16, 24, line, NO_INDEX,
                                  pool.add(ns), pool.add(tag)))

    emit(root)
    if uses_android:
        chunks.append(struct.pack("<HHIIIII", RES_XML_END_NAMESPACE_TYPE, 16, 24, line + 1, NO_INDEX,
                                  pool.add("android"), pool.add(ANDROID_NS)))

    pool_chunk = pool.encode(utf8)
    ids = [_ID_BY_NAME[n] for n in res_names]
    resmap = struct.pack("<HHI", RES_XML_RESOURCE_MAP_TYPE, 8, 8 + 4 * len(ids)) + struct.pack(f"<{len(ids)}I", *ids)
    body = pool_chunk + resmap + b"".join(chunks)
    return struct.pack("<HHI", RES_XML_TYPE, 8, 8 + len(body)) + body
