"""Deterministic APK (ZIP) writer for fixtures and synthetic corpora."""
from __future__ import annotations

import io
import zipfile

from .axml_encoder import encode_axml
from .dexasm import assemble

FIXED_DATE = (1980, 1, 1, 0, 0, 0)


def _entry(name, data, zf):
    info = zipfile.ZipInfo(name, date_time=FIXED_DATE)
    info.compress_type = zipfile.ZIP_DEFLATED
    info.external_attr = 0o644 << 16
    info.create_system = 3
    zf.writestr(info, data)


def build_apk(manifest, dex=(), extra=None, binary_manifest=True):
    """Return APK bytes.

    ``manifest`` is manifest XML text (encoded to AXML unless ``binary_manifest``
    is False) or ready-made bytes. ``dex`` items are DEX bytes or listings for
    the assembler; they become classes.dex, classes2.dex, ...
    """
    members = {}
    if isinstance(manifest, str):
        members["AndroidManifest.xml"] = encode_axml(manifest) if binary_manifest else manifest.encode("utf-8")
    else:
        members["AndroidManifest.xml"] = bytes(manifest)
    for i, d in enumerate(dex):
        name = "classes.dex" if i == 0 else f"classes{i + 1}.dex"
        members[name] = assemble(d) if isinstance(d, str) else bytes(d)
    for name, data in (extra or {}).items():
        members[name] = data.encode("utf-8") if isinstance(data, str) else bytes(data)
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        for name in sorted(members):
            _entry(name, members[name], zf)
    return buf.getvalue()


def write_apk(path, manifest, dex=(), extra=None, binary_manifest=True):
    data = build_apk(manifest, dex, extra, binary_manifest)
    with open(path, "wb") as fh:
        fh.write(data)
    return path
