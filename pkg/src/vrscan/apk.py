"""APK (ZIP) container access and member classification."""
from __future__ import annotations

import enum
import hashlib
import os
import re
import zipfile
import zlib
from dataclasses import dataclass, field
from typing import Optional

from .errors import (
    CorruptEntry,
    EncryptedEntry,
    MissingManifest,
    NoSuchMember,
    NotZip,
    TruncatedArchive,
)

MANIFEST = "AndroidManifest.xml"
CIL_ASSEMBLY = "assets/bin/Data/Managed/Assembly-CSharp.dll"
GLOBAL_METADATA = "assets/bin/Data/Managed/Metadata/global-metadata.dat"

_DEX_RE = re.compile(r"^classes(\d*)\.dex$")
_IL2CPP_RE = re.compile(r"^lib/([^/]+)/libil2cpp\.so$")
_UNREAL_RE = re.compile(r"^lib/[^/]+/lib(UE4|Unreal)\.so$")
_ABI_PREFERENCE = ("arm64-v8a", "armeabi-v7a", "x86_64", "x86")


class UnityBackend(str, enum.Enum):
    NONE = "None"
    MONO = "Mono"
    IL2CPP = "Il2cpp"


@dataclass(frozen=True)
class UnityArtifacts:
    cil_assembly_path: Optional[str] = None
    il2cpp_binary_path: Optional[str] = None
    global_metadata_path: Optional[str] = None


@dataclass(frozen=True)
class ApkBundle:
    source_path: str
    entries: dict
    manifest_bytes: bytes
    dex_members: tuple
    unity_backend: UnityBackend
    unity_artifacts: Optional[UnityArtifacts]
    sha256: str
    diagnostics: tuple = field(default=())


def _dex_order(name):
    suffix = _DEX_RE.match(name).group(1)
    return int(suffix) if suffix else 1


def _classify_unity(names):
    diagnostics = []
    libs = {}
    for name in names:
        m = _IL2CPP_RE.match(name)
        if m:
            libs[m.group(1)] = name
    il2cpp_bin = None
    if libs:
        for abi in _ABI_PREFERENCE:
            if abi in libs:
                il2cpp_bin = libs[abi]
                break
        else:
            il2cpp_bin = libs[sorted(libs)[0]]
    has_meta = GLOBAL_METADATA in names
    has_cil = CIL_ASSEMBLY in names

    if any(_UNREAL_RE.match(n) for n in names):
        diagnostics.append("unsupported-engine: Unreal Engine payload detected; not analyzed")

    if il2cpp_bin and has_meta:
        if has_cil:
            diagnostics.append(
                "unity: both Mono and IL2CPP artifacts present; classified as Il2cpp"
            )
        return UnityBackend.IL2CPP, UnityArtifacts(
            cil_assembly_path=CIL_ASSEMBLY if has_cil else None,
            il2cpp_binary_path=il2cpp_bin,
            global_metadata_path=GLOBAL_METADATA,
        ), diagnostics
    if il2cpp_bin or has_meta:
        diagnostics.append("unity: incomplete IL2CPP artifacts (need libil2cpp.so and global-metadata.dat)")
    if has_cil:
        return UnityBackend.MONO, UnityArtifacts(cil_assembly_path=CIL_ASSEMBLY), diagnostics
    return UnityBackend.NONE, None, diagnostics


def open_apk(path) -> ApkBundle:
    """Parse the ZIP central directory of ``path`` and classify its members.

    Nothing is decompressed here except the manifest.
    """
    path = os.fspath(path)
    with open(path, "rb") as fh:
        data = fh.read()
    sha = hashlib.sha256(data).hexdigest()

    if not data.startswith(b"PK"):
        raise NotZip(f"{path}: not a ZIP archive (bad magic)")
    try:
        zf = zipfile.ZipFile(path)
    except zipfile.BadZipFile as exc:
        # local header magic is fine but the central directory is unusable
        raise TruncatedArchive(f"{path}: {exc}") from exc
    except (OSError, ValueError) as exc:
        raise TruncatedArchive(f"{path}: {exc}") from exc

    with zf:
        infos = [i for i in zf.infolist() if not i.is_dir()]
        entries = {}
        for info in infos:
            if info.flag_bits & 0x1:
                raise EncryptedEntry(f"{path}: encrypted entry {info.filename!r}")
            entries[info.filename] = info.file_size
        if MANIFEST not in entries:
            raise MissingManifest(f"{path}: no {MANIFEST} entry")
        manifest_bytes = _read(zf, MANIFEST)

    names = sorted(entries)
    dex_members = tuple(sorted((n for n in names if _DEX_RE.match(n)), key=_dex_order))
    backend, artifacts, diagnostics = _classify_unity(names)
    return ApkBundle(
        source_path=path,
        entries=entries,
        manifest_bytes=manifest_bytes,
        dex_members=dex_members,
        unity_backend=backend,
        unity_artifacts=artifacts,
        sha256=sha,
        diagnostics=tuple(diagnostics),
    )


def _read(zf, member):
    try:
        return zf.read(member)
    except KeyError as exc:
        raise NoSuchMember(member) from exc
    except (zipfile.BadZipFile, zlib.error, EOFError) as exc:
        raise CorruptEntry(f"{member}: {exc}") from exc
    except NotImplementedError as exc:
        raise CorruptEntry(f"{member}: unsupported compression ({exc})") from exc


def read_member(bundle: ApkBundle, member: str) -> bytes:
    # a fresh handle per call keeps reads stateless and thread-safe
    if member not in bundle.entries:
        raise NoSuchMember(member)
    try:
        zf = zipfile.ZipFile(bundle.source_path)
    except (zipfile.BadZipFile, OSError) as exc:
        raise TruncatedArchive(f"{bundle.source_path}: {exc}") from exc
    with zf:
        return _read(zf, member)
