import hashlib
import io
import zipfile

import pytest

import fixturelib as fl
from vrscan.apk import CIL_ASSEMBLY, GLOBAL_METADATA, UnityBackend, open_apk, read_member
from vrscan.builders.apkbuild import build_apk
from vrscan.errors import (
    ApkError,
    CorruptEntry,
    EncryptedEntry,
    MissingManifest,
    NoSuchMember,
    NotZip,
    TruncatedArchive,
)

MAN = fl.manifest("com.t.apk", activities=[(".Main", None, None)])


def _write(tmp_path, data, name="a.apk"):
    p = tmp_path / name
    p.write_bytes(data)
    return p


def test_members_classified(tmp_path):
    dex = fl.CATEGORY_FIXTURES["RD"][1]
    data = build_apk(MAN, [dex, dex, dex], extra={"assets/readme.txt": "hi"})
    b = open_apk(_write(tmp_path, data))
    assert b.dex_members == ("classes.dex", "classes2.dex", "classes3.dex")
    assert b.unity_backend is UnityBackend.NONE
    assert b.unity_artifacts is None
    assert b.sha256 == hashlib.sha256(data).hexdigest()
    assert "assets/readme.txt" in b.entries
    assert read_member(b, "assets/readme.txt") == b"hi"


def test_dex_member_order_is_numeric(tmp_path):
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        zf.writestr("AndroidManifest.xml", MAN)
        for n in ("classes10.dex", "classes2.dex", "classes.dex", "classes3.dex", "lib/classes.dex"):
            zf.writestr(n, b"x")
    b = open_apk(_write(tmp_path, buf.getvalue()))
    assert b.dex_members == ("classes.dex", "classes2.dex", "classes3.dex", "classes10.dex")


def test_mono_and_il2cpp_detection(tmp_path):
    mono = open_apk(_write(tmp_path, build_apk(MAN, extra=fl.mono_extra(fl.CIL_HAND)), "m.apk"))
    assert mono.unity_backend is UnityBackend.MONO
    assert mono.unity_artifacts.cil_assembly_path == CIL_ASSEMBLY

    il = open_apk(_write(tmp_path, build_apk(MAN, extra=fl.il2cpp_extra(["Foo"])), "i.apk"))
    assert il.unity_backend is UnityBackend.IL2CPP
    assert il.unity_artifacts.global_metadata_path == GLOBAL_METADATA
    assert il.unity_artifacts.il2cpp_binary_path == "lib/arm64-v8a/libil2cpp.so"


def test_unreal_payload_reported(tmp_path):
    data = build_apk(MAN, extra={"lib/armeabi-v7a/libUE4.so": b"x"})
    b = open_apk(_write(tmp_path, data))
    assert any(d.startswith("unsupported-engine") for d in b.diagnostics)


def test_not_zip(tmp_path):
    with pytest.raises(NotZip):
        open_apk(_write(tmp_path, b"hello world, not a zip"))


def test_truncated_archive(tmp_path):
    data = build_apk(MAN)
    with pytest.raises(TruncatedArchive):
        open_apk(_write(tmp_path, data[: len(data) // 2]))


def test_missing_manifest(tmp_path):
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        zf.writestr("classes.dex", b"x")
    with pytest.raises(MissingManifest):
        open_apk(_write(tmp_path, buf.getvalue()))


def test_encrypted_entry(tmp_path):
    data = bytearray(build_apk(MAN))
    # set the encryption bit in both the local and the central header
    for sig, flag_off in ((b"PK\x03\x04", 6), (b"PK\x01\x02", 8)):
        i = data.find(sig)
        data[i + flag_off] |= 1
    with pytest.raises(EncryptedEntry):
        open_apk(_write(tmp_path, bytes(data)))


def _flip_crc(data, name, sig, name_len_at, crc_at):
    pos = data.find(sig)
    while pos >= 0:
        n = int.from_bytes(data[pos + name_len_at:pos + name_len_at + 2], "little")
        head = 46 if sig == b"PK\x01\x02" else 30
        if data[pos + head:pos + head + n] == name:
            data[pos + crc_at] ^= 0xFF
            return
        pos = data.find(sig, pos + 4)
    raise AssertionError(f"{name!r} not found")


def test_corrupt_entry_crc(tmp_path):
    data = bytearray(build_apk(MAN, extra={"assets/blob.bin": b"A" * 400}))
    _flip_crc(data, b"assets/blob.bin", b"PK\x01\x02", 28, 16)  # central directory
    _flip_crc(data, b"assets/blob.bin", b"PK\x03\x04", 26, 14)  # local header
    b = open_apk(_write(tmp_path, bytes(data)))
    with pytest.raises(CorruptEntry):
        read_member(b, "assets/blob.bin")


def test_no_such_member(tmp_path):
    b = open_apk(_write(tmp_path, build_apk(MAN)))
    with pytest.raises(NoSuchMember):
        read_member(b, "nope")
    assert issubclass(NoSuchMember, ApkError)


def test_builder_is_deterministic():
    a = build_apk(MAN, [fl.CATEGORY_FIXTURES["IRG"][0]])
    b = build_apk(MAN, [fl.CATEGORY_FIXTURES["IRG"][0]])
    assert a == b
