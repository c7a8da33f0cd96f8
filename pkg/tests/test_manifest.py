import xml.etree.ElementTree as ET

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import fixturelib as fl
from vrscan.axml import decode_axml, tree_signature
from vrscan.builders.axml_encoder import encode_axml
from vrscan.errors import AxmlError, MalformedChunk, MissingPackageName, NotAxml
from vrscan.manifest import (
    LAUNCH_MODES,
    PermissionTable,
    analyze_manifest,
    detect_manifest_findings,
)

TABLE = PermissionTable.load()


def summary_of(data):
    return analyze_manifest(decode_axml(data), TABLE)


@pytest.mark.parametrize("utf8", [False, True])
@pytest.mark.parametrize("doc", fl.manifest_documents(), ids=lambda d: d.split('package="')[1].split('"')[0])
def test_binary_and_text_agree(doc, utf8):
    binary = encode_axml(doc, utf8=utf8)
    assert binary[:4] != b"<man"
    assert summary_of(binary) == summary_of(doc.encode("utf-8"))


def test_plain_tree_round_trip():
    # documents without typed attributes decode to the very same tree
    doc = (f'<manifest xmlns:android="{fl.ANDROID_NS}" package="com.p">'
           '<application android:label="L"><activity android:name=".A"/></application></manifest>')
    assert tree_signature(decode_axml(encode_axml(doc))) == tree_signature(decode_axml(doc.encode()))


def test_summary_fields():
    s = summary_of(encode_axml(fl.manifest_documents()[3]))
    assert s.package_name == "com.doc.three"
    assert s.version_code == 1
    assert s.sdk_version == {"min": 23, "target": 29}
    assert [a.name for a in s.activities] == ["com.doc.three.Main", "x.y.Z"]
    assert s.flags.allow_backup is True and s.flags.debuggable is False
    assert s.flags.uses_cleartext_traffic is None


def test_permissions_deduplicated_and_classified():
    s = summary_of(encode_axml(fl.manifest_documents()[4]))
    names = [p.name for p in s.permissions]
    assert names == ["android.permission.INTERNET", "android.permission.ACCESS_FINE_LOCATION"]
    by = {p.name: p for p in s.permissions}
    assert by["android.permission.INTERNET"].protection_level == "normal"
    assert by["android.permission.ACCESS_FINE_LOCATION"].protection_level == "dangerous"


def test_oculus_and_custom_permissions():
    assert TABLE.classify(fl.HAND_PERMISSION).origin == "oculus"
    assert TABLE.classify(fl.HAND_PERMISSION).protection_level == "dangerous"
    p = TABLE.classify("com.vendor.permission.CUSTOM")
    assert (p.origin, p.protection_level) == ("custom", "unknown")


def test_split_and_sdk23_permissions():
    docs = fl.manifest_documents()
    assert summary_of(encode_axml(docs[9])).is_split
    s = summary_of(encode_axml(docs[8]))
    assert s.permission_names() == {"android.permission.READ_CONTACTS"}
    assert s.activities[0].exported is True


def test_missing_package():
    with pytest.raises(MissingPackageName):
        analyze_manifest(ET.fromstring("<manifest/>"), TABLE)
    with pytest.raises(MissingPackageName):
        analyze_manifest(ET.fromstring('<application package="x"/>'), TABLE)


def test_bad_inputs():
    with pytest.raises(NotAxml):
        decode_axml(b"\x00\x01garbage")
    with pytest.raises(NotAxml):
        decode_axml(b"<manifest")
    good = encode_axml(fl.manifest_documents()[1])
    with pytest.raises(MalformedChunk):
        decode_axml(good[: len(good) - 7])


@settings(max_examples=200, deadline=None)
@given(st.binary(max_size=300))
def test_decoder_errors_are_typed(blob):
    data = encode_axml(fl.manifest_documents()[2])
    mutated = data[:8] + blob + data[8 + len(blob):]
    try:
        decode_axml(mutated)
    except Exception as exc:
        assert isinstance(exc, AxmlError), repr(exc)


def test_flag_findings_only_when_true():
    s = summary_of(encode_axml(fl.manifest_documents()[3]))
    cats = [f.category for f in detect_manifest_findings(s)]
    assert "AllowBackup" in cats and "Debuggable" not in cats and "CleartextTraffic" not in cats
    s = summary_of(encode_axml(fl.manifest_documents()[0]))
    assert detect_manifest_findings(s) == []


activity = st.tuples(
    st.from_regex(r"\.[A-Z][a-z]{0,6}", fullmatch=True),
    st.sampled_from((None,) + LAUNCH_MODES),
    st.sampled_from((None, "", "com.other.task")),
)


def expected_hijack(activities, package):
    out = []
    for name, mode, affinity in activities:
        if mode == "singleTask" and affinity is None:
            out.append(package + name)
    return sorted(out)


def check_task_hijacking(activities, binary=True):
    doc = fl.manifest("com.prop", activities=activities)
    data = encode_axml(doc) if binary else doc.encode()
    found = [f.location.class_name for f in detect_manifest_findings(summary_of(data))
             if f.category == "TaskHijacking"]
    assert sorted(found) == expected_hijack(activities, "com.prop")


@settings(max_examples=300, deadline=None)
@given(st.lists(activity, max_size=12), st.booleans())
def test_task_hijacking_property(activities, binary):
    check_task_hijacking(activities, binary)
