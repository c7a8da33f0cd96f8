import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import fixturelib as fl
from vrscan.builders.axml_encoder import encode_axml
from vrscan.axml import decode_axml
from vrscan.consistency import (
    GAP_CLASSES,
    MANIFEST,
    NEGATED_WARNING,
    POLICY,
    MappingTable,
    check_biometric_permission,
    check_consistency,
)
from vrscan.dex.model import MethodSig
from vrscan.errors import ConfigError
from vrscan.manifest import PermissionTable, analyze_manifest
from vrscan.policy import default_ontology, extract_statements
from vrscan.policy.extract import PolicyStatement
from vrscan.rules import PiiUsage
from vrscan.unity.analysis import BiometricUsage

ONT = default_ontology()
MAPPING = MappingTable.load(ontology=ONT)
PERMS = PermissionTable.load()
HAND = BiometricUsage("hand", "OVRHand::GetMeshType", "cil-call-graph")


def summary(perms):
    return analyze_manifest(decode_axml(encode_axml(fl.manifest("com.c", permissions=list(perms)))), PERMS)


def counts(rep):
    return tuple(len(getattr(rep, k)) for k in GAP_CLASSES)


def run(perms=(fl.HAND_PERMISSION,), policy=fl.SILENT_POLICY, bio=(HAND,), pii=()):
    return check_consistency(summary(perms), extract_statements(policy), list(pii), list(bio), MAPPING, ONT)


def test_composed_fixture():
    rep = run()
    assert counts(rep) == (1, 0, 1, 0)
    (g,) = rep.permission_vs_policy
    assert (g.subject, g.missing_side, g.warning) == (fl.HAND_PERMISSION, POLICY, None)
    (b,) = rep.biometric_code_vs_policy
    assert b.subject == "hand" and b.evidence == ("cil-call-graph:OVRHand::GetMeshType",)


@pytest.mark.parametrize("change,expected", [
    (dict(perms=()), (0, 0, 1, 1)),
    (dict(policy="We collect your hand tracking data."), (0, 0, 0, 0)),
    (dict(policy="We collect biometric data."), (0, 0, 0, 0)),
    (dict(bio=()), (1, 0, 0, 0)),
    (dict(perms=(), bio=()), (0, 0, 0, 0)),
])
def test_inversions_flip_predicted_gaps(change, expected):
    assert counts(run(**change)) == expected


def test_manifest_gap_names_missing_permission():
    (g,) = run(perms=()).biometric_code_vs_manifest
    assert (g.subject, g.missing_side, g.evidence) == ("hand", MANIFEST, (f"missing {fl.HAND_PERMISSION}",))


def test_denial_warns():
    rep = run(policy="We do not collect biometric data.")
    assert [g.warning for g in rep.permission_vs_policy] == [NEGATED_WARNING]
    assert [g.warning for g in rep.biometric_code_vs_policy] == [NEGATED_WARNING]


def test_narrower_statement_does_not_cover():
    # collecting eye tracking data says nothing about hands
    assert counts(run(policy="We collect your eye tracking data.")) == (1, 0, 1, 0)


def test_pii_gaps():
    uses = [PiiUsage("email", MethodSig("La/B;", "readEmail", "()V")),
            PiiUsage("id", MethodSig("La/B;", "getUserId", "()V")),
            PiiUsage("user", MethodSig("La/B;", "getUserId", "()V"))]
    rep = run(perms=(), bio=(), pii=uses, policy="We collect your device identifier.")
    assert [g.subject for g in rep.pii_code_vs_policy] == ["email", "user"]
    assert rep.pii_code_vs_policy[0].evidence == ("La/B;->readEmail()V",)


def test_no_policy_reports_policy_gaps():
    rep = check_consistency(summary([fl.HAND_PERMISSION]), None, [], [HAND], MAPPING, ONT)
    assert counts(rep) == (1, 0, 1, 0)


def test_biometric_permission_default_table():
    gaps = check_biometric_permission([HAND, BiometricUsage("eye", "x", "il2cpp-string")], None)
    assert [g.subject for g in gaps] == ["eye", "hand"]


def test_mapping_rejects_unknown_node(tmp_path):
    p = tmp_path / "m.json"
    p.write_text('{"permission_to_datatype": {"a": "no such node"}, "pii_keyword_to_datatype": {},'
                 ' "biometric_kind_to_datatype": {}}')
    with pytest.raises(ConfigError):
        MappingTable.load(str(p), ontology=ONT)


def test_mapping_targets_are_nodes():
    for table in (MAPPING.permission_to_datatype, MAPPING.pii_keyword_to_datatype,
                  MAPPING.biometric_kind_to_datatype):
        assert set(table.values()) <= ONT.nodes


# --- independent coverage oracle ---------------------------------------------

def generalizations(node):
    """The node and everything above it, walking the edge list breadth first."""
    seen, frontier = {node}, [node]
    edges = ONT.edges()
    while frontier:
        frontier = [g for g, s in edges if s in frontier and g not in seen]
        seen.update(frontier)
    return seen


def expected_policy_gaps(subjects, table, statements):
    out = []
    for subj in sorted(subjects):
        if subj not in table:
            continue
        scope = generalizations(table[subj])
        if not any(s.positive and s.data_type in scope for s in statements):
            out.append(subj)
    return out


NODES = sorted(ONT.nodes)
statements = st.lists(st.builds(PolicyStatement, st.integers(0, 5), st.sampled_from(["we", "third party"]),
                                st.sampled_from(["collect", "not_collect", "share", "not_share"]),
                                st.sampled_from(NODES)), max_size=8)
perm_sets = st.lists(st.sampled_from(sorted(MAPPING.permission_to_datatype) + ["android.permission.CAMERA"]),
                     unique=True)
kinds = st.lists(st.sampled_from(["hand", "eye", "body", "face"]), unique=True)
pii_kw = st.lists(st.sampled_from(sorted(MAPPING.pii_keyword_to_datatype) + ["nothing"]), unique=True)


def _bio(ks):
    return [BiometricUsage(k, f"sym_{k}", "il2cpp-string") for k in ks]


def _pii(ks):
    return [PiiUsage(k, MethodSig("Lp/Q;", f"m_{k}", "()V")) for k in ks]


@settings(max_examples=150, deadline=None)
@given(perm_sets, statements, kinds, pii_kw)
def test_gaps_match_independent_oracle(perms, stmts, ks, pk):
    rep = check_consistency(summary(perms), stmts, _pii(pk), _bio(ks), MAPPING, ONT)
    assert [g.subject for g in rep.permission_vs_policy] == expected_policy_gaps(
        set(perms), MAPPING.permission_to_datatype, stmts)
    assert [g.subject for g in rep.pii_code_vs_policy] == expected_policy_gaps(
        set(pk), MAPPING.pii_keyword_to_datatype, stmts)
    assert [g.subject for g in rep.biometric_code_vs_policy] == expected_policy_gaps(
        set(ks), MAPPING.biometric_kind_to_datatype, stmts)
    assert [g.subject for g in rep.biometric_code_vs_manifest] == sorted(
        k for k in ks if MAPPING.biometric_kind_to_permission[k] not in perms)


@settings(max_examples=100, deadline=None)
@given(perm_sets, statements, statements, kinds)
def test_more_statements_never_add_policy_gaps(perms, a, b, ks):
    small = check_consistency(summary(perms), a, [], _bio(ks), MAPPING, ONT)
    big = check_consistency(summary(perms), a + b, [], _bio(ks), MAPPING, ONT)
    for k in ("permission_vs_policy", "biometric_code_vs_policy"):
        assert {g.subject for g in getattr(big, k)} <= {g.subject for g in getattr(small, k)}
    assert big.biometric_code_vs_manifest == small.biometric_code_vs_manifest


@settings(max_examples=100, deadline=None)
@given(perm_sets, perm_sets, kinds)
def test_more_permissions_never_add_manifest_gaps(a, b, ks):
    small = check_biometric_permission(_bio(ks), summary(a), MAPPING)
    big = check_biometric_permission(_bio(ks), summary(sorted(set(a) | set(b))), MAPPING)
    assert {g.subject for g in big} <= {g.subject for g in small}


@settings(max_examples=100, deadline=None)
@given(perm_sets, statements, kinds, st.randoms())
def test_gaps_ignore_statement_order_and_duplicates(perms, stmts, ks, rnd):
    shuffled = stmts + stmts
    rnd.shuffle(shuffled)
    a = check_consistency(summary(perms), stmts, [], _bio(ks), MAPPING, ONT)
    b = check_consistency(summary(perms), shuffled, [], _bio(ks + ks), MAPPING, ONT)
    assert a.to_dict() == b.to_dict()
