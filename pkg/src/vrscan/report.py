"""Per-app pipeline, corpus aggregation and JSON / markdown rendering."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional

from . import __version__
from .apk import CIL_ASSEMBLY, GLOBAL_METADATA, UnityBackend, open_apk, read_member
from .axml import decode_axml
from .config import ScanConfig
from .consistency import GAP_CLASSES, ConsistencyReport, check_consistency
from .dex import parse_dex
from .dex.model import DexProgram
from .errors import ApkError, EmptyCorpus, VrScanError
from .manifest import analyze_manifest, detect_manifest_findings
from .policy.contradictions import detect_contradictions
from .policy.extract import extract_statements
from .policy.gdpr import check_gdpr
from .policy.text import looks_like_html, looks_non_english, strip_html
from .rules import CATEGORIES, find_pii_methods
from .rules import evaluate_rules
from .taint.engine import analyze as taint_analyze
from .unity.analysis import KINDS, assess_iap, detect_biometric_functions
from .unity.cil import parse_cil
from .unity.il2cpp import scan_il2cpp_metadata

REPORT_FORMAT = "vrscan-app-report"
STATS_FORMAT = "vrscan-corpus-stats"
MANIFEST_CLASSES = ("TaskHijacking", "SingleInstanceLaunch", "AllowBackup", "Debuggable", "CleartextTraffic",
                    "DangerousPermission")
DANGEROUS_LAUNCH = ("TaskHijacking", "SingleInstanceLaunch")
IAP_CLASSES = ("none", "local", "server", "not-applicable")


def percent(count, denominator):
    return round(100 * count / denominator, 2) if denominator else None


def format_ratio(count, denominator):
    """``"276 (55.20%)"``; the percentage is rounded to two decimals."""
    pct = percent(count, denominator)
    return f"{count} (n/a)" if pct is None else f"{count} ({pct:.2f}%)"


def anonymize_name(package):
    return hashlib.md5(package.encode("utf-8")).hexdigest()[:5]


@dataclass
class AppReport:
    sha256: str
    package_name: Optional[str]
    manifest: Optional[object] = None  # ManifestSummary
    manifest_findings: list = field(default_factory=list)
    rule_findings: list = field(default_factory=list)
    taint_paths: list = field(default_factory=list)
    unity: dict = field(default_factory=dict)
    policy: Optional[dict] = None
    consistency: ConsistencyReport = field(default_factory=ConsistencyReport)
    diagnostics: list = field(default_factory=list)

    @property
    def has_policy(self):
        return self.policy is not None

    def to_dict(self):
        m = self.manifest
        manifest = None
        if m is not None:
            manifest = {
                "app_name": m.app_name,
                "package_name": m.package_name,
                "version_code": m.version_code,
                "sdk_version": {"min": m.sdk_version.get("min"), "target": m.sdk_version.get("target")},
                "permissions": [{"name": p.name, "origin": p.origin, "protection_level": p.protection_level}
                                for p in m.permissions],
                "activities": [{"name": a.name, "launch_mode": a.launch_mode, "has_task_affinity": a.has_task_affinity,
                                "exported": a.exported} for a in m.activities],
                "flags": {"allow_backup": m.flags.allow_backup, "debuggable": m.flags.debuggable,
                          "uses_cleartext_traffic": m.flags.uses_cleartext_traffic},
                "is_split": m.is_split,
            }
        categories = sorted({f.category for f in self.rule_findings})
        return {
            "format": REPORT_FORMAT,
            "tool_version": __version__,
            "app_id": {"sha256": self.sha256, "package_name": self.package_name},
            "facts": {
                "no_privacy_policy": not self.has_policy,
                "no_root_detection": "RD" in categories,
                "finding_categories": categories,
            },
            "manifest": {"summary": manifest, "findings": [f.to_dict() for f in self.manifest_findings]},
            "rule_findings": [f.to_dict() for f in self.rule_findings],
            "taint_paths": [p.to_dict() for p in self.taint_paths],
            "unity": self.unity,
            "policy": self.policy,
            "consistency": self.consistency.to_dict(),
            "diagnostics": list(self.diagnostics),
        }


def _parse_program(bundle, diags):
    datas = []
    for name in bundle.dex_members:
        try:
            datas.append((name, read_member(bundle, name)))
        except ApkError as exc:
            diags.append(f"dex: {name}: {exc}")
    try:
        return parse_dex([d for _, d in datas])
    except VrScanError:
        pass
    good = []
    for name, data in datas:
        try:
            parse_dex(data)
            good.append(data)
        except VrScanError as exc:
            diags.append(f"dex: {name}: {type(exc).__name__}: {exc}")
    return parse_dex(good) if good else DexProgram([], [], [], [], {}, [])


def _pii_params(rules):
    for r in rules:
        for p in r.predicates:
            if p.kind == "pii":
                return p.keywords, p.segment_keywords
    return None


def _unity_section(bundle, cfg, diags):
    backend = bundle.unity_backend
    arts = bundle.unity_artifacts
    cil = il2cpp = None
    if backend == UnityBackend.MONO:
        try:
            cil = parse_cil(read_member(bundle, arts.cil_assembly_path or CIL_ASSEMBLY))
            diags.extend(cil.diagnostics)
        except VrScanError as exc:
            diags.append(f"unity: {type(exc).__name__}: {exc}")
    elif backend == UnityBackend.IL2CPP:
        try:
            il2cpp = scan_il2cpp_metadata(read_member(bundle, arts.global_metadata_path or GLOBAL_METADATA))
            diags.extend(il2cpp.diagnostics)
        except VrScanError as exc:
            diags.append(f"unity: {type(exc).__name__}: {exc}")
    if cil is None and il2cpp is None:
        usages, iap, tier = [], None, None
    else:
        usages = detect_biometric_functions(cil, il2cpp, cfg.biometric_table)
        iap = assess_iap(cil, il2cpp, cfg.network_table)
        tier = iap.tier
    section = {
        "backend": backend.value,
        "evidence_tier": tier,
        "biometric_usages": [u.to_dict() for u in usages],
        "iap": iap.to_dict() if iap is not None else
        {"uses_iap": False, "verification": "not-applicable", "evidence": [], "tier": "", "low_confidence": False},
    }
    return section, usages


def _policy_section(policy_path, cfg, diags):
    with open(policy_path, "rb") as fh:
        raw = fh.read().decode("utf-8", "replace")
    text = strip_html(raw) if looks_like_html(raw) else raw
    language = "unsupported" if looks_non_english(text) else "en"
    if language == "unsupported":
        diags.append("policy: unsupported-language (non-English text); statements not extracted")
        statements = []
    else:
        statements = extract_statements(text, cfg.ontology, cfg.lexicon)
    contradictions = detect_contradictions(statements, cfg.ontology)
    gdpr = check_gdpr(text, cfg.gdpr_terms)
    section = {
        "language": language,
        "statements": [s.to_dict() for s in statements],
        "contradictions": [c.to_dict() for c in contradictions],
        "gdpr": gdpr.to_dict(),
        "gdpr_violation_count": len(gdpr.violations),
    }
    return section, statements


def scan_app(apk_path, policy_path=None, config: Optional[ScanConfig] = None) -> AppReport:
    """Run every analysis on one APK. Only an unreadable container is fatal."""
    cfg = config or ScanConfig.load()
    bundle = open_apk(apk_path)
    diags = list(bundle.diagnostics)
    report = AppReport(bundle.sha256, None)

    try:
        report.manifest = analyze_manifest(decode_axml(bundle.manifest_bytes), cfg.permissions)
        report.package_name = report.manifest.package_name
        report.manifest_findings = detect_manifest_findings(report.manifest)
        if report.manifest.is_split:
            diags.append("split-apk: configuration split detected; only this split is analyzed")
    except VrScanError as exc:
        diags.append(f"manifest: {type(exc).__name__}: {exc}")

    program = _parse_program(bundle, diags)
    diags.extend(program.diagnostics)
    pii_usages = []
    try:
        report.rule_findings = evaluate_rules(program, cfg.rules, cfg.trackers)
        pii = _pii_params(cfg.rules)
        if pii is not None:
            pii_usages = find_pii_methods(program, *pii)
    except VrScanError as exc:
        diags.append(f"rules: {type(exc).__name__}: {exc}")
    try:
        res = taint_analyze(program, cfg.taint)
        report.taint_paths = res.paths
        diags.extend(res.diagnostics)
    except VrScanError as exc:
        diags.append(f"taint: {type(exc).__name__}: {exc}")

    report.unity, bio = _unity_section(bundle, cfg, diags)

    statements = []
    if policy_path is not None:
        try:
            report.policy, statements = _policy_section(policy_path, cfg, diags)
        except OSError as exc:
            diags.append(f"policy: cannot read {policy_path}: {exc}")

    report.consistency = check_consistency(report.manifest, statements, pii_usages, bio, cfg.mapping, cfg.ontology)
    report.diagnostics = sorted(set(diags))
    return report


def anonymize(report_dict):
    """Replace the package name (dotted and slashed forms) everywhere with its MD5 prefix."""
    pkg = report_dict.get("app_id", {}).get("package_name")
    if not pkg:
        return report_dict
    short = anonymize_name(pkg)
    slashed = pkg.replace(".", "/")

    def walk(v):
        if isinstance(v, str):
            return v.replace(pkg, short).replace(slashed, short)
        if isinstance(v, list):
            return [walk(x) for x in v]
        if isinstance(v, dict):
            return {k: walk(x) for k, x in v.items()}
        return v

    return walk(report_dict)


# -- aggregation -------------------------------------------------------------


def _row(count, denominator, **extra):
    return {"count": count, "denominator": denominator, "percent": percent(count, denominator),
            "display": format_ratio(count, denominator), **extra}


def _as_dict(r):
    return r.to_dict() if isinstance(r, AppReport) else r


def aggregate(reports, gdpr_terms=None):
    """Per-app presence counts over a corpus. Accepts AppReports or their dict form."""
    reports = [_as_dict(r) for r in reports]
    if not reports:
        raise EmptyCorpus("aggregate() needs at least one report")
    if gdpr_terms is None:
        from .policy.gdpr import load_terms
        gdpr_terms = load_terms()
    n = len(reports)
    with_policy = [r for r in reports if r.get("policy") is not None]
    np_ = len(with_policy)

    def count(pred, rs=reports):
        return sum(1 for r in rs if pred(r))

    rule_cats = {c: _row(count(lambda r, c=c: any(f["category"] == c for f in r["rule_findings"])), n)
                 for c in CATEGORIES}
    man = {c: _row(count(lambda r, c=c: any(f["category"] == c for f in r["manifest"]["findings"])), n)
           for c in MANIFEST_CLASSES}
    man["any_dangerous_launch_mode"] = _row(
        count(lambda r: any(f["category"] in DANGEROUS_LAUNCH for f in r["manifest"]["findings"])), n)
    tracker_names = sorted({f["evidence"][0] for r in reports for f in r["rule_findings"]
                            if f["category"] == "TRACKER" and f["evidence"]})
    trackers = {t: _row(count(lambda r, t=t: any(f["category"] == "TRACKER" and f["evidence"][:1] == [t]
                                                  for f in r["rule_findings"])), n) for t in tracker_names}
    bio = {k: _row(count(lambda r, k=k: any(u["kind"] == k for u in r["unity"]["biometric_usages"])), n)
           for k in KINDS}
    iap = {c: _row(count(lambda r, c=c: r["unity"]["iap"]["verification"] == c), n) for c in IAP_CLASSES}
    policy = {
        "no_privacy_policy": _row(n - np_, n),
        "has_privacy_policy": _row(np_, n),
        "contradictory_policy": _row(count(lambda r: any(not c["informational"] for c in r["policy"]["contradictions"]),
                                           with_policy), np_),
    }
    gdpr = {t.term: _row(count(lambda r, t=t: r["policy"]["gdpr"].get(t.term, {}).get("violated", False),
                               with_policy), np_, risk=t.risk) for t in gdpr_terms}
    gdpr["No Violation"] = _row(count(lambda r: r["policy"]["gdpr_violation_count"] == 0, with_policy), np_,
                                risk="n/a")
    gaps = {g: _row(count(lambda r, g=g: bool(r["consistency"][g])), n) for g in GAP_CLASSES}
    return {
        "format": STATS_FORMAT,
        "tool_version": __version__,
        "app_count": n,
        "apps_with_policy": np_,
        "rule_categories": rule_cats,
        "manifest_findings": man,
        "trackers": trackers,
        "biometric_kinds": bio,
        "iap_verification": iap,
        "policy": policy,
        "gdpr": gdpr,
        "consistency_gaps": gaps,
    }


# -- rendering ---------------------------------------------------------------


def render_json(obj):
    return (json.dumps(_as_dict(obj), indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def _md_table(headers, rows):
    out = ["| " + " | ".join(headers) + " |", "|" + "---|" * len(headers)]
    for row in rows:
        out.append("| " + " | ".join("" if c is None else str(c).replace("|", "\\|") for c in row) + " |")
    return out


def _render_report_md(d):
    app = d["app_id"]
    lines = [f"# Scan report: {app['package_name'] or '(unknown package)'}", "", f"sha256: `{app['sha256']}`", ""]
    facts = d["facts"]
    lines += ["## Facts", ""] + _md_table(["fact", "value"], [
        ("no privacy policy", facts["no_privacy_policy"]), ("no root detection", facts["no_root_detection"]),
        ("finding categories", ", ".join(facts["finding_categories"]) or "-")]) + [""]
    s = d["manifest"]["summary"]
    lines += ["## Manifest", ""]
    if s is None:
        lines += ["Manifest could not be analyzed.", ""]
    else:
        lines += _md_table(["permission", "origin", "protection"],
                           [(p["name"], p["origin"], p["protection_level"]) for p in s["permissions"]]) + [""]
        lines += _md_table(["rule", "category", "severity", "evidence"],
                           [(f["rule_id"], f["category"], f["severity"], "; ".join(map(str, f["evidence"])))
                            for f in d["manifest"]["findings"]]) + [""]
    lines += ["## Code rules", ""] + _md_table(
        ["rule", "category", "severity", "location", "evidence"],
        [(f["rule_id"], f["category"], f["severity"],
          "-" if f["location"] is None else f"{f['location']['class']} {f['location']['method'] or ''}".strip(),
          "; ".join(map(str, f["evidence"] or f["polarity_note"]))) for f in d["rule_findings"]]) + [""]
    lines += ["## Taint paths", ""] + _md_table(
        ["label", "source", "sink", "hops"],
        [(p["label"], f"{p['source']['method']}@{p['source']['offset']}", f"{p['sink']['method']}@{p['sink']['offset']}",
          len(p["trace"]) - 2) for p in d["taint_paths"]]) + [""]
    u = d["unity"]
    lines += ["## Unity", "", f"backend: {u['backend']}, evidence tier: {u['evidence_tier'] or '-'}", ""]
    lines += _md_table(["kind", "symbol", "tier"],
                       [(b["kind"], b["matched_symbol"], b["evidence_tier"]) for b in u["biometric_usages"]]) + [""]
    iap = u["iap"]
    lines += [f"IAP: uses_iap={iap['uses_iap']}, verification={iap['verification']}"
              + (" (low confidence)" if iap["low_confidence"] else ""), ""]
    lines += ["## Privacy policy", ""]
    p = d["policy"]
    if p is None:
        lines += ["No privacy policy supplied.", ""]
    else:
        lines += _md_table(["sentence", "entity", "action", "data type"],
                           [(s["sentence_index"], s["entity"], s["action"], s["data_type"]) for s in p["statements"]])
        lines += ["", f"contradictions: {len(p['contradictions'])}", ""]
        lines += _md_table(["GDPR term", "risk", "violated", "evidence"],
                           [(t, r["risk"], r["violated"], r["evidence"]) for t, r in p["gdpr"].items()]) + [""]
    lines += ["## Consistency", ""] + _md_table(
        ["check", "subject", "missing side", "warning"],
        [(k, g["subject"], g["missing_side"], g["warning"] or "") for k, gs in d["consistency"].items() for g in gs]) + [""]
    lines += ["## Diagnostics", ""] + [f"- {x}" for x in d["diagnostics"]] + [""]
    return lines


def _render_stats_md(d):
    lines = [f"# Corpus statistics ({d['app_count']} apps, {d['apps_with_policy']} with a privacy policy)", ""]
    sections = [("Code rule categories", "rule_categories"), ("Manifest findings", "manifest_findings"),
                ("Tracker libraries", "trackers"), ("Biometric function usage", "biometric_kinds"),
                ("IAP verification", "iap_verification"), ("Privacy policy", "policy"),
                ("Consistency gaps", "consistency_gaps")]
    for title, key in sections:
        lines += [f"## {title}", ""] + _md_table(["item", "apps", "denominator"],
                                                 [(k, r["display"], r["denominator"]) for k, r in d[key].items()])
        lines.append("")
    lines += ["## GDPR compliance", ""] + _md_table(
        ["GDPR violation term", "risk level", "apps", "denominator"],
        [(k, r["risk"], r["display"], r["denominator"]) for k, r in d["gdpr"].items()]) + [""]
    return lines


def render_markdown(obj):
    d = _as_dict(obj)
    lines = _render_stats_md(d) if d.get("format") == STATS_FORMAT else _render_report_md(d)
    return ("\n".join(lines).rstrip("\n") + "\n").encode("utf-8")


def render(obj, fmt="json"):
    if fmt == "json":
        return render_json(obj)
    if fmt in ("md", "markdown"):
        return render_markdown(obj)
    raise ValueError(f"unknown format {fmt!r}")
