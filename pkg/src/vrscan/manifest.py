"""Manifest-level facts: identity, permissions, activity launch modes, flags."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .axml import ANDROID_NS
from .errors import MissingPackageName
from .findings import Finding, Location, sort_findings
from .resources import load_json

OCULUS_PREFIX = "com.oculus.permission."
LAUNCH_MODE_CODES = {"0": "standard", "1": "singleTop", "2": "singleTask", "3": "singleInstance",
                     "4": "singleInstancePerTask"}
LAUNCH_MODES = ("standard", "singleTop", "singleTask", "singleInstance", "singleInstancePerTask")


def _a(name):
    return f"{{{ANDROID_NS}}}{name}"


@dataclass(frozen=True)
class PermissionUse:
    name: str
    origin: str
    protection_level: str


@dataclass(frozen=True)
class ActivityDecl:
    name: str
    launch_mode: str = "standard"
    has_task_affinity: bool = False
    exported: Optional[bool] = None


@dataclass(frozen=True)
class ManifestFlags:
    allow_backup: Optional[bool] = None
    debuggable: Optional[bool] = None
    uses_cleartext_traffic: Optional[bool] = None


@dataclass(frozen=True)
class ManifestSummary:
    app_name: Optional[str]
    package_name: str
    version_code: Optional[int]
    sdk_version: dict
    permissions: tuple = ()
    activities: tuple = ()
    flags: ManifestFlags = field(default_factory=ManifestFlags)
    is_split: bool = False

    def permission_names(self):
        return {p.name for p in self.permissions}


class PermissionTable:
    def __init__(self, entries, version="custom"):
        self.entries = dict(entries)
        self.version = version

    @classmethod
    def load(cls, path=None):
        doc = load_json("permissions.json", path)
        return cls(doc["permissions"], doc.get("version", "custom"))

    def classify(self, name) -> PermissionUse:
        if name.startswith(OCULUS_PREFIX):
            return PermissionUse(name, "oculus", "dangerous")
        entry = self.entries.get(name)
        if entry is None:
            return PermissionUse(name, "custom", "unknown")
        origin = entry.get("origin", "android")
        if origin == "oculus":
            origin = "custom"
        return PermissionUse(name, origin, entry.get("protection_level", "unknown"))


def _tristate(value):
    if value is None:
        return None
    v = value.strip().lower()
    if v == "true":
        return True
    if v == "false":
        return False
    return None


def _int_or_none(value):
    try:
        return int(value, 0) if value is not None else None
    except ValueError:
        return None


def _qualify(package, name):
    if name.startswith("."):
        return package + name
    if "." not in name:
        return f"{package}.{name}"
    return name


def analyze_manifest(tree, permission_table: PermissionTable = None) -> ManifestSummary:
    if permission_table is None:
        permission_table = PermissionTable.load()
    if tree.tag != "manifest":
        raise MissingPackageName(f"root element is <{tree.tag}>, expected <manifest>")
    package = (tree.get("package") or "").strip()
    if not package:
        raise MissingPackageName("manifest has no package attribute")

    sdk = {"min": None, "target": None}
    uses_sdk = tree.find("uses-sdk")
    if uses_sdk is not None:
        sdk = {"min": _int_or_none(uses_sdk.get(_a("minSdkVersion"))),
               "target": _int_or_none(uses_sdk.get(_a("targetSdkVersion")))}

    seen = set()
    permissions = []
    for tag in ("uses-permission", "uses-permission-sdk-23", "uses-permission-sdk-m"):
        for el in tree.findall(tag):
            name = el.get(_a("name"))
            if name and name not in seen:
                seen.add(name)
                permissions.append(permission_table.classify(name))

    app = tree.find("application")
    activities = []
    flags = ManifestFlags()
    app_name = None
    if app is not None:
        app_name = app.get(_a("label"))
        flags = ManifestFlags(
            allow_backup=_tristate(app.get(_a("allowBackup"))),
            debuggable=_tristate(app.get(_a("debuggable"))),
            uses_cleartext_traffic=_tristate(app.get(_a("usesCleartextTraffic"))),
        )
        for el in app.findall("activity"):
            name = el.get(_a("name"))
            if not name:
                continue
            mode = el.get(_a("launchMode"), "standard")
            mode = LAUNCH_MODE_CODES.get(mode, mode)
            if mode not in LAUNCH_MODES:
                mode = "standard"
            activities.append(ActivityDecl(
                name=_qualify(package, name),
                launch_mode=mode,
                has_task_affinity=el.get(_a("taskAffinity")) is not None,
                exported=_tristate(el.get(_a("exported"))),
            ))

    return ManifestSummary(
        app_name=app_name,
        package_name=package,
        version_code=_int_or_none(tree.get(_a("versionCode"))),
        sdk_version=sdk,
        permissions=tuple(permissions),
        activities=tuple(activities),
        flags=flags,
        is_split=tree.get("split") is not None,
    )


_FLAG_RULES = (
    ("allow_backup", "MAN-ALLOW-BACKUP", "AllowBackup", "medium", "android:allowBackup=true"),
    ("debuggable", "MAN-DEBUGGABLE", "Debuggable", "high", "android:debuggable=true"),
    ("uses_cleartext_traffic", "MAN-CLEARTEXT", "CleartextTraffic", "medium",
     "android:usesCleartextTraffic=true"),
)


def detect_manifest_findings(summary: ManifestSummary):
    """Findings for dangerous launch modes, explicitly enabled insecure flags
    and dangerous permissions. Unset flags never produce findings."""
    out = []
    manifest_loc = Location("AndroidManifest.xml")
    for act in summary.activities:
        if act.has_task_affinity:
            continue
        if act.launch_mode == "singleTask":
            out.append(Finding("MAN-TASK-HIJACK-SINGLETASK", "TaskHijacking", "medium",
                               Location(act.name), (act.name, "launchMode=singleTask", "no taskAffinity")))
        elif act.launch_mode == "singleInstance":
            out.append(Finding("MAN-TASK-HIJACK-SINGLEINSTANCE", "SingleInstanceLaunch", "info",
                               Location(act.name), (act.name, "launchMode=singleInstance", "no taskAffinity")))
    for attr, rule_id, category, severity, evidence in _FLAG_RULES:
        if getattr(summary.flags, attr) is True:
            out.append(Finding(rule_id, category, severity, manifest_loc, (evidence,)))
    for perm in summary.permissions:
        if perm.protection_level == "dangerous":
            out.append(Finding("MAN-DANGEROUS-PERMISSION", "DangerousPermission", "info",
                               manifest_loc, (perm.name, f"origin={perm.origin}")))
    return sort_findings(out)
