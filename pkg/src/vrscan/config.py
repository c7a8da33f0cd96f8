"""Every table and rule file the pipeline needs, loaded once per run."""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional

from .consistency import MappingTable
from .manifest import PermissionTable
from .policy.extract import Lexicon
from .policy.gdpr import load_terms
from .policy.ontology import DataOntology
from .rules import TrackerDb, load_ruleset
from .taint.config import TaintConfig
from .unity.analysis import load_biometric_table, load_network_table

FILE_NAMES = {
    "rules": "default_rules.json",
    "trackers": "trackers.json",
    "taint": "taint_config.json",
    "permissions": "permissions.json",
    "biometric": "biometric_functions.json",
    "network": "network_apis.json",
    "ontology": "ontology.json",
    "lexicon": "verb_lexicon.json",
    "gdpr": "gdpr_cues.json",
    "mapping": "mapping.json",
}


@dataclass
class ScanConfig:
    rules: list
    trackers: TrackerDb
    taint: TaintConfig
    permissions: PermissionTable
    biometric_table: list
    network_table: list
    ontology: DataOntology
    lexicon: Lexicon
    gdpr_terms: list
    mapping: MappingTable

    @classmethod
    def load(cls, config_dir: Optional[str] = None, **paths):
        """Keyword paths (see FILE_NAMES keys) win over ``config_dir``, which wins
        over $VRSCAN_CONFIG_DIR and the bundled defaults."""
        unknown = set(paths) - set(FILE_NAMES)
        if unknown:
            raise TypeError(f"unknown config keys: {sorted(unknown)}")

        def p(key):
            if paths.get(key):
                return os.fspath(paths[key])
            if config_dir:
                cand = os.path.join(config_dir, FILE_NAMES[key])
                if os.path.isfile(cand):
                    return cand
            return None

        ontology = DataOntology.load(p("ontology"))
        rules_path = p("rules")
        return cls(
            rules=load_ruleset(rules_path) if rules_path else load_ruleset(),
            trackers=TrackerDb.load(p("trackers")),
            taint=TaintConfig.load(p("taint")),
            permissions=PermissionTable.load(p("permissions")),
            biometric_table=load_biometric_table(p("biometric")),
            network_table=load_network_table(p("network")),
            ontology=ontology,
            lexicon=Lexicon.load(p("lexicon")),
            gdpr_terms=load_terms(p("gdpr")),
            mapping=MappingTable.load(p("mapping"), ontology),
        )
