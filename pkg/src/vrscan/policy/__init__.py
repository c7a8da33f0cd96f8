"""Privacy-policy statement extraction, contradiction search and GDPR checklist."""
from .contradictions import Contradiction, detect_contradictions
from .extract import PolicyStatement, extract_statements
from .gdpr import GdprChecklist, check_gdpr
from .ontology import DataOntology, default_ontology
from .text import looks_like_html, looks_non_english, strip_html

__all__ = ["Contradiction", "DataOntology", "GdprChecklist", "PolicyStatement", "check_gdpr", "default_ontology",
           "detect_contradictions", "extract_statements", "looks_like_html", "looks_non_english", "strip_html"]
