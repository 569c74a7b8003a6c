"""Sanitize documents so that no term, alone or in a group, discloses a protected
entity beyond a chosen generalization of it."""

from sanitext.corpus import (
    CountCache,
    LocalCountProvider,
    LocalIndex,
    PhraseQuery,
    ProviderError,
    WebCountProvider,
    WebEndpointConfig,
    canonical_query,
)
from sanitext.measures import information_content, pmi, resnik_ic
from sanitext.sanitizer import (
    SUPPRESSED,
    PolicyEntry,
    ProtectionPolicy,
    RiskModel,
    SanitizationAborted,
    SanitizerConfig,
    load_policy,
    sanitize_document,
    select_generalizations,
)
from sanitext.taxonomy import Taxonomy, load_taxonomy

__all__ = [
    "SUPPRESSED",
    "CountCache",
    "LocalCountProvider",
    "LocalIndex",
    "PhraseQuery",
    "PolicyEntry",
    "ProtectionPolicy",
    "ProviderError",
    "RiskModel",
    "SanitizationAborted",
    "SanitizerConfig",
    "Taxonomy",
    "WebCountProvider",
    "WebEndpointConfig",
    "canonical_query",
    "information_content",
    "load_policy",
    "load_taxonomy",
    "pmi",
    "resnik_ic",
    "sanitize_document",
    "select_generalizations",
]
