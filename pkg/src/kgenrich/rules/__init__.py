"""Closed Horn rule mining: syntax, query matching, metrics, search."""

from .atoms import (
    Atom,
    Constant,
    MinerConfig,
    Rule,
    RuleMetrics,
    Term,
    Variable,
    canonical_key,
    canonicalize,
    format_rule,
    parse_rule,
)
from .metrics import (
    RuleCounts,
    head_coverage,
    pca_confidence,
    rule_counts,
    rule_metrics,
    std_confidence,
    support,
)
from .mining import mine_rules, read_rules, write_rules
from .query import groundings, match, satisfiable

__all__ = [
    "Atom",
    "Constant",
    "MinerConfig",
    "Rule",
    "RuleCounts",
    "RuleMetrics",
    "Term",
    "Variable",
    "canonical_key",
    "canonicalize",
    "format_rule",
    "groundings",
    "head_coverage",
    "match",
    "mine_rules",
    "parse_rule",
    "pca_confidence",
    "read_rules",
    "rule_counts",
    "rule_metrics",
    "satisfiable",
    "std_confidence",
    "support",
    "write_rules",
]
