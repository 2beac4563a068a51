"""Knowledge-graph enrichment toolkit.

Train TransE/DistMult/RotatE embeddings, infer plausible missing triples to
enrich a graph, mine closed Horn rules with support and CWA/PCA confidence on
both graphs, compare the rule sets, and evaluate link prediction (Hits@k,
MRR) with either embeddings or rules.
"""

__version__ = "0.1.0"

from .diff import ConfidenceSummary, RuleDiff, diff_rules, summarize_confidence
from .enrich import (
    CandidateSet,
    EnrichmentConfig,
    EnrichmentResult,
    enrich,
    find_candidate_triples,
    infer_new_triples,
)
from .graph import (
    DatasetSplit,
    FunctionalityTable,
    KnowledgeGraph,
    Triple,
    Vocabulary,
    functionality,
    load_split,
    load_triples,
    merge,
    save_triples,
)
from .models import (
    ModelKind,
    ModelParams,
    TrainingConfig,
    init_model,
    load_model,
    loss_batch,
    negative_sample,
    save_model,
    score,
    score_batch,
    train,
)
from .ranking import (
    EvalReport,
    RankingMode,
    embed_rank,
    evaluate_embeddings,
    evaluate_rules,
    rule_predict,
)
from .rules import (
    Atom,
    Constant,
    MinerConfig,
    Rule,
    RuleMetrics,
    Variable,
    canonicalize,
    format_rule,
    head_coverage,
    match,
    mine_rules,
    parse_rule,
    pca_confidence,
    rule_metrics,
    std_confidence,
    support,
)

__all__ = [
    "Atom",
    "CandidateSet",
    "ConfidenceSummary",
    "Constant",
    "DatasetSplit",
    "EnrichmentConfig",
    "EnrichmentResult",
    "EvalReport",
    "FunctionalityTable",
    "KnowledgeGraph",
    "MinerConfig",
    "ModelKind",
    "ModelParams",
    "RankingMode",
    "Rule",
    "RuleDiff",
    "RuleMetrics",
    "TrainingConfig",
    "Triple",
    "Variable",
    "Vocabulary",
    "canonicalize",
    "diff_rules",
    "embed_rank",
    "enrich",
    "evaluate_embeddings",
    "evaluate_rules",
    "find_candidate_triples",
    "format_rule",
    "functionality",
    "head_coverage",
    "infer_new_triples",
    "init_model",
    "load_model",
    "load_split",
    "load_triples",
    "loss_batch",
    "match",
    "merge",
    "mine_rules",
    "negative_sample",
    "parse_rule",
    "pca_confidence",
    "rule_metrics",
    "rule_predict",
    "save_model",
    "save_triples",
    "score",
    "score_batch",
    "std_confidence",
    "summarize_confidence",
    "support",
    "train",
]
