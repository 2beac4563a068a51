"""Before/after rule-set comparison and per-category confidence summaries.

Rule identity is the canonical text form; metrics play no part in it, so a
rule counts as "same" even when its confidences move after enrichment. The
partition satisfies |after| = |same| + |new| and |before| = |same| + |dropped|.

Confidence summaries follow the five measurement conventions: rules before,
dropped and same are scored on the original graph; rules after and new on the
enriched graph.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from .graph import KnowledgeGraph, Vocabulary, functionality
from .rules.atoms import Rule, format_rule
from .rules.metrics import rule_metrics


@dataclass(frozen=True)
class RuleDiff:
    before: tuple[Rule, ...]
    after: tuple[Rule, ...]
    new: tuple[Rule, ...]      # after \ before
    dropped: tuple[Rule, ...]  # before \ after
    same: tuple[Rule, ...]     # intersection, carrying the before-side metrics


def diff_rules(
    before: Sequence[Rule],
    after: Sequence[Rule],
    relations: Vocabulary,
    entities: Vocabulary | None = None,
) -> RuleDiff:
    """Set algebra on canonical rule strings; inputs keep their order."""
    before_keys = {format_rule(r, relations, entities): r for r in before}
    after_keys = {format_rule(r, relations, entities): r for r in after}
    new = tuple(r for key, r in sorted(after_keys.items()) if key not in before_keys)
    dropped = tuple(r for key, r in sorted(before_keys.items()) if key not in after_keys)
    same = tuple(r for key, r in sorted(before_keys.items()) if key in after_keys)
    return RuleDiff(tuple(before), tuple(after), new, dropped, same)


@dataclass(frozen=True)
class CategorySummary:
    count: int
    mean_std_confidence: Fraction | None  # None when the category is empty
    mean_pca_confidence: Fraction | None
    evaluation_graph: str  # "original" or "enriched"


@dataclass(frozen=True)
class ConfidenceSummary:
    before: CategorySummary
    after: CategorySummary
    new: CategorySummary
    dropped: CategorySummary
    same: CategorySummary

    def categories(self) -> dict[str, CategorySummary]:
        return {
            "before": self.before,
            "after": self.after,
            "new": self.new,
            "dropped": self.dropped,
            "same": self.same,
        }


def _summarize(rules: Sequence[Rule], kg: KnowledgeGraph, functab, tag: str,
               allow_reflexive: bool) -> CategorySummary:
    if not rules:
        return CategorySummary(0, None, None, tag)
    stds, pcas = [], []
    for rule in rules:
        metrics = rule_metrics(kg, rule, functab, allow_reflexive)
        stds.append(metrics.std_confidence)
        pcas.append(metrics.pca_confidence)
    return CategorySummary(
        count=len(rules),
        mean_std_confidence=sum(stds, Fraction(0)) / len(stds),
        mean_pca_confidence=sum(pcas, Fraction(0)) / len(pcas),
        evaluation_graph=tag,
    )


def summarize_confidence(
    diff: RuleDiff,
    kg_original: KnowledgeGraph,
    kg_enriched: KnowledgeGraph,
    allow_reflexive: bool = True,
) -> ConfidenceSummary:
    """Re-score every category on its designated graph and average."""
    fun_orig = functionality(kg_original)
    fun_enr = functionality(kg_enriched)
    return ConfidenceSummary(
        before=_summarize(diff.before, kg_original, fun_orig, "original", allow_reflexive),
        after=_summarize(diff.after, kg_enriched, fun_enr, "enriched", allow_reflexive),
        new=_summarize(diff.new, kg_enriched, fun_enr, "enriched", allow_reflexive),
        dropped=_summarize(diff.dropped, kg_original, fun_orig, "original", allow_reflexive),
        same=_summarize(diff.same, kg_original, fun_orig, "original", allow_reflexive),
    )


def write_diff_summary(
    diff: RuleDiff,
    summary: ConfidenceSummary | None,
    path: str | Path,
    header_lines: Sequence[str] = (),
) -> None:
    """Counts, partition identities, and per-category means as key=value lines."""

    def fmt(value: Fraction | None) -> str:
        return "-" if value is None else repr(float(value))

    with open(path, "w", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write(f"before={len(diff.before)}\n")
        fh.write(f"after={len(diff.after)}\n")
        fh.write(f"new={len(diff.new)}\n")
        fh.write(f"dropped={len(diff.dropped)}\n")
        fh.write(f"same={len(diff.same)}\n")
        fh.write(f"identity_after=same+new={len(diff.same) + len(diff.new)}\n")
        fh.write(f"identity_before=same+dropped={len(diff.same) + len(diff.dropped)}\n")
        if summary is not None:
            for name, cat in summary.categories().items():
                fh.write(f"{name}_count={cat.count}\n")
                fh.write(f"{name}_std_conf={fmt(cat.mean_std_confidence)}\n")
                fh.write(f"{name}_pca_conf={fmt(cat.mean_pca_confidence)}\n")
                fh.write(f"{name}_graph={cat.evaluation_graph}\n")
