"""Link-prediction evaluation: entity ranking, Hits@k and mean reciprocal rank.

Every test triple contributes two rank observations (head query, tail query);
Hits@k and MRR average the indicator / reciprocal rank over all 2*|test|
observations. Ranks are deterministic: entities tied with the true entity
count against it when their id is smaller. Filtered mode removes other
known-true entities (train, valid and test) from the competition.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ContractError, DataError
from .graph import DatasetSplit, KnowledgeGraph, Triple
from .models import ModelParams, score_all_heads, score_all_tails
from .rules.atoms import Rule, Variable
from .rules.query import match

logger = logging.getLogger(__name__)


class RankingMode(str, Enum):
    RAW = "raw"
    FILTERED = "filtered"


@dataclass(frozen=True)
class EvalReport:
    hits1: float
    hits3: float
    hits10: float
    mrr: float
    query_count: int
    mode: RankingMode


def _rank_from_scores(scores: np.ndarray, true_id: int, exclude: set[int]) -> int:
    """1 + entities scoring strictly higher + equal-scoring entities with a
    smaller id; `exclude` entities do not compete."""
    s_true = scores[true_id]
    eligible = np.ones(len(scores), dtype=bool)
    if exclude:
        eligible[list(exclude)] = False
    eligible[true_id] = True
    higher = int(np.count_nonzero((scores > s_true) & eligible))
    ids = np.arange(len(scores))
    tied_before = int(np.count_nonzero((scores == s_true) & (ids < true_id) & eligible))
    return 1 + higher + tied_before


def embed_rank(
    params: ModelParams,
    kg_all: KnowledgeGraph,
    test_triple: Triple,
    mode: RankingMode = RankingMode.RAW,
) -> tuple[int, int]:
    """(head rank, tail rank) of the true entities among all entities.

    `kg_all` holds every known-true triple (train + valid + test) and is only
    consulted in filtered mode.
    """
    h, r, t = test_triple
    head_scores = score_all_heads(params, r, t)
    tail_scores = score_all_tails(params, h, r)
    if RankingMode(mode) is RankingMode.FILTERED:
        head_excl = set(kg_all.heads(r, t)) - {h}
        tail_excl = set(kg_all.tails(h, r)) - {t}
    else:
        head_excl = tail_excl = set()
    return (
        _rank_from_scores(head_scores, h, head_excl),
        _rank_from_scores(tail_scores, t, tail_excl),
    )


def _report_from_ranks(ranks: Sequence[int], mode: RankingMode) -> EvalReport:
    arr = np.asarray(ranks, dtype=float)
    return EvalReport(
        hits1=float((arr <= 1).mean()),
        hits3=float((arr <= 3).mean()),
        hits10=float((arr <= 10).mean()),
        mrr=float((1.0 / arr).mean()),
        query_count=len(ranks),
        mode=RankingMode(mode),
    )


def evaluate_embeddings(
    params: ModelParams,
    split: DatasetSplit,
    mode: RankingMode = RankingMode.RAW,
    workers: int = 1,
) -> EvalReport:
    """Rank head and tail of every test triple with the model's scores."""
    if not split.test:
        raise DataError("test set is empty")
    mode = RankingMode(mode)
    kg_all = split.filter_graph() if mode is RankingMode.FILTERED else split.train

    def ranks_for(triple: Triple) -> tuple[int, int]:
        return embed_rank(params, kg_all, triple, mode)

    if workers <= 1:
        pairs = [ranks_for(t) for t in split.test]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            pairs = list(pool.map(ranks_for, split.test))
    ranks = [r for pair in pairs for r in pair]
    return _report_from_ranks(ranks, mode)


# -- rule-based prediction --------------------------------------------------------


def rule_predict(
    rules: Sequence[Rule],
    kg_train: KnowledgeGraph,
    query: tuple[int | None, int, int | None],
) -> list[tuple[int, Fraction, int]]:
    """Candidate entities for a (h, r, ?) or (?, r, t) query.

    Each applicable rule binds the known head-atom argument and proposes the
    entities its body derives; a candidate scores the maximum PCA confidence
    over proposing rules (support of the best rule breaks ties, then entity
    id). Returns (entity, pca, support) sorted best-first.
    """
    head_id, relation, tail_id = query
    if (head_id is None) == (tail_id is None):
        raise ContractError("query must fix exactly one of head and tail")
    predict_tail = tail_id is None
    known = head_id if predict_tail else tail_id

    best: dict[int, tuple[Fraction, int]] = {}
    for rule in rules:
        if rule.head.relation != relation:
            continue
        if rule.metrics is None:
            raise ContractError("rule-based prediction needs rules with metrics attached")
        known_term = rule.head.arg1 if predict_tail else rule.head.arg2
        target_term = rule.head.arg2 if predict_tail else rule.head.arg1
        bind: dict[int, int] = {}
        if isinstance(known_term, Variable):
            bind[known_term.index] = known
        elif known_term.entity != known:
            continue  # constant head argument incompatible with the query
        if isinstance(target_term, Variable):
            if target_term.index in bind:
                proposals = {known} if match(kg_train, rule.body, (), bind) else set()
            else:
                proposals = {row[0] for row in match(kg_train, rule.body, (target_term.index,), bind)}
        else:
            proposals = {target_term.entity} if match(kg_train, rule.body, (), bind) else set()
        key = (rule.metrics.pca_confidence, rule.metrics.support)
        for entity in proposals:
            if entity not in best or key > best[entity]:
                best[entity] = key
    ordered = sorted(best.items(), key=lambda kv: (-kv[1][0], -kv[1][1], kv[0]))
    return [(entity, pca, sup) for entity, (pca, sup) in ordered]


def _rule_rank(
    candidates: list[tuple[int, Fraction, int]],
    true_id: int,
    exclude: set[int],
) -> int | None:
    """Position of the true entity among non-excluded candidates, or None."""
    rank = 0
    for entity, _pca, _sup in candidates:
        if entity == true_id:
            return rank + 1
        if entity not in exclude:
            rank += 1
    return None


def evaluate_rules(
    rules: Sequence[Rule],
    split: DatasetSplit,
    mode: RankingMode = RankingMode.RAW,
    workers: int = 1,
) -> EvalReport:
    """Link prediction with mined rules; bodies ground against the train graph.

    A query whose true entity is not proposed by any rule contributes 0 to
    every metric (no 1/|E| floor).
    """
    if not split.test:
        raise DataError("test set is empty")
    mode = RankingMode(mode)
    if not rules:
        logger.warning("evaluate_rules called with an empty rule set; all metrics are 0")
        return EvalReport(0.0, 0.0, 0.0, 0.0, 2 * len(split.test), mode)
    kg_all = split.filter_graph() if mode is RankingMode.FILTERED else None

    def ranks_for(triple: Triple) -> tuple[int | None, int | None]:
        h, r, t = triple
        tail_candidates = rule_predict(rules, split.train, (h, r, None))
        head_candidates = rule_predict(rules, split.train, (None, r, t))
        if kg_all is not None:
            tail_excl = set(kg_all.tails(h, r)) - {t}
            head_excl = set(kg_all.heads(r, t)) - {h}
        else:
            tail_excl = head_excl = set()
        return (
            _rule_rank(head_candidates, h, head_excl),
            _rule_rank(tail_candidates, t, tail_excl),
        )

    if workers <= 1:
        pairs = [ranks_for(t) for t in split.test]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            pairs = list(pool.map(ranks_for, split.test))

    observations = [r for pair in pairs for r in pair]
    total = len(observations)
    hits = {k: sum(1 for r in observations if r is not None and r <= k) for k in (1, 3, 10)}
    mrr = sum(1.0 / r for r in observations if r is not None)
    return EvalReport(
        hits1=hits[1] / total,
        hits3=hits[3] / total,
        hits10=hits[10] / total,
        mrr=mrr / total,
        query_count=total,
        mode=mode,
    )


def write_report(report: EvalReport, path: str | Path, header_lines: Sequence[str] = ()) -> None:
    """Report as key=value lines."""
    with open(path, "w", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write(f"hits@1={report.hits1!r}\n")
        fh.write(f"hits@3={report.hits3!r}\n")
        fh.write(f"hits@10={report.hits10!r}\n")
        fh.write(f"mrr={report.mrr!r}\n")
        fh.write(f"mode={report.mode.value}\n")
        fh.write(f"n_queries={report.query_count}\n")
