"""Graph enrichment: sample candidate triples, keep the top-k by model score.

Candidates are the product E1 x T x E2 of two disjoint entity samples and a
relation sample (or explicit target relations), minus triples already in the
graph. Candidates stream through scoring in chunks, so the product (10M at
default sizes) is never materialized; ties between equal scores break by
candidate order, which is ascending (relation, head, tail).
"""

from __future__ import annotations

from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import ConfigError
from .graph import KnowledgeGraph, Triple, Vocabulary
from .models import ModelParams, score_batch

_DEFAULT_CHUNK = 65536


@dataclass(frozen=True)
class EnrichmentConfig:
    target_relations: tuple[int, ...] = ()
    sample_entities: int = 1000
    sample_relations: int = 10
    top_k: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.sample_entities < 1:
            raise ConfigError("sample_entities must be >= 1")
        if self.sample_relations < 1:
            raise ConfigError("sample_relations must be >= 1")
        if self.top_k < 1:
            raise ConfigError("top_k must be >= 1")


@dataclass
class CandidateSet:
    """Lazily iterated candidate triples in ascending (relation, head, tail) order.

    Holds the samples rather than the product; membership filtering against the
    source graph happens during iteration.
    """

    relations: tuple[int, ...]
    heads: np.ndarray   # sorted entity ids
    tails: np.ndarray   # sorted entity ids, disjoint from heads
    graph: KnowledgeGraph = field(repr=False)

    def __len__(self) -> int:
        head_set, tail_set = set(self.heads.tolist()), set(self.tails.tolist())
        existing = 0
        for rel in self.relations:
            for h, t in self.graph.relation_pairs(rel):
                if h in head_set and t in tail_set:
                    existing += 1
        return len(self.relations) * len(self.heads) * len(self.tails) - existing

    def __iter__(self) -> Iterator[Triple]:
        for h_arr, r_arr, t_arr in self.chunks():
            for h, r, t in zip(h_arr.tolist(), r_arr.tolist(), t_arr.tolist()):
                yield Triple(h, r, t)

    def chunks(self, chunk_size: int = _DEFAULT_CHUNK) -> Iterator[tuple[np.ndarray, np.ndarray, np.ndarray]]:
        """Yield (heads, relations, tails) id arrays of candidates in order."""
        pending: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []
        pending_size = 0
        for rel in self.relations:
            for h in self.heads.tolist():
                known = self.graph.tails(h, rel)
                tails = self.tails
                if known:
                    tails = tails[np.isin(tails, known, invert=True)]
                if not len(tails):
                    continue
                pending.append((
                    np.full(len(tails), h, dtype=np.intp),
                    np.full(len(tails), rel, dtype=np.intp),
                    tails,
                ))
                pending_size += len(tails)
                while pending_size >= chunk_size:
                    h_all = np.concatenate([p[0] for p in pending])
                    r_all = np.concatenate([p[1] for p in pending])
                    t_all = np.concatenate([p[2] for p in pending])
                    yield h_all[:chunk_size], r_all[:chunk_size], t_all[:chunk_size]
                    rest = (h_all[chunk_size:], r_all[chunk_size:], t_all[chunk_size:])
                    pending = [rest] if len(rest[0]) else []
                    pending_size = len(rest[0])
        if pending_size:
            yield (
                np.concatenate([p[0] for p in pending]),
                np.concatenate([p[1] for p in pending]),
                np.concatenate([p[2] for p in pending]),
            )


@dataclass
class EnrichmentResult:
    enriched: KnowledgeGraph
    added: list[tuple[Triple, float]]  # sorted by score descending
    candidate_count: int

    @property
    def added_triples(self) -> list[Triple]:
        return [t for t, _ in self.added]


def find_candidate_triples(
    kg: KnowledgeGraph,
    config: EnrichmentConfig,
    rng: np.random.Generator | None = None,
) -> CandidateSet:
    """Sample relations (unless targets are given) and two disjoint entity sets,
    then form their product minus existing triples."""
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    n_ent, n_rel = kg.num_entities, kg.num_relations
    n = config.sample_entities
    if 2 * n > n_ent:
        raise ConfigError(
            f"disjoint sampling needs 2*sample_entities <= entity count; "
            f"got 2*{n} > {n_ent}"
        )
    if config.target_relations:
        bad = [r for r in config.target_relations if not 0 <= r < n_rel]
        if bad:
            raise ConfigError(f"target relations {bad} outside vocabulary (size {n_rel})")
        relations = tuple(sorted(set(config.target_relations)))
    else:
        m = config.sample_relations
        if m > n_rel:
            raise ConfigError(f"cannot sample {m} of {n_rel} relations without repetition")
        relations = tuple(sorted(rng.permutation(n_rel)[:m].tolist()))
    entity_perm = rng.permutation(n_ent)
    heads = np.sort(entity_perm[:n])
    tails = np.sort(entity_perm[n:2 * n])
    return CandidateSet(relations, heads, tails, kg)


def infer_new_triples(
    kg: KnowledgeGraph,
    candidates: CandidateSet,
    params: ModelParams,
    k: int,
    chunk_size: int = _DEFAULT_CHUNK,
    workers: int = 1,
) -> EnrichmentResult:
    """Score every candidate, merge the k best into the graph.

    With k >= the candidate count, all candidates are added. Equal scores are
    resolved by candidate order, so runs are reproducible for a fixed sample.
    """
    if k < 1:
        raise ConfigError("k must be >= 1")

    best_scores = np.empty(0)
    best_ids = np.empty((0, 3), dtype=np.intp)
    best_ordinals = np.empty(0, dtype=np.int64)
    seen = 0

    def merge(chunk_scores, chunk_ids, chunk_ordinals):
        nonlocal best_scores, best_ids, best_ordinals
        scores = np.concatenate([best_scores, chunk_scores])
        ids = np.concatenate([best_ids, chunk_ids])
        ordinals = np.concatenate([best_ordinals, chunk_ordinals])
        order = np.lexsort((ordinals, -scores))[:k]
        best_scores, best_ids, best_ordinals = scores[order], ids[order], ordinals[order]

    def score_chunk(args):
        h, r, t = args
        return score_batch(params, h, r, t)

    def consume(chunk, scores):
        nonlocal seen
        h, r, t = chunk
        ordinals = np.arange(seen, seen + len(h), dtype=np.int64)
        seen += len(h)
        merge(scores, np.stack([h, r, t], axis=1), ordinals)

    chunk_iter = candidates.chunks(chunk_size)
    if workers <= 1:
        for chunk in chunk_iter:
            consume(chunk, score_chunk(chunk))
    else:
        # keep a bounded window of in-flight chunks; results merge in order
        with ThreadPoolExecutor(max_workers=workers) as pool:
            window: deque = deque()
            for chunk in chunk_iter:
                window.append((chunk, pool.submit(score_chunk, chunk)))
                if len(window) >= 2 * workers:
                    done_chunk, future = window.popleft()
                    consume(done_chunk, future.result())
            while window:
                done_chunk, future = window.popleft()
                consume(done_chunk, future.result())

    order = np.lexsort((best_ordinals, -best_scores))
    added = [
        (Triple(int(h), int(r), int(t)), float(s))
        for (h, r, t), s in zip(best_ids[order], best_scores[order])
    ]
    return EnrichmentResult(
        enriched=kg.merge([t for t, _ in added]),
        added=added,
        candidate_count=seen,
    )


def enrich(
    kg: KnowledgeGraph,
    params: ModelParams,
    config: EnrichmentConfig,
    workers: int = 1,
) -> EnrichmentResult:
    """Candidate generation followed by top-k inference, all seeded by config."""
    rng = np.random.default_rng(config.seed)
    candidates = find_candidate_triples(kg, config, rng)
    return infer_new_triples(kg, candidates, params, config.top_k, workers=workers)


def write_manifest(
    result: EnrichmentResult,
    entities: Vocabulary,
    relations: Vocabulary,
    path: str | Path,
    header_lines: Sequence[str] = (),
) -> None:
    """Added triples as `head<TAB>relation<TAB>tail<TAB>score`, score descending."""
    with open(path, "w", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        for (h, r, t), s in result.added:
            fh.write(f"{entities.label(h)}\t{relations.label(r)}\t{entities.label(t)}\t{s!r}\n")
