from __future__ import annotations

import numpy as np

from kgenrich.graph import KnowledgeGraph, Triple, Vocabulary


def make_graph(id_triples, n_entities=None, n_relations=None) -> KnowledgeGraph:
    """Graph from raw id triples with synthetic labels."""
    triples = [Triple(*t) for t in id_triples]
    n_entities = n_entities or (max((max(t.head, t.tail) for t in triples), default=-1) + 1)
    n_relations = n_relations or (max((t.relation for t in triples), default=-1) + 1)
    entities = Vocabulary(f"e{i}" for i in range(n_entities))
    relations = Vocabulary(f"r{i}" for i in range(n_relations))
    return KnowledgeGraph(triples, entities, relations)


def random_graph(rng: np.random.Generator, n_entities: int, n_relations: int, n_triples: int) -> KnowledgeGraph:
    triples = {
        Triple(int(rng.integers(n_entities)), int(rng.integers(n_relations)), int(rng.integers(n_entities)))
        for _ in range(n_triples)
    }
    return make_graph(sorted(triples), n_entities, n_relations)
