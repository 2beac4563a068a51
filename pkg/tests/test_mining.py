import numpy as np
import pytest

from helpers import make_graph, random_graph

from kgenrich.errors import ParseError
from kgenrich.graph import KnowledgeGraph, Triple, Vocabulary
from kgenrich.rules.atoms import Atom, MinerConfig, Rule, Variable, format_rule
from kgenrich.rules.mining import mine_rules, read_rules, write_rules

V = Variable


def duplicated_relation_graph(rng, n_entities=20, n_pairs=30):
    """r1 and r0 hold on exactly the same pairs."""
    pairs = {(int(rng.integers(n_entities)), int(rng.integers(n_entities))) for _ in range(n_pairs)}
    triples = [(h, 0, t) for h, t in pairs] + [(h, 1, t) for h, t in pairs]
    return make_graph(sorted(triples), n_entities, 2)


def test_duplicated_relation_yields_perfect_rule(rng):
    kg = duplicated_relation_graph(rng)
    rules = mine_rules(kg, MinerConfig(min_support=5))
    texts = {format_rule(r, kg.relations, kg.entities): r for r in rules}
    rule = texts.get("?a r0 ?b => ?a r1 ?b")
    assert rule is not None
    assert rule.metrics.std_confidence == 1
    assert rule.metrics.support == kg.relation_size(1)


def test_thresholds_can_empty_the_output(rng):
    kg = random_graph(rng, 10, 2, 25)
    rules = mine_rules(kg, MinerConfig(min_support=10**6))
    assert rules == []


def test_raising_thresholds_never_adds_rules(rng):
    kg = duplicated_relation_graph(rng, n_entities=12, n_pairs=25)
    base = MinerConfig(min_support=2, min_head_coverage=0.0, min_pca_confidence=0.0)
    baseline = {format_rule(r, kg.relations, kg.entities) for r in mine_rules(kg, base)}
    for tightened in (
        MinerConfig(min_support=5, min_head_coverage=0.0, min_pca_confidence=0.0),
        MinerConfig(min_support=2, min_head_coverage=0.3, min_pca_confidence=0.0),
        MinerConfig(min_support=2, min_head_coverage=0.0, min_pca_confidence=0.5),
        MinerConfig(max_body_atoms=1, min_support=2, min_head_coverage=0.0, min_pca_confidence=0.0),
    ):
        tightened_rules = {format_rule(r, kg.relations, kg.entities) for r in mine_rules(kg, tightened)}
        assert tightened_rules <= baseline, tightened


def test_mining_invariant_under_triple_permutation(rng):
    kg = duplicated_relation_graph(rng, n_entities=15, n_pairs=40)
    config = MinerConfig(min_support=3)
    rules_a = mine_rules(kg, config)

    # reload the same triples in a shuffled order with shuffled label->id maps
    labeled = [
        (kg.entities.label(h), kg.relations.label(r), kg.entities.label(t))
        for h, r, t in kg.triples
    ]
    order = rng.permutation(len(labeled))
    entities2, relations2 = Vocabulary(), Vocabulary()
    shuffled = [
        Triple(entities2.add(labeled[i][0]), relations2.add(labeled[i][1]), entities2.add(labeled[i][2]))
        for i in order
    ]
    kg2 = KnowledgeGraph(shuffled, entities2, relations2)
    rules_b = mine_rules(kg2, config)

    lines_a = [
        (format_rule(r, kg.relations, kg.entities), r.metrics.support,
         r.metrics.std_confidence, r.metrics.pca_confidence)
        for r in rules_a
    ]
    lines_b = [
        (format_rule(r, kg2.relations, kg2.entities), r.metrics.support,
         r.metrics.std_confidence, r.metrics.pca_confidence)
        for r in rules_b
    ]
    assert lines_a == lines_b


def test_parallel_and_serial_runs_match(rng):
    kg = duplicated_relation_graph(rng, n_entities=15, n_pairs=40)
    config = MinerConfig(min_support=3)
    serial = mine_rules(kg, config, workers=1)
    parallel = mine_rules(kg, config, workers=4)
    key = lambda rules: [(format_rule(r, kg.relations, kg.entities), r.metrics) for r in rules]
    assert key(serial) == key(parallel)


def test_output_is_sorted_and_deduplicated(rng):
    kg = duplicated_relation_graph(rng)
    rules = mine_rules(kg, MinerConfig(min_support=2))
    texts = [format_rule(r, kg.relations, kg.entities) for r in rules]
    assert texts == sorted(texts)
    assert len(texts) == len(set(texts))


def test_emitted_rules_are_closed_horn_and_pass_thresholds(rng):
    kg = random_graph(rng, 12, 3, 60)
    config = MinerConfig(min_support=3, min_head_coverage=0.05, min_pca_confidence=0.2)
    for rule in mine_rules(kg, config):
        assert rule.metrics.support >= config.min_support
        assert rule.metrics.head_coverage >= config.min_head_coverage
        assert rule.metrics.pca_confidence >= config.min_pca_confidence
        assert len(rule.body) <= config.max_body_atoms


def test_tautology_never_emitted(rng):
    kg = random_graph(rng, 8, 2, 30)
    rules = mine_rules(kg, MinerConfig(min_support=1, min_head_coverage=0.0, min_pca_confidence=0.0))
    for rule in rules:
        assert rule.head not in rule.body


def test_constants_enabled_smoke():
    # r0 links several subjects to entity 9; r1 mirrors it for the same subjects
    triples = [(i, 0, 9) for i in range(6)] + [(i, 1, 9) for i in range(6)]
    kg = make_graph(triples, 10, 2)
    config = MinerConfig(min_support=3, min_head_coverage=0.0, min_pca_confidence=0.0,
                         allow_constants=True)
    rules = mine_rules(kg, config)
    texts = {format_rule(r, kg.relations, kg.entities) for r in rules}
    assert "?a r0 <e9> ?a r1 ?b => ?a r1 ?b" not in texts  # head copied into body is never generated
    assert any("<e9>" in t for t in texts)


def test_rules_tsv_round_trip(tmp_path, rng):
    kg = duplicated_relation_graph(rng)
    rules = mine_rules(kg, MinerConfig(min_support=3))
    path = tmp_path / "rules.tsv"
    write_rules(rules, kg.relations, kg.entities, path, header_lines=["config_hash=deadbeef"])
    again = read_rules(path, kg.relations, kg.entities, grow_vocab=False)
    assert [format_rule(r, kg.relations, kg.entities) for r in again] == [
        format_rule(r, kg.relations, kg.entities) for r in rules
    ]
    for a, b in zip(again, rules):
        assert a.metrics.support == b.metrics.support
        assert float(a.metrics.pca_confidence) == float(b.metrics.pca_confidence)


def test_read_rules_rejects_malformed(tmp_path):
    path = tmp_path / "rules.tsv"
    path.write_text("?a r0 ?b => ?a r1 ?b\t3\n")
    with pytest.raises(ParseError):
        read_rules(path, Vocabulary(), Vocabulary())
