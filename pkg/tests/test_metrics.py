from fractions import Fraction

import pytest

from helpers import make_graph, random_graph
from oracles import all_closed_rules, oracle_rule_counts

from kgenrich.errors import UndefinedMetricError
from kgenrich.graph import functionality
from kgenrich.rules.atoms import Atom, Rule, Variable
from kgenrich.rules.metrics import (
    _counts_dense,
    _counts_general,
    _counts_sparse,
    head_coverage,
    pca_confidence,
    rule_counts,
    rule_metrics,
    std_confidence,
    support,
)

V = Variable


def born_lives_graph():
    # born(a,US), lives(a,US), born(b,FR), lives(b,DE)
    return make_graph([(0, 0, 2), (0, 1, 2), (1, 0, 3), (1, 1, 4)])


BORN_RULE = Rule((Atom(0, V(0), V(1)),), Atom(1, V(0), V(1)))


def test_support_unmatched_body_is_zero():
    kg = make_graph([(0, 1, 1)], n_relations=2)
    assert support(kg, Rule((Atom(0, V(0), V(1)),), Atom(1, V(0), V(1)))) == 0


def test_support_hand_example():
    assert support(born_lives_graph(), BORN_RULE) == 1


def test_support_tautology_counts_head_relation():
    kg = born_lives_graph()
    taut = Rule((Atom(1, V(0), V(1)),), Atom(1, V(0), V(1)))
    assert support(kg, taut) == kg.relation_size(1)
    assert std_confidence(kg, taut) == 1
    assert head_coverage(kg, taut) == 1


def test_std_confidence_hand_example():
    assert std_confidence(born_lives_graph(), BORN_RULE) == Fraction(1, 2)


def test_pca_confidence_hand_example():
    kg = born_lives_graph()
    table = functionality(kg)
    # lives is subject-functional; lives(b,FR) is contradicted by lives(b,DE)
    assert table[1].subject_functional
    assert pca_confidence(kg, table, BORN_RULE) == Fraction(1, 2)


def test_pca_confidence_all_predictions_true():
    kg = make_graph([(0, 0, 1), (0, 1, 1), (2, 0, 3), (2, 1, 3)])
    rule = Rule((Atom(0, V(0), V(1)),), Atom(1, V(0), V(1)))
    assert pca_confidence(kg, functionality(kg), rule) == 1


def test_head_coverage_hand_example():
    assert head_coverage(born_lives_graph(), BORN_RULE) == Fraction(1, 2)


def test_zero_groundings_is_undefined():
    kg = make_graph([(0, 1, 1)], n_relations=2)
    rule = Rule((Atom(0, V(0), V(1)),), Atom(1, V(0), V(1)))
    with pytest.raises(UndefinedMetricError):
        std_confidence(kg, rule)
    with pytest.raises(UndefinedMetricError):
        rule_metrics(kg, rule)


def test_head_relation_without_triples_is_undefined():
    kg = make_graph([(0, 0, 1)], n_relations=2)
    rule = Rule((Atom(0, V(0), V(1)),), Atom(1, V(0), V(1)))
    with pytest.raises(UndefinedMetricError):
        head_coverage(kg, rule)


def test_engines_agree_on_random_graphs(rng):
    relations = [0, 1, 2]
    rules = all_closed_rules(relations)
    for trial in range(12):
        kg = random_graph(rng, 9, 3, 45)
        for rule in rules:
            expected = oracle_rule_counts(kg, rule)
            for engine in (_counts_general, _counts_dense, _counts_sparse):
                got = engine(kg, rule, True)
                assert (got.body_size, got.predictions, got.support,
                        got.pca_subject, got.pca_object) == (
                    expected.body_size, expected.predictions, expected.support,
                    expected.pca_subject, expected.pca_object,
                ), (trial, rule, engine.__name__)


def test_engines_agree_without_reflexive_bindings(rng):
    relations = [0, 1]
    rules = all_closed_rules(relations)
    for trial in range(8):
        kg = random_graph(rng, 7, 2, 30)
        for rule in rules:
            expected = oracle_rule_counts(kg, rule, allow_reflexive=False)
            for engine in (_counts_general, _counts_dense, _counts_sparse):
                got = engine(kg, rule, False)
                assert (got.body_size, got.predictions, got.support,
                        got.pca_subject, got.pca_object) == (
                    expected.body_size, expected.predictions, expected.support,
                    expected.pca_subject, expected.pca_object,
                ), (trial, rule, engine.__name__)


def test_pca_at_least_std_on_random_pairs(rng):
    # the PCA denominator only keeps predictions with a known subject/object
    checked = 0
    rules = all_closed_rules([0, 1, 2])
    while checked < 1000:
        kg = random_graph(rng, 8, 3, 35)
        table = functionality(kg)
        for rule in rules:
            counts = rule_counts(kg, rule)
            if counts.body_size == 0 or rule.head.relation not in table:
                continue
            std = std_confidence(kg, rule)
            pca = pca_confidence(kg, table, rule)
            assert std <= pca <= 1
            checked += 1
            if checked >= 1000:
                break


def test_metrics_invariants_on_random_rules(rng):
    rules = all_closed_rules([0, 1])
    for _ in range(10):
        kg = random_graph(rng, 8, 2, 30)
        for rule in rules:
            counts = rule_counts(kg, rule)
            assert counts.support <= counts.predictions <= counts.body_size
            assert counts.support <= kg.relation_size(rule.head.relation)
            if counts.body_size:
                metrics = rule_metrics(kg, rule)
                assert 0 <= metrics.std_confidence <= metrics.pca_confidence <= 1


def test_reflexive_collision_exclusion():
    # inverse rule over a relation with a self-loop: the loop grounding is
    # vacuous (body atom instantiates to the predicted head) and must not count
    kg = make_graph([(0, 0, 0), (1, 0, 2), (2, 0, 1)])
    rule = Rule((Atom(0, V(1), V(0)),), Atom(0, V(0), V(1)))
    counts = rule_counts(kg, rule)
    assert counts.body_size == 2  # (1,2) and (2,1); the (0,0) grounding is excluded
    assert counts.support == 2
    assert oracle_rule_counts(kg, rule).body_size == 2


def test_constant_rule_uses_general_engine():
    from kgenrich.rules.atoms import Constant

    kg = make_graph([(0, 0, 1), (2, 0, 1), (0, 1, 1), (2, 1, 3)])
    rule = Rule((Atom(0, V(0), Constant(1)), Atom(1, V(0), V(1))), Atom(1, V(0), V(1)))
    counts = rule_counts(kg, rule)
    expected = oracle_rule_counts(kg, rule)
    assert (counts.body_size, counts.predictions, counts.support) == (
        expected.body_size, expected.predictions, expected.support)
