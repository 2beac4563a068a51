from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import make_graph, random_graph
from oracles import oracle_contains

from kgenrich.errors import DataError, ParseError, UndefinedMetricError, VocabularyError
from kgenrich.graph import (
    KnowledgeGraph,
    Triple,
    Vocabulary,
    functionality,
    graph_stats,
    load_split,
    load_triples,
    merge,
    save_triples,
    write_stats,
)


def test_load_deduplicates_identical_lines(tmp_path):
    path = tmp_path / "g.tsv"
    path.write_text("a\tr\tb\na\tr\tb\n")
    kg = load_triples(path)
    assert len(kg) == 1
    assert kg.num_entities == 2 and kg.num_relations == 1


def test_load_empty_file(tmp_path):
    path = tmp_path / "empty.tsv"
    path.write_text("")
    kg = load_triples(path)
    assert len(kg) == 0
    assert kg.num_entities == 0 and kg.num_relations == 0


def test_load_malformed_line_reports_line_number(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("a\tr\tb\na\tr\n")
    with pytest.raises(ParseError, match="line|2"):
        load_triples(path)


def test_load_labels_with_spaces(tmp_path):
    path = tmp_path / "g.tsv"
    path.write_text("New York\tlocated in\tUnited States\n")
    kg = load_triples(path)
    assert len(kg) == 1
    assert "New York" in kg.entities and "located in" in kg.relations


def test_load_fixed_vocab_rejects_unknown_label(tmp_path):
    train = tmp_path / "train.tsv"
    train.write_text("a\tr\tb\n")
    kg = load_triples(train)
    extra = tmp_path / "extra.tsv"
    extra.write_text("a\tr\tc\n")
    with pytest.raises(VocabularyError, match="c"):
        load_triples(extra, vocab=(kg.entities, kg.relations))


def test_first_seen_id_assignment(tmp_path):
    path = tmp_path / "g.tsv"
    path.write_text("b\tr\ta\nc\ts\tb\n")
    kg = load_triples(path)
    assert kg.entities.id("b") == 0 and kg.entities.id("a") == 1 and kg.entities.id("c") == 2
    assert kg.relations.id("r") == 0 and kg.relations.id("s") == 1


def test_save_load_round_trip(tmp_path, rng):
    kg = random_graph(rng, 15, 3, 60)
    path = tmp_path / "g.tsv"
    kg.save(path)
    again = load_triples(path)
    original = {(kg.entities.label(h), kg.relations.label(r), kg.entities.label(t)) for h, r, t in kg}
    reloaded = {(again.entities.label(h), again.relations.label(r), again.entities.label(t)) for h, r, t in again}
    assert original == reloaded


def test_vocab_round_trip(tmp_path):
    vocab = Vocabulary(["alpha", "beta gamma", "delta"])
    path = tmp_path / "vocab.tsv"
    vocab.save(path)
    again = Vocabulary.load(path)
    assert list(again) == list(vocab)


def test_contains_matches_naive_scan(rng):
    kg = random_graph(rng, 12, 4, 100)
    for t in kg.triples:
        assert kg.contains(t) == oracle_contains(kg, t)
    for _ in range(50):
        probe = Triple(int(rng.integers(12)), int(rng.integers(4)), int(rng.integers(12)))
        assert kg.contains(probe) == oracle_contains(kg, probe)


def test_contains_on_empty_graph():
    kg = make_graph([], n_entities=3, n_relations=1)
    assert not kg.contains(Triple(0, 0, 1))


def test_index_consistency(rng):
    kg = random_graph(rng, 10, 3, 70)
    for rel in kg.present_relations():
        pairs = sorted(kg.relation_pairs(rel))
        from_triples = sorted((h, t) for h, r, t in kg if r == rel)
        assert pairs == from_triples
        for h, t in pairs:
            assert t in kg.tails(h, rel)
            assert h in kg.heads(rel, t)
    for t in kg:
        assert t in kg.outgoing(t.head)
        assert t in kg.incoming(t.tail)


def test_functionality_hand_example():
    # r(a,b), r(a,c), r(d,b)
    kg = make_graph([(0, 0, 1), (0, 0, 2), (3, 0, 1)])
    table = functionality(kg)
    assert table[0].fun == Fraction(2, 3)
    assert table[0].fun_inv == Fraction(2, 3)
    assert table[0].subject_functional  # tie resolves to subject side


def test_functionality_single_triple():
    table = functionality(make_graph([(0, 0, 1)]))
    assert table[0].fun == 1 and table[0].fun_inv == 1


def test_functionality_inverse_example():
    # r(a,b), r(c,b)
    table = functionality(make_graph([(0, 0, 1), (2, 0, 1)]))
    assert table[0].fun == 1
    assert table[0].fun_inv == Fraction(1, 2)


def test_functionality_missing_relation_errors():
    table = functionality(make_graph([(0, 0, 1)], n_relations=2))
    with pytest.raises(UndefinedMetricError):
        table[1]


def test_functionality_bounds_property(rng):
    kg = random_graph(rng, 15, 5, 120)
    table = functionality(kg)
    for rel in kg.present_relations():
        entry = table[rel]
        assert 0 < entry.fun <= 1 and 0 < entry.fun_inv <= 1
        # fun * |pairs| is the integer count of distinct subjects
        assert (entry.fun * kg.relation_size(rel)).denominator == 1


def test_merge_identity_and_idempotence(rng):
    kg = random_graph(rng, 10, 2, 40)
    assert set(merge(kg, []).triples) == set(kg.triples)
    existing = kg.triples[0]
    assert len(merge(kg, [existing])) == len(kg)


def test_merge_adds_fresh_triples(rng):
    kg = random_graph(rng, 30, 2, 50)
    fresh = []
    for h in range(30):
        for t in range(30):
            candidate = Triple(h, 1, t)
            if not kg.contains(candidate):
                fresh.append(candidate)
            if len(fresh) == 50:
                break
        if len(fresh) == 50:
            break
    merged = merge(kg, fresh)
    assert len(merged) == len(kg) + 50
    assert set(merged.triples) == set(kg.triples) | set(fresh)
    assert len(kg) == 50  # input unchanged


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 2), st.integers(0, 5)), max_size=20),
       st.lists(st.tuples(st.integers(0, 5), st.integers(0, 2), st.integers(0, 5)), max_size=20))
def test_merge_associative_idempotent(batch1, batch2):
    kg = make_graph([], n_entities=6, n_relations=3)
    t1 = [Triple(*t) for t in batch1]
    t2 = [Triple(*t) for t in batch2]
    left = merge(merge(kg, t1), t2)
    right = merge(kg, t1 + t2)
    assert set(left.triples) == set(right.triples)
    assert set(merge(left, t1).triples) == set(left.triples)


def test_graph_is_immutable_under_merge(rng):
    kg = random_graph(rng, 8, 2, 20)
    before = kg.triples
    merge(kg, [Triple(0, 0, 7)])
    assert kg.triples == before


def test_split_loader_shared_vocab(tmp_path):
    (tmp_path / "train.tsv").write_text("a\tr\tb\nb\tr\tc\n")
    (tmp_path / "valid.tsv").write_text("a\tr\tc\n")
    (tmp_path / "test.tsv").write_text("c\tr\ta\n")
    split = load_split(tmp_path / "train.tsv", tmp_path / "valid.tsv", tmp_path / "test.tsv")
    assert len(split.train) == 2
    assert len(split.valid) == 1 and len(split.test) == 1
    assert split.entities.id("c") == 2


def test_split_loader_oov_drop(tmp_path):
    (tmp_path / "train.tsv").write_text("a\tr\tb\n")
    (tmp_path / "test.tsv").write_text("a\tr\tzz\n")
    split = load_split(tmp_path / "train.tsv", None, tmp_path / "test.tsv", oov_policy="drop")
    assert split.test == []
    assert "zz" in split.entities  # label keeps its id even when the triple is dropped


def test_split_loader_oov_move(tmp_path):
    (tmp_path / "train.tsv").write_text("a\tr\tb\n")
    (tmp_path / "test.tsv").write_text("a\tr\tzz\n")
    split = load_split(tmp_path / "train.tsv", None, tmp_path / "test.tsv", oov_policy="move")
    assert split.test == []
    assert len(split.train) == 2


def test_split_loader_oov_error(tmp_path):
    (tmp_path / "train.tsv").write_text("a\tr\tb\n")
    (tmp_path / "test.tsv").write_text("a\tr\tzz\n")
    with pytest.raises(DataError):
        load_split(tmp_path / "train.tsv", None, tmp_path / "test.tsv", oov_policy="error")


def test_split_loader_rejects_overlap(tmp_path):
    (tmp_path / "train.tsv").write_text("a\tr\tb\n")
    (tmp_path / "test.tsv").write_text("a\tr\tb\n")
    with pytest.raises(DataError):
        load_split(tmp_path / "train.tsv", None, tmp_path / "test.tsv")


def test_stats_report(tmp_path, rng):
    kg = random_graph(rng, 9, 2, 30)
    stats = graph_stats(kg)
    assert stats == {"triples": len(kg), "entities": 9, "relations": 2}
    write_stats(kg, tmp_path / "stats.txt")
    lines = (tmp_path / "stats.txt").read_text().splitlines()
    assert f"triples={len(kg)}" in lines


def test_save_triples_writes_labels(tmp_path):
    kg = make_graph([(0, 0, 1)])
    save_triples(kg.triples, kg.entities, kg.relations, tmp_path / "out.tsv")
    assert (tmp_path / "out.tsv").read_text() == "e0\tr0\te1\n"


def test_header_comment_lines_are_skipped(tmp_path):
    path = tmp_path / "g.tsv"
    path.write_text("# config_hash=abc123\na\tr\tb\n")
    kg = load_triples(path)
    assert len(kg) == 1
