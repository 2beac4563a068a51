import pytest

from helpers import make_graph, random_graph
from oracles import oracle_match

from kgenrich.errors import ContractError
from kgenrich.rules.atoms import Atom, Constant, Variable
from kgenrich.rules.query import groundings, match, satisfiable

V = Variable


def test_single_atom_projection():
    kg = make_graph([(0, 0, 1)])
    assert match(kg, [Atom(0, V(0), V(1))], (0, 1)) == {(0, 1)}


def test_unsatisfiable_query_is_empty():
    kg = make_graph([(0, 0, 1)], n_relations=2)
    assert match(kg, [Atom(1, V(0), V(1))], (0, 1)) == set()
    assert not satisfiable(kg, [Atom(1, V(0), V(1))])


def test_empty_query_rejected():
    kg = make_graph([(0, 0, 1)])
    with pytest.raises(ContractError):
        match(kg, [], (0,))


def test_projection_var_must_occur():
    kg = make_graph([(0, 0, 1)])
    with pytest.raises(ContractError):
        match(kg, [Atom(0, V(0), V(1))], (5,))


def test_constant_argument():
    kg = make_graph([(0, 0, 1), (2, 0, 1), (0, 0, 2)])
    assert match(kg, [Atom(0, V(0), Constant(1))], (0,)) == {(0,), (2,)}


def test_same_variable_twice():
    kg = make_graph([(0, 0, 0), (1, 0, 2)])
    assert match(kg, [Atom(0, V(0), V(0))], (0,)) == {(0,)}


def test_initial_binding():
    kg = make_graph([(0, 0, 1), (2, 0, 3)])
    assert match(kg, [Atom(0, V(0), V(1))], (1,), bind={0: 2}) == {(3,)}


def test_empty_projection_signals_satisfiability():
    kg = make_graph([(0, 0, 1)])
    assert match(kg, [Atom(0, V(0), V(1))], ()) == {()}
    assert match(kg, [Atom(0, V(1), V(0))], (), bind={0: 0}) == set()


def test_join_on_shared_variable():
    # path 0 -r0-> 1 -r1-> 2
    kg = make_graph([(0, 0, 1), (1, 1, 2), (0, 0, 3)], n_entities=4)
    result = match(kg, [Atom(0, V(0), V(2)), Atom(1, V(2), V(1))], (0, 1))
    assert result == {(0, 2)}


def test_match_equals_nested_loop_enumeration(rng):
    queries = [
        [Atom(0, V(0), V(1))],
        [Atom(0, V(0), V(1)), Atom(1, V(1), V(2))],
        [Atom(0, V(0), V(1)), Atom(1, V(0), V(2)), Atom(2, V(1), V(2))],
        [Atom(0, V(0), V(1)), Atom(0, V(1), V(0))],
        [Atom(1, V(0), V(0))],
    ]
    for trial in range(15):
        kg = random_graph(rng, 8, 3, 40)
        for atoms in queries:
            variables = sorted({t.index for a in atoms for t in (a.arg1, a.arg2)})
            got = match(kg, atoms, variables)
            expected = oracle_match(kg, atoms, variables)
            assert got == expected, (trial, atoms)


def test_groundings_enumerate_duplicated_assignments_once_each(rng):
    kg = random_graph(rng, 6, 2, 25)
    atoms = [Atom(0, V(0), V(1)), Atom(1, V(1), V(2))]
    seen = [tuple(sorted(b.items())) for b in groundings(kg, atoms)]
    assert len(seen) == len(set(seen))
