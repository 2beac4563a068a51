import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgenrich.errors import ContractError, ParseError
from kgenrich.graph import Vocabulary
from kgenrich.rules.atoms import (
    Atom,
    Constant,
    MinerConfig,
    Rule,
    Variable,
    canonical_key,
    canonicalize,
    format_rule,
    parse_rule,
)

V = Variable
REL = Vocabulary(["r0", "r1", "r2", "works at", "r4"])
ENT = Vocabulary([f"e{i}" for i in range(10)])


def rule(body, head):
    return Rule(tuple(body), head)


def test_rule_rejects_non_horn():
    with pytest.raises(ContractError, match="Horn"):
        rule([Atom(0, V(0), V(2))], Atom(1, V(0), V(1)))


def test_rule_rejects_open():
    # z occurs in a single atom
    with pytest.raises(ContractError, match="closed"):
        rule([Atom(0, V(0), V(1)), Atom(1, V(0), V(2))], Atom(2, V(0), V(1)))


def test_rule_rejects_empty_body():
    with pytest.raises(ContractError):
        rule([], Atom(0, V(0), V(1)))


def test_rule_rejects_gapped_variables():
    with pytest.raises(ContractError, match="contiguous"):
        rule([Atom(0, V(0), V(2))], Atom(1, V(0), V(2)))


def test_variable_constant_never_equal():
    assert Variable(3) != Constant(3)
    assert Atom(0, Variable(1), Constant(1)) != Atom(0, Constant(1), Variable(1))


def test_format_simple_rule():
    r = rule([Atom(0, V(0), V(1))], Atom(1, V(0), V(1)))
    assert format_rule(r, REL, ENT) == "?a r0 ?b => ?a r1 ?b"


def test_format_is_rename_invariant():
    a = rule([Atom(0, V(0), V(2)), Atom(1, V(2), V(1))], Atom(2, V(0), V(1)))
    # same rule with the chain variable introduced in a different role order
    b = rule([Atom(1, V(2), V(1)), Atom(0, V(0), V(2))], Atom(2, V(0), V(1)))
    assert format_rule(a, REL, ENT) == format_rule(b, REL, ENT)
    assert canonical_key(a) == canonical_key(b)


def test_format_handles_multiword_labels():
    r = rule([Atom(3, V(0), V(1))], Atom(0, V(0), V(1)))
    text = format_rule(r, REL, ENT)
    assert text == "?a works at ?b => ?a r0 ?b"
    assert parse_rule(text, REL, ENT) == r


def test_parse_round_trip_with_constant():
    r = rule([Atom(0, V(0), Constant(4)), Atom(1, V(0), V(1))], Atom(2, V(0), V(1)))
    text = format_rule(r, REL, ENT)
    assert parse_rule(text, REL, ENT) == canonicalize(r)


def test_parse_rejects_separator_garbage():
    with pytest.raises(ParseError):
        parse_rule("=> only", REL, ENT)
    with pytest.raises(ParseError):
        parse_rule("?a r0 ?b => ?a r1 ?b => ?a r2 ?b", REL, ENT)
    with pytest.raises(ParseError):
        parse_rule("?a r0 => ?a r1 ?b", REL, ENT)


def test_parse_rejects_open_rule():
    with pytest.raises(ParseError):
        parse_rule("?a r0 ?c => ?a r1 ?b", REL, ENT)


@st.composite
def closed_rules(draw):
    n_rel = draw(st.integers(1, 4))
    relations = list(range(n_rel))
    head = Atom(draw(st.sampled_from(relations)), V(0), V(1))
    shape = draw(st.sampled_from(["single", "pair", "path"]))
    if shape == "single":
        body = [Atom(draw(st.sampled_from(relations)), *draw(st.sampled_from([(V(0), V(1)), (V(1), V(0))])))]
    elif shape == "pair":
        combos = [(V(0), V(1)), (V(1), V(0))]
        a1 = Atom(draw(st.sampled_from(relations)), *draw(st.sampled_from(combos)))
        a2 = Atom(draw(st.sampled_from(relations)), *draw(st.sampled_from(combos)))
        if a1 == a2 or {a1, a2} == {head}:
            body = [a1] if a1 != head else [Atom((head.relation + 1) % max(n_rel, 2), V(0), V(1))]
        else:
            body = [a1, a2]
    else:
        d1 = draw(st.sampled_from([(V(0), V(2)), (V(2), V(0))]))
        d2 = draw(st.sampled_from([(V(2), V(1)), (V(1), V(2))]))
        body = [Atom(draw(st.sampled_from(relations)), *d1), Atom(draw(st.sampled_from(relations)), *d2)]
    try:
        return rule(body, head)
    except ContractError:
        return rule([Atom(head.relation, V(0), V(1))], head)


@settings(max_examples=1000, deadline=None)
@given(closed_rules())
def test_format_parse_round_trip(r):
    text = format_rule(r, REL, ENT)
    parsed = parse_rule(text, REL, ENT)
    assert canonical_key(parsed) == canonical_key(r)
    assert format_rule(parsed, REL, ENT) == text


@settings(max_examples=300, deadline=None)
@given(closed_rules(), st.permutations([0, 1, 2]))
def test_canonicalization_invariant_under_renaming(r, perm):
    remap = dict(enumerate(perm))

    def rename_atom(atom):
        def conv(term):
            return Variable(remap[term.index]) if isinstance(term, Variable) else term
        return Atom(atom.relation, conv(atom.arg1), conv(atom.arg2))

    renamed_body = tuple(rename_atom(a) for a in reversed(r.body))
    renamed_head = rename_atom(r.head)
    # build without __init__: renamed indices may be non-contiguous on purpose
    shuffled = object.__new__(Rule)
    object.__setattr__(shuffled, "body", renamed_body)
    object.__setattr__(shuffled, "head", renamed_head)
    object.__setattr__(shuffled, "metrics", None)
    assert canonical_key(shuffled) == canonical_key(r)
    assert format_rule(shuffled, REL, ENT) == format_rule(r, REL, ENT)


def test_miner_config_validation():
    with pytest.raises(Exception):
        MinerConfig(max_body_atoms=0)
    with pytest.raises(Exception):
        MinerConfig(min_head_coverage=1.5)
    assert MinerConfig().max_body_atoms == 2
