"""Rule syntax: terms, atoms, Horn rules, metrics, canonical text form.

A rule is `body => head` where the body is a conjunction of atoms. Rules are
Horn (every head variable occurs in the body) and closed (every variable
occurs in at least two atoms, the head counting as one). Rule identity for
diffing is the canonical text form, which is invariant under variable
renaming and body-atom reordering.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

from ..errors import ConfigError, ContractError, ParseError
from ..graph import Vocabulary


@dataclass(frozen=True, slots=True)
class Variable:
    index: int


@dataclass(frozen=True, slots=True)
class Constant:
    entity: int


Term = Variable | Constant


@dataclass(frozen=True, slots=True)
class Atom:
    relation: int
    arg1: Term
    arg2: Term

    def terms(self) -> tuple[Term, Term]:
        return (self.arg1, self.arg2)

    def variables(self) -> tuple[int, ...]:
        return tuple(t.index for t in self.terms() if isinstance(t, Variable))


@dataclass(frozen=True)
class RuleMetrics:
    support: int
    head_coverage: Fraction
    std_confidence: Fraction
    pca_confidence: Fraction
    body_size: int | None = None  # distinct groundings; absent on file-loaded rules


@dataclass(frozen=True)
class Rule:
    body: tuple[Atom, ...]
    head: Atom
    metrics: RuleMetrics | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "body", tuple(self.body))
        if not self.body:
            raise ContractError("rule body must contain at least one atom")
        body_vars = {v for atom in self.body for v in atom.variables()}
        head_vars = set(self.head.variables())
        if not head_vars <= body_vars:
            raise ContractError(f"rule is not Horn: head variables {head_vars - body_vars} missing from body")
        atom_count: dict[int, int] = {}
        for atom in (*self.body, self.head):
            for v in set(atom.variables()):
                atom_count[v] = atom_count.get(v, 0) + 1
        open_vars = {v for v, c in atom_count.items() if c < 2}
        if open_vars:
            raise ContractError(f"rule is not closed: variables {open_vars} occur in fewer than two atoms")
        indices = sorted(atom_count)
        if indices != list(range(len(indices))):
            raise ContractError(f"variable indices must be contiguous from 0, got {indices}")

    def variables(self) -> list[int]:
        seen: dict[int, None] = {}
        for atom in (*self.body, self.head):
            for v in atom.variables():
                seen.setdefault(v)
        return list(seen)

    def with_metrics(self, metrics: RuleMetrics) -> "Rule":
        return Rule(self.body, self.head, metrics)


@dataclass(frozen=True)
class MinerConfig:
    max_body_atoms: int = 2
    min_support: int = 10
    min_head_coverage: float = 0.01
    min_pca_confidence: float = 0.1
    allow_constants: bool = False
    allow_reflexive: bool = True

    def __post_init__(self):
        if self.max_body_atoms < 1:
            raise ConfigError("max_body_atoms must be >= 1")
        if self.min_support < 0:
            raise ConfigError("min_support must be >= 0")
        if not 0.0 <= self.min_head_coverage <= 1.0:
            raise ConfigError("min_head_coverage must be within [0, 1]")
        if not 0.0 <= self.min_pca_confidence <= 1.0:
            raise ConfigError("min_pca_confidence must be within [0, 1]")


# -- canonicalization ----------------------------------------------------------


def _rename_map(body: tuple[Atom, ...], head: Atom) -> dict[int, int]:
    """Variable renaming to 0,1,2,... in order of first appearance, body first."""
    mapping: dict[int, int] = {}
    for atom in (*body, head):
        for v in atom.variables():
            if v not in mapping:
                mapping[v] = len(mapping)
    return mapping


def _apply_renaming(atom: Atom, mapping: dict[int, int]) -> Atom:
    def conv(term: Term) -> Term:
        return Variable(mapping[term.index]) if isinstance(term, Variable) else term

    return Atom(atom.relation, conv(atom.arg1), conv(atom.arg2))


def _term_key(term: Term) -> tuple[int, int]:
    return (0, term.index) if isinstance(term, Variable) else (1, term.entity)


def _atom_key(atom: Atom) -> tuple:
    return (atom.relation, _term_key(atom.arg1), _term_key(atom.arg2))


def canonical_key(rule: Rule) -> tuple:
    """Id-level structural key, identical for rules equal up to variable
    renaming and body reordering. Duplicate body atoms collapse."""
    best = None
    body = tuple(dict.fromkeys(rule.body))
    for perm in itertools.permutations(body):
        mapping = _rename_map(perm, rule.head)
        key = (
            tuple(_atom_key(_apply_renaming(a, mapping)) for a in perm),
            _atom_key(_apply_renaming(rule.head, mapping)),
        )
        if best is None or key < best:
            best = key
    return best


def canonicalize(rule: Rule) -> Rule:
    """Equivalent rule in canonical form (minimal key, variables renumbered)."""
    best_key = None
    best_rule = None
    body = tuple(dict.fromkeys(rule.body))
    for perm in itertools.permutations(body):
        mapping = _rename_map(perm, rule.head)
        renamed = tuple(_apply_renaming(a, mapping) for a in perm)
        head = _apply_renaming(rule.head, mapping)
        key = (tuple(_atom_key(a) for a in renamed), _atom_key(head))
        if best_key is None or key < best_key:
            best_key = key
            best_rule = Rule(renamed, head, rule.metrics)
    return best_rule


# -- text form -----------------------------------------------------------------

_VAR_LETTERS = "abcdefghijklmnopqrstuvwxyz"


def _var_name(index: int) -> str:
    return _VAR_LETTERS[index] if index < len(_VAR_LETTERS) else f"v{index}"


def _format_term(term: Term, entities: Vocabulary | None) -> str:
    if isinstance(term, Variable):
        return f"?{_var_name(term.index)}"
    if entities is None:
        raise ContractError("cannot format a constant without an entity vocabulary")
    return f"<{entities.label(term.entity)}>"


def _format_atom(atom: Atom, relations: Vocabulary, entities: Vocabulary | None) -> str:
    label = relations.label(atom.relation)
    for token in label.split(" "):
        if token.startswith("?") or token.startswith("<"):
            raise ContractError(f"relation label {label!r} cannot appear in rule text")
    return f"{_format_term(atom.arg1, entities)} {label} {_format_term(atom.arg2, entities)}"


def format_rule(rule: Rule, relations: Vocabulary, entities: Vocabulary | None = None) -> str:
    """Canonical text: `body_atom (" " body_atom)* " => " head_atom`.

    The body permutation and variable letters are chosen so the result is the
    lexicographically smallest string; equal rules format identically.
    """
    best = None
    body = tuple(dict.fromkeys(rule.body))
    for perm in itertools.permutations(body):
        mapping = _rename_map(perm, rule.head)
        parts = [_format_atom(_apply_renaming(a, mapping), relations, entities) for a in perm]
        text = " ".join(parts) + " => " + _format_atom(_apply_renaming(rule.head, mapping), relations, entities)
        if best is None or text < best:
            best = text
    return best


def _parse_atoms(tokens: list[str], offset: int, *, source: str,
                 relations: Vocabulary, entities: Vocabulary | None,
                 var_ids: dict[str, int], grow: bool) -> list[Atom]:
    def parse_term(pos: int) -> tuple[Term, int]:
        if pos >= len(tokens):
            raise ParseError(f"unexpected end of atom at token {offset + pos + 1}", source=source)
        token = tokens[pos]
        if token.startswith("?"):
            name = token[1:]
            if not name:
                raise ParseError(f"empty variable name at token {offset + pos + 1}", source=source)
            if name not in var_ids:
                var_ids[name] = len(var_ids)
            return Variable(var_ids[name]), pos + 1
        if token.startswith("<"):
            parts = []
            while pos < len(tokens):
                parts.append(tokens[pos])
                if tokens[pos].endswith(">"):
                    break
                pos += 1
            else:
                raise ParseError(f"unterminated constant at token {offset + pos + 1}", source=source)
            label = " ".join(parts)[1:-1]
            if entities is None:
                raise ParseError("constants require an entity vocabulary", source=source)
            return Constant(entities.add(label) if grow else entities.id(label)), pos + 1
        raise ParseError(f"expected '?var' or '<entity>' at token {offset + pos + 1}, got {token!r}", source=source)

    atoms = []
    pos = 0
    while pos < len(tokens):
        arg1, pos = parse_term(pos)
        label_parts = []
        while pos < len(tokens) and not (tokens[pos].startswith("?") or tokens[pos].startswith("<")):
            label_parts.append(tokens[pos])
            pos += 1
        if not label_parts:
            raise ParseError(f"missing relation label at token {offset + pos + 1}", source=source)
        label = " ".join(label_parts)
        arg2, pos = parse_term(pos)
        rel = relations.add(label) if grow else relations.id(label)
        atoms.append(Atom(rel, arg1, arg2))
    return atoms


def parse_rule(text: str, relations: Vocabulary, entities: Vocabulary | None = None,
               grow_vocab: bool = False) -> Rule:
    """Inverse of `format_rule`; raises ParseError at the offending position."""
    pieces = text.split(" => ")
    if len(pieces) != 2:
        raise ParseError(f"expected exactly one ' => ' separator, found {len(pieces) - 1}", source=text)
    body_text, head_text = pieces
    body_tokens = [t for t in body_text.split(" ") if t]
    head_tokens = [t for t in head_text.split(" ") if t]
    if not body_tokens:
        raise ParseError("empty rule body", source=text)
    if not head_tokens:
        raise ParseError("empty rule head", source=text)

    var_ids: dict[str, int] = {}
    body = _parse_atoms(body_tokens, 0, source=text, relations=relations,
                        entities=entities, var_ids=var_ids, grow=grow_vocab)
    head = _parse_atoms(head_tokens, len(body_tokens), source=text, relations=relations,
                        entities=entities, var_ids=var_ids, grow=grow_vocab)
    if len(head) != 1:
        raise ParseError(f"rule head must be a single atom, got {len(head)}", source=text)
    try:
        return Rule(tuple(body), head[0])
    except ContractError as exc:
        raise ParseError(str(exc), source=text) from exc
