"""Conjunctive query evaluation over an indexed knowledge graph.

Queries are atom lists; evaluation is a backtracking join that always extends
the partial binding with the currently most selective atom (fewest candidate
extensions given the variables bound so far).
"""

from __future__ import annotations

from typing import Iterable, Iterator, Sequence

from ..errors import ContractError
from ..graph import KnowledgeGraph, Triple
from .atoms import Atom, Constant, Term, Variable

Binding = dict[int, int]


def _resolve(term: Term, binding: Binding) -> int | None:
    if isinstance(term, Constant):
        return term.entity
    return binding.get(term.index)


def _selectivity(kg: KnowledgeGraph, atom: Atom, binding: Binding) -> int:
    """Upper bound on the number of extensions `atom` yields under `binding`."""
    a1 = _resolve(atom.arg1, binding)
    a2 = _resolve(atom.arg2, binding)
    if a1 is not None and a2 is not None:
        return 1
    if a1 is not None:
        return len(kg.tails(a1, atom.relation))
    if a2 is not None:
        return len(kg.heads(atom.relation, a2))
    return kg.relation_size(atom.relation)


def _extensions(kg: KnowledgeGraph, atom: Atom, binding: Binding) -> Iterator[Binding]:
    a1 = _resolve(atom.arg1, binding)
    a2 = _resolve(atom.arg2, binding)
    rel = atom.relation
    if a1 is not None and a2 is not None:
        if kg.contains(Triple(a1, rel, a2)):
            yield binding
        return
    if a1 is not None:
        var = atom.arg2.index
        for t in kg.tails(a1, rel):
            yield {**binding, var: t}
        return
    if a2 is not None:
        var = atom.arg1.index
        for h in kg.heads(rel, a2):
            yield {**binding, var: h}
        return
    v1, v2 = atom.arg1.index, atom.arg2.index
    if v1 == v2:
        for h, t in kg.relation_pairs(rel):
            if h == t:
                yield {**binding, v1: h}
        return
    for h, t in kg.relation_pairs(rel):
        yield {**binding, v1: h, v2: t}


def groundings(kg: KnowledgeGraph, atoms: Sequence[Atom], bind: Binding | None = None) -> Iterator[Binding]:
    """All variable assignments satisfying every atom, as binding dicts.

    Distinct assignments may repeat the same projected values; callers that
    need set semantics deduplicate (see `match`).
    """
    remaining = list(atoms)
    binding: Binding = dict(bind) if bind else {}

    def recurse(todo: list[Atom], bound: Binding) -> Iterator[Binding]:
        if not todo:
            yield bound
            return
        idx = min(range(len(todo)), key=lambda i: _selectivity(kg, todo[i], bound))
        atom = todo[idx]
        rest = todo[:idx] + todo[idx + 1:]
        for extended in _extensions(kg, atom, bound):
            yield from recurse(rest, extended)

    yield from recurse(remaining, binding)


def satisfiable(kg: KnowledgeGraph, atoms: Sequence[Atom], bind: Binding | None = None) -> bool:
    """True iff at least one grounding exists."""
    return next(groundings(kg, atoms, bind), None) is not None


def match(
    kg: KnowledgeGraph,
    query: Sequence[Atom],
    project: Iterable[int],
    bind: Binding | None = None,
) -> set[tuple[int, ...]]:
    """Distinct projections of all satisfying assignments onto `project`.

    Output tuples align with the order of `project`. An unsatisfiable query
    yields the empty set; an empty projection yields {()} iff satisfiable.
    """
    if not query:
        raise ContractError("query must contain at least one atom")
    project = tuple(project)
    query_vars = {v for atom in query for v in atom.variables()}
    if bind:
        query_vars |= set(bind)
    missing = [v for v in project if v not in query_vars]
    if missing:
        raise ContractError(f"projection variables {missing} do not occur in the query")
    out: set[tuple[int, ...]] = set()
    for binding in groundings(kg, query, bind):
        out.add(tuple(binding[v] for v in project))
    return out
