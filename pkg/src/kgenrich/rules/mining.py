"""Breadth-first mining of closed Horn rules with threshold pruning.

Search starts from one single-head-atom skeleton per relation and refines by
adding a dangling atom (one fresh variable), a closing atom (two existing
variables) or, when constants are enabled, an instantiated atom. Support is
non-increasing under refinement, so partial rules below the support floor are
pruned. Only closed Horn rules passing all thresholds are emitted, sorted by
canonical rule text so runs are reproducible regardless of input order or
worker count.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from ..errors import ParseError
from ..graph import FunctionalityTable, KnowledgeGraph, Vocabulary, functionality
from .atoms import (
    Atom,
    Constant,
    MinerConfig,
    Rule,
    RuleMetrics,
    Variable,
    canonical_key,
    canonicalize,
    format_rule,
    parse_rule,
)
from .metrics import RuleCounts, rule_counts
from .query import satisfiable


def _atom_count(body: Sequence[Atom], head: Atom) -> dict[int, int]:
    counts: dict[int, int] = {}
    for atom in (*body, head):
        for v in set(atom.variables()):
            counts[v] = counts.get(v, 0) + 1
    return counts


def _is_closed_horn(body: Sequence[Atom], head: Atom) -> bool:
    body_vars = {v for a in body for v in a.variables()}
    if not set(head.variables()) <= body_vars:
        return False
    return all(c >= 2 for c in _atom_count(body, head).values())


def _closable(body: Sequence[Atom], head: Atom, remaining: int) -> bool:
    """Can `remaining` further atoms (two variables each) close every deficit?"""
    deficits = sum(1 for c in _atom_count(body, head).values() if c < 2)
    return math.ceil(deficits / 2) <= remaining


def _expand(
    kg: KnowledgeGraph,
    body: tuple[Atom, ...],
    head: Atom,
    config: MinerConfig,
    relations: Sequence[int],
) -> Iterator[tuple[Atom, ...]]:
    existing = sorted(_atom_count(body, head))
    fresh = existing[-1] + 1
    last_slot = len(body) + 1 >= config.max_body_atoms
    for rel in relations:
        for u in existing:
            for v in existing:
                if u == v:
                    continue
                atom = Atom(rel, Variable(u), Variable(v))
                if atom != head and atom not in body:
                    yield (*body, atom)
        if not last_slot:
            for v in existing:
                yield (*body, Atom(rel, Variable(v), Variable(fresh)))
                yield (*body, Atom(rel, Variable(fresh), Variable(v)))
        if config.allow_constants:
            for v in existing:
                for c in sorted(kg.objects(rel)):
                    atom = Atom(rel, Variable(v), Constant(c))
                    if atom not in body:
                        yield (*body, atom)
                for c in sorted(kg.subjects(rel)):
                    atom = Atom(rel, Constant(c), Variable(v))
                    if atom not in body:
                        yield (*body, atom)


def _open_support_reaches(
    kg: KnowledgeGraph, body: tuple[Atom, ...], head: Atom, floor: int
) -> bool:
    """True iff the partial rule's support upper bound reaches `floor`:
    head facts whose bound variables leave the body satisfiable."""
    if floor <= 0:
        return True
    pairs = kg.relation_pairs(head.relation)
    body_vars = {v for a in body for v in a.variables()}
    hx, hy = head.arg1, head.arg2

    if len(body) == 1 and sum(v.index in body_vars for v in (hx, hy) if isinstance(v, Variable)) == 1:
        atom = body[0]
        side_var = hx.index if isinstance(hx, Variable) and hx.index in atom.variables() else hy.index
        allowed = (
            kg.subjects(atom.relation)
            if isinstance(atom.arg1, Variable) and atom.arg1.index == side_var
            else kg.objects(atom.relation)
        )
        take_head = isinstance(hx, Variable) and hx.index == side_var
        count = 0
        for a, b in pairs:
            if (a if take_head else b) in allowed:
                count += 1
                if count >= floor:
                    return True
        return False

    bound_head_vars = {
        v.index for v in (hx, hy) if isinstance(v, Variable) and v.index in body_vars
    }
    if not bound_head_vars:
        return len(pairs) >= floor and satisfiable(kg, body)

    count = 0
    for a, b in pairs:
        bind = {}
        if isinstance(hx, Variable) and hx.index in bound_head_vars:
            bind[hx.index] = a
        if isinstance(hy, Variable) and hy.index in bound_head_vars:
            if bind.get(hy.index, b) != b:
                continue
            bind[hy.index] = b
        if satisfiable(kg, body, bind):
            count += 1
            if count >= floor:
                return True
    return False


def _support_floor(config: MinerConfig, head_size: int) -> int:
    # ceil(min_head_coverage * head_size) relaxed by one to absorb float noise;
    # emission re-checks head coverage exactly
    hc_floor = max(0, math.ceil(config.min_head_coverage * head_size) - 1)
    return max(config.min_support, hc_floor)


def _metrics_from_counts(counts: RuleCounts, head_size: int, subject_functional: bool) -> RuleMetrics:
    denom = counts.pca_subject if subject_functional else counts.pca_object
    return RuleMetrics(
        support=counts.support,
        head_coverage=Fraction(counts.support, head_size),
        std_confidence=Fraction(counts.support, counts.predictions),
        pca_confidence=Fraction(counts.support, denom) if denom else Fraction(0),
        body_size=counts.body_size,
    )


def mine_rules(
    kg: KnowledgeGraph,
    config: MinerConfig | None = None,
    functab: FunctionalityTable | None = None,
    workers: int = 1,
) -> list[Rule]:
    """Mine closed Horn rules passing the configured thresholds.

    Output order is canonical rule text ascending; identical for serial and
    parallel runs and invariant under permutation of the input triples.
    """
    config = config or MinerConfig()
    if functab is None:
        functab = functionality(kg)
    relations = kg.present_relations()

    emitted: list[Rule] = []
    for head_rel in relations:
        head_size = kg.relation_size(head_rel)
        floor = _support_floor(config, head_size)
        if head_size < floor:
            continue
        head = Atom(head_rel, Variable(0), Variable(1))
        subject_functional = functab[head_rel].subject_functional

        frontier: list[tuple[Atom, ...]] = [()]
        seen: set = set()
        for depth in range(1, config.max_body_atoms + 1):
            closed_bodies: list[tuple[Atom, ...]] = []
            open_bodies: list[tuple[Atom, ...]] = []
            for body in frontier:
                for child in _expand(kg, body, head, config, relations):
                    if _is_closed_horn(child, head):
                        key = canonical_key(Rule(child, head))
                        if key in seen:
                            continue
                        seen.add(key)
                        closed_bodies.append(child)
                    elif depth < config.max_body_atoms and _closable(
                        child, head, config.max_body_atoms - len(child)
                    ):
                        key = ("open", canonical_key_open(child, head))
                        if key in seen:
                            continue
                        seen.add(key)
                        open_bodies.append(child)

            rules = [Rule(body, head) for body in closed_bodies]
            counts = _evaluate_many(kg, rules, config.allow_reflexive, workers)
            next_frontier: list[tuple[Atom, ...]] = []
            for rule, c in zip(rules, counts):
                if c.body_size > 0 and c.support >= floor and depth < config.max_body_atoms:
                    next_frontier.append(rule.body)
                if c.body_size == 0 or c.support < config.min_support:
                    continue
                metrics = _metrics_from_counts(c, head_size, subject_functional)
                if metrics.head_coverage < config.min_head_coverage:
                    continue
                if metrics.pca_confidence < config.min_pca_confidence:
                    continue
                emitted.append(canonicalize(rule.with_metrics(metrics)))

            for body in open_bodies:
                if _open_support_reaches(kg, body, head, floor):
                    next_frontier.append(body)
            frontier = next_frontier
            if not frontier:
                break

    emitted.sort(key=lambda r: format_rule(r, kg.relations, kg.entities))
    return emitted


def canonical_key_open(body: tuple[Atom, ...], head: Atom) -> tuple:
    """Structural key for partial (possibly non-Horn) rules during search."""
    best = None
    for perm in itertools.permutations(body):
        mapping: dict[int, int] = {}
        for atom in (*perm, head):
            for v in atom.variables():
                mapping.setdefault(v, len(mapping))

        def conv(term):
            return ("v", mapping[term.index]) if isinstance(term, Variable) else ("c", term.entity)

        key = tuple((a.relation, conv(a.arg1), conv(a.arg2)) for a in (*perm, head))
        if best is None or key < best:
            best = key
    return best


def _evaluate_many(
    kg: KnowledgeGraph, rules: Sequence[Rule], allow_reflexive: bool, workers: int
) -> list[RuleCounts]:
    if workers <= 1 or len(rules) < 2:
        return [rule_counts(kg, r, allow_reflexive) for r in rules]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda r: rule_counts(kg, r, allow_reflexive), rules))


# -- rules TSV ------------------------------------------------------------------


def _format_fraction(value: Fraction) -> str:
    return repr(float(value))


def write_rules(
    rules: Iterable[Rule],
    relations: Vocabulary,
    entities: Vocabulary | None,
    path: str | Path,
    header_lines: Sequence[str] = (),
) -> None:
    """One rule per line: text, support, head coverage, std and PCA confidence."""
    with open(path, "w", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        for rule in rules:
            m = rule.metrics
            if m is None:
                raise ParseError("cannot write a rule without metrics", source=str(path))
            fh.write(
                f"{format_rule(rule, relations, entities)}\t{m.support}\t"
                f"{_format_fraction(m.head_coverage)}\t{_format_fraction(m.std_confidence)}\t"
                f"{_format_fraction(m.pca_confidence)}\n"
            )


def read_rules(
    path: str | Path,
    relations: Vocabulary,
    entities: Vocabulary | None = None,
    grow_vocab: bool = True,
) -> list[Rule]:
    """Parse a rules TSV written by `write_rules`; `#` header lines are skipped."""
    rules = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 5:
                raise ParseError(
                    f"expected 5 tab-separated fields, got {len(fields)}",
                    source=str(path), line=lineno,
                )
            rule = parse_rule(fields[0], relations, entities, grow_vocab=grow_vocab)
            try:
                metrics = RuleMetrics(
                    support=int(fields[1]),
                    head_coverage=Fraction(fields[2]),
                    std_confidence=Fraction(fields[3]),
                    pca_confidence=Fraction(fields[4]),
                )
            except (ValueError, ZeroDivisionError) as exc:
                raise ParseError(f"bad metric field: {exc}", source=str(path), line=lineno) from exc
            rules.append(rule.with_metrics(metrics))
    return rules
