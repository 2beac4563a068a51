"""Rule quality metrics: support, head coverage, CWA and PCA confidence.

Counting semantics
------------------
A grounding of a rule is an assignment of all its variables whose body atoms
are all graph facts. A prediction is the distinct instantiated head fact of a
grounding; duplicate body derivations of one head count once.

  body_size       distinct groundings (instantiated body/head pairs)
  predictions     distinct instantiated heads
  support         predictions that are graph facts
  std_confidence  support / predictions        (absent facts are false)
  pca_confidence  support / predictions whose subject already has some fact
                  of the head relation (object side when the head relation is
                  closer to inverse-functional)

Groundings that bind two different variables to one entity are kept, except
when that makes a body atom (other than a literal copy of the head pattern)
instantiate to exactly the predicted head fact; such vacuous groundings are
dropped. `allow_reflexive=False` drops every entity-sharing grounding.

Three evaluation engines share these semantics: a backtracking-join engine
for arbitrary rules, and dense/sparse adjacency-matrix engines for the
constant-free rules with at most two body atoms that the miner emits.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import sparse

from ..errors import UndefinedMetricError
from ..graph import FunctionalityTable, KnowledgeGraph, Triple, functionality
from .atoms import Atom, Constant, Rule, RuleMetrics, Term, Variable
from .query import groundings

_DENSE_ENTITY_LIMIT = 512
_BLOCK_NNZ_LIMIT = 4_000_000


@dataclass(frozen=True)
class RuleCounts:
    body_size: int
    predictions: int
    support: int
    pca_subject: int  # predictions with an already-known subject
    pca_object: int   # predictions with an already-known object


# -- public operations ---------------------------------------------------------


def rule_counts(kg: KnowledgeGraph, rule: Rule, allow_reflexive: bool = True) -> RuleCounts:
    """Grounding/prediction counts for `rule` on `kg` (engine auto-selected)."""
    if _fast_applicable(rule):
        return _counts_fast(kg, rule, allow_reflexive)
    return _counts_general(kg, rule, allow_reflexive)


def support(kg: KnowledgeGraph, rule: Rule, allow_reflexive: bool = True) -> int:
    """Number of true predictions (distinct instantiated heads found in `kg`)."""
    return rule_counts(kg, rule, allow_reflexive).support


def std_confidence(kg: KnowledgeGraph, rule: Rule, allow_reflexive: bool = True) -> Fraction:
    """CWA confidence: support over all distinct predictions."""
    counts = rule_counts(kg, rule, allow_reflexive)
    if counts.body_size == 0:
        raise UndefinedMetricError("rule body has no groundings; confidence undefined")
    return Fraction(counts.support, counts.predictions)


def pca_confidence(
    kg: KnowledgeGraph,
    functab: FunctionalityTable,
    rule: Rule,
    allow_reflexive: bool = True,
) -> Fraction:
    """PCA confidence; counter-examples need a witness fact on the functional side."""
    counts = rule_counts(kg, rule, allow_reflexive)
    if counts.body_size == 0:
        raise UndefinedMetricError("rule body has no groundings; confidence undefined")
    denom = counts.pca_subject if functab[rule.head.relation].subject_functional else counts.pca_object
    if denom == 0:
        return Fraction(0)  # no prediction touches a known subject/object, so support is 0
    return Fraction(counts.support, denom)


def head_coverage(kg: KnowledgeGraph, rule: Rule, allow_reflexive: bool = True) -> Fraction:
    """Support normalized by the size of the head relation."""
    head_size = kg.relation_size(rule.head.relation)
    if head_size == 0:
        raise UndefinedMetricError("head relation has no triples; head coverage undefined")
    return Fraction(support(kg, rule, allow_reflexive), head_size)


def rule_metrics(
    kg: KnowledgeGraph,
    rule: Rule,
    functab: FunctionalityTable | None = None,
    allow_reflexive: bool = True,
) -> RuleMetrics:
    """All metrics in one evaluation pass; raises if the body has no groundings."""
    counts = rule_counts(kg, rule, allow_reflexive)
    if counts.body_size == 0:
        raise UndefinedMetricError("rule body has no groundings; confidence undefined")
    if functab is None:
        functab = _cached_functionality(kg)
    head_size = kg.relation_size(rule.head.relation)
    if head_size == 0:
        raise UndefinedMetricError("head relation has no triples; head coverage undefined")
    denom = counts.pca_subject if functab[rule.head.relation].subject_functional else counts.pca_object
    pca = Fraction(counts.support, denom) if denom else Fraction(0)
    return RuleMetrics(
        support=counts.support,
        head_coverage=Fraction(counts.support, head_size),
        std_confidence=Fraction(counts.support, counts.predictions),
        pca_confidence=pca,
        body_size=counts.body_size,
    )


# -- general engine (backtracking join) -----------------------------------------


def _term_value(term: Term, binding: dict[int, int]) -> int:
    return term.entity if isinstance(term, Constant) else binding[term.index]


def _counts_general(kg: KnowledgeGraph, rule: Rule, allow_reflexive: bool) -> RuleCounts:
    head = rule.head
    hrel = head.relation
    variables = rule.variables()
    collision_atoms = [a for a in rule.body if a != head and a.relation == hrel]

    body_size = 0
    predictions: set[tuple[int, int]] = set()
    for binding in groundings(kg, rule.body):
        values = [binding[v] for v in variables]
        if not allow_reflexive and len(set(values)) < len(values):
            continue
        fact = (_term_value(head.arg1, binding), _term_value(head.arg2, binding))
        if any(
            (_term_value(a.arg1, binding), _term_value(a.arg2, binding)) == fact
            for a in collision_atoms
        ):
            continue
        body_size += 1
        predictions.add(fact)

    subjects = kg.subjects(hrel)
    objects = kg.objects(hrel)
    sup = sum(1 for (s, o) in predictions if kg.contains(Triple(s, hrel, o)))
    pca_s = sum(1 for (s, _o) in predictions if s in subjects)
    pca_o = sum(1 for (_s, o) in predictions if o in objects)
    return RuleCounts(body_size, len(predictions), sup, pca_s, pca_o)


# -- matrix engines --------------------------------------------------------------


def _fast_applicable(rule: Rule) -> bool:
    atoms = (*rule.body, rule.head)
    if len(rule.body) > 2:
        return False
    for atom in atoms:
        if isinstance(atom.arg1, Constant) or isinstance(atom.arg2, Constant):
            return False
        if atom.arg1 == atom.arg2:
            return False
    return len(set(rule.head.variables())) == 2


def _cached_functionality(kg: KnowledgeGraph) -> FunctionalityTable:
    cache = kg._adjacency_cache
    if "functab" not in cache:
        cache["functab"] = functionality(kg)
    return cache["functab"]


def _dense_matrix(kg: KnowledgeGraph, rel: int) -> np.ndarray:
    cache = kg._adjacency_cache
    key = ("dense", rel)
    if key not in cache:
        n = kg.num_entities
        mat = np.zeros((n, n), dtype=np.int64)
        pairs = kg.relation_pairs(rel)
        if pairs:
            arr = np.asarray(pairs, dtype=np.intp)
            mat[arr[:, 0], arr[:, 1]] = 1
        cache[key] = mat
    return cache[key]


def _sparse_matrix(kg: KnowledgeGraph, rel: int) -> sparse.csr_matrix:
    cache = kg._adjacency_cache
    key = ("sparse", rel)
    if key not in cache:
        n = kg.num_entities
        pairs = kg.relation_pairs(rel)
        if pairs:
            arr = np.asarray(pairs, dtype=np.intp)
            data = np.ones(len(arr), dtype=np.int64)
            mat = sparse.csr_matrix((data, (arr[:, 0], arr[:, 1])), shape=(n, n))
        else:
            mat = sparse.csr_matrix((n, n), dtype=np.int64)
        cache[key] = mat
    return cache[key]


def _entity_masks(kg: KnowledgeGraph, rel: int) -> tuple[np.ndarray, np.ndarray]:
    cache = kg._adjacency_cache
    key = ("masks", rel)
    if key not in cache:
        n = kg.num_entities
        subj = np.zeros(n, dtype=bool)
        obj = np.zeros(n, dtype=bool)
        subj[list(kg.subjects(rel))] = True
        obj[list(kg.objects(rel))] = True
        cache[key] = (subj, obj)
    return cache[key]


def _counts_fast(kg: KnowledgeGraph, rule: Rule, allow_reflexive: bool) -> RuleCounts:
    if kg.num_entities <= _DENSE_ENTITY_LIMIT:
        return _counts_dense(kg, rule, allow_reflexive)
    return _counts_sparse(kg, rule, allow_reflexive)


def _classify_body(rule: Rule) -> tuple[int, int, int | None, list[Atom], list[Atom]]:
    """Split body atoms by variable set; returns (hx, hy, z, atoms_on_head_vars,
    path_atoms) where path atoms connect a head variable to the fresh one."""
    hx = rule.head.arg1.index
    hy = rule.head.arg2.index
    head_vars = {hx, hy}
    on_head: list[Atom] = []
    path: list[Atom] = []
    z: int | None = None
    for atom in dict.fromkeys(rule.body):
        avars = set(atom.variables())
        if avars <= head_vars:
            on_head.append(atom)
        else:
            fresh = (avars - head_vars).pop()
            if z is None:
                z = fresh
            path.append(atom)
    return hx, hy, z, on_head, path


def _counts_dense(kg: KnowledgeGraph, rule: Rule, allow_reflexive: bool) -> RuleCounts:
    hx, hy, z, on_head, path = _classify_body(rule)
    hrel = rule.head.relation
    a_head = _dense_matrix(kg, hrel)
    subj_mask, obj_mask = _entity_masks(kg, hrel)

    def oriented(atom: Atom, first_var: int) -> np.ndarray:
        mat = _dense_matrix(kg, atom.relation)
        return mat if atom.arg1.index == first_var else mat.T

    if not path:
        # every body atom is on the head variables
        mats = [oriented(a, hx) for a in on_head]
        grounding = mats[0].copy()
        for mat in mats[1:]:
            grounding = grounding * mat
        drop_diagonal = not allow_reflexive or any(
            a.relation == hrel and (a.arg1.index, a.arg2.index) == (hy, hx) for a in on_head
        )
        if drop_diagonal:
            np.fill_diagonal(grounding, 0)
    else:
        atom_x = next(a for a in path if hx in a.variables())
        atom_y = next(a for a in path if a is not atom_x)
        b1 = oriented(atom_x, hx)            # head-subject -> fresh variable
        b2 = oriented(atom_y, z)             # fresh variable -> head-object
        grounding = b1 @ b2
        d1 = np.diagonal(b1).copy()
        d2 = np.diagonal(b2).copy()
        overlap = d1 * d2                    # groundings binding everything to one entity
        if allow_reflexive:
            excl = np.zeros_like(grounding)
            hits = 0
            if atom_x.relation == hrel:
                hits += 1
                if atom_x.arg1.index == hx:  # pattern hrel(x, z): collide when z = object
                    excl += b1 * d2[None, :]
                else:                        # pattern hrel(z, x): collide only on the diagonal
                    excl += np.diag(overlap)
            if atom_y.relation == hrel:
                hits += 1
                if atom_y.arg1.index == z:   # pattern hrel(z, y): collide when z = subject
                    excl += d1[:, None] * b2
                else:                        # pattern hrel(y, z): diagonal only
                    excl += np.diag(overlap)
            if hits == 2:
                excl -= np.diag(overlap)
            grounding = grounding - excl
        else:
            grounding = grounding - b1 * d2[None, :] - d1[:, None] * b2 + np.diag(overlap)
            np.fill_diagonal(grounding, 0)

    predicted = grounding > 0
    return RuleCounts(
        body_size=int(grounding.sum()),
        predictions=int(predicted.sum()),
        support=int((predicted & (a_head > 0)).sum()),
        pca_subject=int(predicted[subj_mask].sum()),
        pca_object=int(predicted[:, obj_mask].sum()),
    )


def _offset_diag(values: np.ndarray, n: int, row_start: int) -> sparse.csr_matrix:
    """len(values) x n matrix with values[i] at (i, row_start + i)."""
    rows = len(values)
    idx = np.arange(rows)
    keep = values != 0
    return sparse.csr_matrix(
        (values[keep], (idx[keep], row_start + idx[keep])), shape=(rows, n)
    )


def _block_bounds(row_cost: np.ndarray, limit: int) -> list[tuple[int, int]]:
    """Contiguous row ranges whose summed cost stays within `limit` each
    (single rows may exceed it)."""
    n = len(row_cost)
    cum = np.concatenate(([0], np.cumsum(row_cost, dtype=np.int64)))
    bounds = []
    start = 0
    while start < n:
        end = int(np.searchsorted(cum, cum[start] + limit, side="right")) - 1
        end = max(end, start + 1)
        bounds.append((start, min(end, n)))
        start = min(end, n)
    return bounds


def _counts_sparse(kg: KnowledgeGraph, rule: Rule, allow_reflexive: bool) -> RuleCounts:
    hx, hy, z, on_head, path = _classify_body(rule)
    hrel = rule.head.relation
    a_head = _sparse_matrix(kg, hrel)
    subj_mask, obj_mask = _entity_masks(kg, hrel)
    n = kg.num_entities

    def oriented(atom: Atom, first_var: int) -> sparse.csr_matrix:
        mat = _sparse_matrix(kg, atom.relation)
        return mat if atom.arg1.index == first_var else mat.T.tocsr()

    def block_iter():
        if not path:
            mats = [oriented(a, hx) for a in on_head]
            grounding = mats[0].copy()
            for mat in mats[1:]:
                grounding = grounding.multiply(mat).tocsr()
            drop_diagonal = not allow_reflexive or any(
                a.relation == hrel and (a.arg1.index, a.arg2.index) == (hy, hx) for a in on_head
            )
            if drop_diagonal:
                grounding = (grounding - _offset_diag(grounding.diagonal(), n, 0)).tocsr()
            yield 0, grounding
            return

        atom_x = next(a for a in path if hx in a.variables())
        atom_y = next(a for a in path if a is not atom_x)
        b1 = oriented(atom_x, hx)
        b2 = oriented(atom_y, z)
        d1 = b1.diagonal()
        d2 = b2.diagonal()
        overlap = d1 * d2

        # group rows so each product block stays below the nnz budget
        row_cost = b1 @ np.diff(b2.indptr).astype(np.int64)
        for start, end in _block_bounds(row_cost, _BLOCK_NNZ_LIMIT):
            b1_blk = b1[start:end]
            grounding = (b1_blk @ b2).tocsr()
            if allow_reflexive:
                hits = 0
                excl = None
                if atom_x.relation == hrel:
                    hits += 1
                    if atom_x.arg1.index == hx:
                        excl = b1_blk.multiply(d2[None, :]).tocsr()
                    else:
                        excl = _offset_diag(overlap[start:end], n, start)
                if atom_y.relation == hrel:
                    hits += 1
                    part = (
                        b2[start:end].multiply(d1[start:end, None]).tocsr()
                        if atom_y.arg1.index == z
                        else _offset_diag(overlap[start:end], n, start)
                    )
                    excl = part if excl is None else (excl + part).tocsr()
                if hits == 2:
                    excl = (excl - _offset_diag(overlap[start:end], n, start)).tocsr()
                if excl is not None:
                    grounding = (grounding - excl).tocsr()
            else:
                grounding = (
                    grounding
                    - b1_blk.multiply(d2[None, :])
                    - b2[start:end].multiply(d1[start:end, None])
                    + _offset_diag(overlap[start:end], n, start)
                ).tocsr()
                grounding = (grounding - _offset_diag(grounding.diagonal(k=start), n, start)).tocsr()
            yield start, grounding

    body_size = predictions = sup = pca_s = pca_o = 0
    for row_start, block in block_iter():
        block.eliminate_zeros()
        rows = block.shape[0]
        body_size += int(block.sum())
        ones = sparse.csr_matrix(
            (np.ones(block.nnz, dtype=np.int64), block.indices.copy(), block.indptr.copy()),
            shape=block.shape,
        )
        predictions += ones.nnz
        sup += int(ones.multiply(a_head[row_start:row_start + rows]).nnz)
        row_ids = np.repeat(np.arange(rows), np.diff(ones.indptr))
        pca_s += int(subj_mask[row_start + row_ids].sum())
        pca_o += int(obj_mask[ones.indices].sum())
    return RuleCounts(body_size, predictions, sup, pca_s, pca_o)
