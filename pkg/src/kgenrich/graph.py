"""Dictionary-encoded triple store: loading, indexing, querying, functionality.

A knowledge graph is a deduplicated set of (head, relation, tail) id triples
over two vocabularies (entities, relations). Graphs are immutable after
construction and safe to share across workers; `merge` returns a new graph.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple

from .errors import DataError, ParseError, UndefinedMetricError, VocabularyError


class Triple(NamedTuple):
    head: int
    relation: int
    tail: int


class Vocabulary:
    """Bijective label <-> dense id map; ids are assigned in first-seen order."""

    def __init__(self, labels: Iterable[str] = ()):
        self._labels: list[str] = []
        self._ids: dict[str, int] = {}
        for label in labels:
            self.add(label)

    def add(self, label: str) -> int:
        """Return the id for `label`, assigning the next free id if unseen."""
        existing = self._ids.get(label)
        if existing is not None:
            return existing
        new_id = len(self._labels)
        self._labels.append(label)
        self._ids[label] = new_id
        return new_id

    def id(self, label: str) -> int:
        try:
            return self._ids[label]
        except KeyError:
            raise VocabularyError(f"unknown label: {label!r}") from None

    def label(self, ident: int) -> str:
        if not 0 <= ident < len(self._labels):
            raise VocabularyError(f"id {ident} out of range (size {len(self._labels)})")
        return self._labels[ident]

    def __contains__(self, label: str) -> bool:
        return label in self._ids

    def __len__(self) -> int:
        return len(self._labels)

    def __iter__(self) -> Iterator[str]:
        return iter(self._labels)

    def save(self, path: str | Path) -> None:
        """Write `id<TAB>label` lines."""
        with open(path, "w", encoding="utf-8") as fh:
            for ident, label in enumerate(self._labels):
                fh.write(f"{ident}\t{label}\n")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        vocab = cls()
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                fields = raw.rstrip("\r\n").split("\t")
                if len(fields) != 2:
                    raise ParseError(
                        f"expected 2 tab-separated fields, got {len(fields)}",
                        source=str(path), line=lineno,
                    )
                ident = vocab.add(fields[1])
                if str(ident) != fields[0]:
                    raise ParseError(
                        f"non-contiguous id {fields[0]!r} (expected {ident})",
                        source=str(path), line=lineno,
                    )
        return vocab


class KnowledgeGraph:
    """Immutable, fully indexed triple set.

    Indices kept in sync with the triple list by construction:
    relation -> (head, tail) pairs, (head, relation) -> tails,
    (relation, tail) -> heads, head -> outgoing triples, tail -> incoming.
    """

    def __init__(self, triples: Iterable[Triple], entities: Vocabulary, relations: Vocabulary):
        self.entities = entities
        self.relations = relations
        n_ent, n_rel = len(entities), len(relations)

        seen: set[Triple] = set()
        ordered: list[Triple] = []
        for t in triples:
            t = Triple(*t)
            if not (0 <= t.head < n_ent and 0 <= t.tail < n_ent and 0 <= t.relation < n_rel):
                raise VocabularyError(f"triple {t} outside vocabulary ({n_ent} entities, {n_rel} relations)")
            if t not in seen:
                seen.add(t)
                ordered.append(t)

        self._triples: tuple[Triple, ...] = tuple(ordered)
        self._triple_set: frozenset[Triple] = frozenset(seen)

        by_relation: dict[int, list[tuple[int, int]]] = {}
        tails_idx: dict[tuple[int, int], list[int]] = {}
        heads_idx: dict[tuple[int, int], list[int]] = {}
        outgoing: dict[int, list[Triple]] = {}
        incoming: dict[int, list[Triple]] = {}
        subjects: dict[int, set[int]] = {}
        objects: dict[int, set[int]] = {}
        for t in ordered:
            by_relation.setdefault(t.relation, []).append((t.head, t.tail))
            tails_idx.setdefault((t.head, t.relation), []).append(t.tail)
            heads_idx.setdefault((t.relation, t.tail), []).append(t.head)
            outgoing.setdefault(t.head, []).append(t)
            incoming.setdefault(t.tail, []).append(t)
            subjects.setdefault(t.relation, set()).add(t.head)
            objects.setdefault(t.relation, set()).add(t.tail)
        self._by_relation = by_relation
        self._tails = tails_idx
        self._heads = heads_idx
        self._outgoing = outgoing
        self._incoming = incoming
        self._subjects = subjects
        self._objects = objects
        self._adjacency_cache: dict = {}  # lazy per-relation sparse matrices

    # -- queries ------------------------------------------------------------

    def __len__(self) -> int:
        return len(self._triples)

    def __iter__(self) -> Iterator[Triple]:
        return iter(self._triples)

    def __contains__(self, triple: Triple) -> bool:
        return Triple(*triple) in self._triple_set

    @property
    def triples(self) -> tuple[Triple, ...]:
        return self._triples

    @property
    def num_entities(self) -> int:
        return len(self.entities)

    @property
    def num_relations(self) -> int:
        return len(self.relations)

    def contains(self, triple: Triple) -> bool:
        """Membership test; O(1) expected."""
        return Triple(*triple) in self._triple_set

    def relation_pairs(self, relation: int) -> list[tuple[int, int]]:
        """All (head, tail) pairs of `relation`, in insertion order."""
        return self._by_relation.get(relation, [])

    def relation_size(self, relation: int) -> int:
        return len(self._by_relation.get(relation, ()))

    def present_relations(self) -> list[int]:
        """Relations with at least one triple, ascending by id."""
        return sorted(self._by_relation)

    def tails(self, head: int, relation: int) -> list[int]:
        return self._tails.get((head, relation), [])

    def heads(self, relation: int, tail: int) -> list[int]:
        return self._heads.get((relation, tail), [])

    def outgoing(self, head: int) -> list[Triple]:
        return self._outgoing.get(head, [])

    def incoming(self, tail: int) -> list[Triple]:
        return self._incoming.get(tail, [])

    def subjects(self, relation: int) -> set[int]:
        """Distinct head entities of `relation`."""
        return self._subjects.get(relation, set())

    def objects(self, relation: int) -> set[int]:
        """Distinct tail entities of `relation`."""
        return self._objects.get(relation, set())

    # -- construction -------------------------------------------------------

    def merge(self, added: Iterable[Triple]) -> "KnowledgeGraph":
        """Union with `added`; duplicates collapse, this graph is unchanged."""
        extra = [Triple(*t) for t in added]
        return KnowledgeGraph(list(self._triples) + extra, self.entities, self.relations)

    def save(self, path: str | Path) -> None:
        """Write the triples as `head<TAB>relation<TAB>tail` label lines."""
        ent, rel = self.entities, self.relations
        with open(path, "w", encoding="utf-8") as fh:
            for h, r, t in self._triples:
                fh.write(f"{ent.label(h)}\t{rel.label(r)}\t{ent.label(t)}\n")


def merge(kg: KnowledgeGraph, added: Iterable[Triple]) -> KnowledgeGraph:
    """Functional alias for `KnowledgeGraph.merge`."""
    return kg.merge(added)


@dataclass(frozen=True)
class RelationFunctionality:
    fun: Fraction
    fun_inv: Fraction
    subject_functional: bool  # fun >= fun_inv (ties resolve to subject side)


class FunctionalityTable:
    """Per-relation functionality scores; relations with zero triples are absent."""

    def __init__(self, entries: dict[int, RelationFunctionality]):
        self._entries = dict(entries)

    def __contains__(self, relation: int) -> bool:
        return relation in self._entries

    def __getitem__(self, relation: int) -> RelationFunctionality:
        try:
            return self._entries[relation]
        except KeyError:
            raise UndefinedMetricError(
                f"relation {relation} has no triples; functionality undefined"
            ) from None

    def fun(self, relation: int) -> Fraction:
        return self[relation].fun

    def fun_inv(self, relation: int) -> Fraction:
        return self[relation].fun_inv

    def subject_functional(self, relation: int) -> bool:
        return self[relation].subject_functional

    def __len__(self) -> int:
        return len(self._entries)


def functionality(kg: KnowledgeGraph) -> FunctionalityTable:
    """Score each indexed relation: distinct subjects (objects) over pair count."""
    entries = {}
    for rel in kg.present_relations():
        pairs = kg.relation_size(rel)
        fun = Fraction(len(kg.subjects(rel)), pairs)
        fun_inv = Fraction(len(kg.objects(rel)), pairs)
        entries[rel] = RelationFunctionality(fun, fun_inv, fun >= fun_inv)
    return FunctionalityTable(entries)


# -- file formats -------------------------------------------------------------


def _parse_triple_lines(path: str | Path) -> Iterator[tuple[int, str, str, str]]:
    # leading "# ..." lines (no tabs) carry artifact metadata and are skipped
    in_header = True
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if in_header and line.startswith("#") and "\t" not in line:
                continue
            in_header = False
            fields = line.split("\t")
            if len(fields) != 3:
                raise ParseError(
                    f"expected 3 tab-separated fields, got {len(fields)}",
                    source=str(path), line=lineno,
                )
            yield lineno, fields[0], fields[1], fields[2]


def load_triples(
    path: str | Path,
    vocab: tuple[Vocabulary, Vocabulary] | None = None,
) -> KnowledgeGraph:
    """Load a `head<TAB>relation<TAB>tail` file into a deduplicated graph.

    With `vocab` given as (entities, relations), unseen labels raise
    VocabularyError (the mode used for valid/test files); otherwise fresh
    vocabularies are built in first-seen order.
    """
    if vocab is None:
        entities, relations = Vocabulary(), Vocabulary()
        fixed = False
    else:
        entities, relations = vocab
        fixed = True

    triples = []
    for lineno, h, r, t in _parse_triple_lines(path):
        if fixed:
            for label, voc, kind in ((h, entities, "entity"), (r, relations, "relation"), (t, entities, "entity")):
                if label not in voc:
                    raise VocabularyError(f"{path}:{lineno}: unknown {kind} label {label!r}")
            triples.append(Triple(entities.id(h), relations.id(r), entities.id(t)))
        else:
            triples.append(Triple(entities.add(h), relations.add(r), entities.add(t)))
    return KnowledgeGraph(triples, entities, relations)


@dataclass
class DatasetSplit:
    """Train graph plus held-out triple lists sharing one vocabulary."""

    train: KnowledgeGraph
    valid: list[Triple] = field(default_factory=list)
    test: list[Triple] = field(default_factory=list)

    @property
    def entities(self) -> Vocabulary:
        return self.train.entities

    @property
    def relations(self) -> Vocabulary:
        return self.train.relations

    def all_triples(self) -> list[Triple]:
        return list(self.train.triples) + self.valid + self.test

    def filter_graph(self) -> KnowledgeGraph:
        """Union of train/valid/test, used for filtered ranking."""
        return KnowledgeGraph(self.all_triples(), self.entities, self.relations)


def load_split(
    train_path: str | Path,
    valid_path: str | Path | None = None,
    test_path: str | Path | None = None,
    oov_policy: str = "drop",
) -> DatasetSplit:
    """Load train/valid/test files over one shared vocabulary.

    Ids are assigned in first-seen order over train, then valid, then test, so
    repeated runs are byte-reproducible. Held-out triples whose entity or
    relation never occurs in train violate the no-out-of-vocabulary-inference
    constraint; `oov_policy` decides their fate: "drop" removes them from the
    held-out list (their labels keep their ids), "move" appends them to the
    train graph, "error" raises DataError.
    """
    if oov_policy not in ("drop", "move", "error"):
        raise DataError(f"unknown oov_policy {oov_policy!r}")

    entities, relations = Vocabulary(), Vocabulary()

    def read(path) -> list[Triple]:
        out = []
        for _lineno, h, r, t in _parse_triple_lines(path):
            out.append(Triple(entities.add(h), relations.add(r), entities.add(t)))
        return out

    train_triples = read(train_path)
    valid_triples = read(valid_path) if valid_path else []
    test_triples = read(test_path) if test_path else []

    train_entities = {e for h, _, t in train_triples for e in (h, t)}
    train_relations = {r for _, r, _ in train_triples}

    def covered(t: Triple) -> bool:
        return t.head in train_entities and t.tail in train_entities and t.relation in train_relations

    kept: dict[str, list[Triple]] = {"valid": [], "test": []}
    moved: list[Triple] = []
    for name, part in (("valid", valid_triples), ("test", test_triples)):
        for t in part:
            if covered(t):
                kept[name].append(t)
            elif oov_policy == "error":
                raise DataError(
                    f"{name} triple {t} uses labels absent from train "
                    "(out-of-vocabulary inference is not supported)"
                )
            elif oov_policy == "move":
                moved.append(t)
                train_entities.update((t.head, t.tail))
                train_relations.add(t.relation)
            # "drop": skip; the labels keep their vocabulary ids

    train = KnowledgeGraph(train_triples + moved, entities, relations)
    split = DatasetSplit(train=train, valid=kept["valid"], test=kept["test"])
    _check_split_disjoint(split)
    return split


def _check_split_disjoint(split: DatasetSplit) -> None:
    train_set = frozenset(split.train.triples)
    valid_set = set(split.valid)
    for name, part in (("valid", split.valid), ("test", split.test)):
        for t in part:
            if t in train_set:
                raise DataError(f"{name} triple {t} also appears in train")
    for t in split.test:
        if t in valid_set:
            raise DataError(f"test triple {t} also appears in valid")


def save_triples(triples: Iterable[Triple], entities: Vocabulary, relations: Vocabulary, path: str | Path) -> None:
    """Write id triples as label TSV lines."""
    with open(path, "w", encoding="utf-8") as fh:
        for h, r, t in triples:
            fh.write(f"{entities.label(h)}\t{relations.label(r)}\t{entities.label(t)}\n")


def graph_stats(kg: KnowledgeGraph) -> dict[str, int]:
    return {
        "triples": len(kg),
        "entities": kg.num_entities,
        "relations": kg.num_relations,
    }


def write_stats(kg: KnowledgeGraph, path: str | Path) -> None:
    """Write the statistics report as key=value lines."""
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in graph_stats(kg).items():
            fh.write(f"{key}={value}\n")
