"""Translation/bilinear/rotation embedding models with margin-based training.

All three models score a triple as sigmoid(-residual_norm), so scores lie in
(0, 0.5] and higher means more plausible:

  translation  residual = h + r - t
  hadamard     residual = h * r * t        (norm of the element-wise product)
  rotation     residual = h o r - t        (complex h rotated by unit phases)

Rotation relation parameters are stored as phase angles, so each complex
component has modulus exactly 1 by construction. Training is plain SGD on the
margin ranking loss (rotation: the self-adversarial-free sigmoid loss with
uniform 1/n negative weighting); one analytic gradient implementation serves
both the optimizer and the finite-difference checks in the test suite.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, ContractError, DataError, NumericalError
from .graph import KnowledgeGraph, Triple

_TWO_PI = 2.0 * np.pi


class ModelKind(str, Enum):
    TRANSE = "transe"
    DISTMULT = "distmult"
    ROTATE = "rotate"


@dataclass(frozen=True)
class TrainingConfig:
    dim: int = 50
    learning_rate: float = 0.01
    epochs: int = 200
    margin: float = 1.0
    negatives_per_positive: int = 1
    batch_size: int = 1024
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigError("dim must be >= 1")
        if self.margin <= 0:
            raise ConfigError("margin must be > 0")
        if self.negatives_per_positive < 1:
            raise ConfigError("negatives_per_positive must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")


@dataclass
class ModelParams:
    """Entity/relation parameter tables.

    entities: (n_entities, dim) floats; rotation stores complex values as
    (n_entities, 2*dim) with real parts first. relations: (n_relations, dim);
    rotation stores phase angles in [0, 2*pi).
    """

    kind: ModelKind
    dim: int
    entities: np.ndarray
    relations: np.ndarray
    seed: int = 0

    @property
    def entity_count(self) -> int:
        return self.entities.shape[0]

    @property
    def relation_count(self) -> int:
        return self.relations.shape[0]

    def copy(self) -> "ModelParams":
        return replace(self, entities=self.entities.copy(), relations=self.relations.copy())


def init_model(kind: ModelKind, entity_count: int, relation_count: int, config: TrainingConfig) -> ModelParams:
    """Uniform init in [-6/sqrt(d), 6/sqrt(d)] (rotation phases in [0, 2*pi));
    bit-identical for equal seeds."""
    kind = ModelKind(kind)
    if entity_count < 1 or relation_count < 1:
        raise ConfigError("entity and relation counts must be >= 1")
    d = config.dim
    rng = np.random.default_rng(config.seed)
    bound = 6.0 / np.sqrt(d)
    ent_cols = 2 * d if kind is ModelKind.ROTATE else d
    entities = rng.uniform(-bound, bound, size=(entity_count, ent_cols))
    if kind is ModelKind.ROTATE:
        relations = rng.uniform(0.0, _TWO_PI, size=(relation_count, d))
    else:
        relations = rng.uniform(-bound, bound, size=(relation_count, d))
    return ModelParams(kind, d, entities, relations, seed=config.seed)


# -- scoring --------------------------------------------------------------------


def _split_complex(vectors: np.ndarray, d: int) -> tuple[np.ndarray, np.ndarray]:
    return vectors[..., :d], vectors[..., d:]


def _rotate_residual(params: ModelParams, h: np.ndarray, r: np.ndarray, t: np.ndarray):
    d = params.dim
    hre, him = _split_complex(params.entities[h], d)
    tre, tim = _split_complex(params.entities[t], d)
    theta = params.relations[r]
    cos, sin = np.cos(theta), np.sin(theta)
    rot_re = hre * cos - him * sin
    rot_im = hre * sin + him * cos
    return rot_re - tre, rot_im - tim, rot_re, rot_im, cos, sin


def residual_norms(params: ModelParams, h: np.ndarray, r: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Euclidean residual norm per triple (the argument of the sigmoid)."""
    h = np.asarray(h, dtype=np.intp)
    r = np.asarray(r, dtype=np.intp)
    t = np.asarray(t, dtype=np.intp)
    if params.kind is ModelKind.TRANSE:
        res = params.entities[h] + params.relations[r] - params.entities[t]
        return np.linalg.norm(res, axis=-1)
    if params.kind is ModelKind.DISTMULT:
        res = params.entities[h] * params.relations[r] * params.entities[t]
        return np.linalg.norm(res, axis=-1)
    p, q, *_ = _rotate_residual(params, h, r, t)
    return np.sqrt((p * p + q * q).sum(axis=-1))


def score_batch(params: ModelParams, h, r, t) -> np.ndarray:
    """sigmoid(-residual norm) per triple; values in (0, 0.5]."""
    norms = residual_norms(params, h, r, t)
    e = np.exp(-norms)
    return e / (1.0 + e)


def score(params: ModelParams, triple: Triple) -> float:
    h, r, t = triple
    return float(score_batch(params, np.array([h]), np.array([r]), np.array([t]))[0])


def score_all_heads(params: ModelParams, relation: int, tail: int) -> np.ndarray:
    """Scores of (e, relation, tail) for every entity e."""
    n = params.entity_count
    heads = np.arange(n, dtype=np.intp)
    return score_batch(params, heads, np.full(n, relation, dtype=np.intp), np.full(n, tail, dtype=np.intp))


def score_all_tails(params: ModelParams, head: int, relation: int) -> np.ndarray:
    """Scores of (head, relation, e) for every entity e."""
    n = params.entity_count
    tails = np.arange(n, dtype=np.intp)
    return score_batch(params, np.full(n, head, dtype=np.intp), np.full(n, relation, dtype=np.intp), tails)


# -- loss and gradients -----------------------------------------------------------

# A gradient contribution is (table, ids, rows): add `rows` into `table` at
# `ids` (repeated ids accumulate). One implementation feeds both SGD updates
# and the dense gradient assembly used by finite-difference checks.
_Contrib = tuple[str, np.ndarray, np.ndarray]


def _safe_div(num: np.ndarray, denom: np.ndarray) -> np.ndarray:
    safe = np.where(denom > 0, denom, 1.0)
    out = num / safe[..., None]
    out[denom == 0] = 0.0
    return out


def _norm_gradients(params: ModelParams, h, r, t, coeff: np.ndarray) -> list[_Contrib]:
    """Contributions of sum_i coeff[i] * residual_norm(triple_i) w.r.t. params."""
    h = np.asarray(h, dtype=np.intp)
    r = np.asarray(r, dtype=np.intp)
    t = np.asarray(t, dtype=np.intp)
    c = coeff[:, None]
    if params.kind is ModelKind.TRANSE:
        res = params.entities[h] + params.relations[r] - params.entities[t]
        norms = np.linalg.norm(res, axis=-1)
        direction = _safe_div(res, norms)
        g = c * direction
        return [("entity", h, g), ("entity", t, -g), ("relation", r, g)]
    if params.kind is ModelKind.DISTMULT:
        eh, rr, et = params.entities[h], params.relations[r], params.entities[t]
        res = eh * rr * et
        norms = np.linalg.norm(res, axis=-1)
        base = _safe_div(res, norms)
        return [
            ("entity", h, c * base * rr * et),
            ("entity", t, c * base * eh * rr),
            ("relation", r, c * base * eh * et),
        ]
    p, q, rot_re, rot_im, cos, sin = _rotate_residual(params, h, r, t)
    norms = np.sqrt((p * p + q * q).sum(axis=-1))
    ps = _safe_div(p, norms)
    qs = _safe_div(q, norms)
    g_hre = ps * cos + qs * sin
    g_him = -ps * sin + qs * cos
    g_theta = -ps * rot_im + qs * rot_re
    return [
        ("entity", h, c * np.concatenate([g_hre, g_him], axis=-1)),
        ("entity", t, c * np.concatenate([-ps, -qs], axis=-1)),
        ("relation", r, c * g_theta),
    ]


def _expit(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _batch_loss_and_contribs(
    params: ModelParams,
    pos: np.ndarray,
    neg: np.ndarray,
    margin: float,
) -> tuple[float, list[_Contrib]]:
    """Loss over aligned (positive, n-negative) groups plus gradient contributions."""
    n_pos = len(pos)
    if n_pos == 0:
        return 0.0, []
    if len(neg) % n_pos != 0:
        raise ContractError(f"{len(neg)} negatives do not align with {n_pos} positives")
    n = len(neg) // n_pos
    ph, pr, pt = pos[:, 0], pos[:, 1], pos[:, 2]
    nh, nr, nt = neg[:, 0], neg[:, 1], neg[:, 2]
    pn = residual_norms(params, ph, pr, pt)
    nn = residual_norms(params, nh, nr, nt)

    if params.kind is ModelKind.ROTATE:
        loss = float(np.logaddexp(0.0, pn - margin).sum() + np.logaddexp(0.0, margin - nn).sum() / n)
        pos_coeff = _expit(pn - margin)
        neg_coeff = -_expit(margin - nn) / n
    else:
        hinge = margin + np.repeat(pn, n) - nn
        active = hinge > 0
        loss = float(np.maximum(hinge, 0.0).sum())  # NaN propagates, unlike a masked sum
        pos_coeff = active.reshape(n_pos, n).sum(axis=1).astype(float)
        neg_coeff = -active.astype(float)

    contribs = _norm_gradients(params, ph, pr, pt, pos_coeff)
    contribs += _norm_gradients(params, nh, nr, nt, neg_coeff)
    return loss, contribs


def _as_id_array(triples: Iterable[Triple]) -> np.ndarray:
    arr = np.asarray(list(triples), dtype=np.intp)
    return arr.reshape(-1, 3) if arr.size else np.empty((0, 3), dtype=np.intp)


def loss_batch(
    params: ModelParams,
    positives: Sequence[Triple],
    negatives: Sequence[Triple],
    config: TrainingConfig,
) -> float:
    """Batch loss; negatives must align n-per-positive in order."""
    pos, neg = _as_id_array(positives), _as_id_array(negatives)
    if len(neg) != len(pos) * config.negatives_per_positive:
        raise ContractError(
            f"expected {config.negatives_per_positive} negatives per positive, "
            f"got {len(neg)} for {len(pos)} positives"
        )
    loss, _ = _batch_loss_and_contribs(params, pos, neg, config.margin)
    return loss


def loss_gradients(
    params: ModelParams,
    positives: Sequence[Triple],
    negatives: Sequence[Triple],
    config: TrainingConfig,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Loss plus dense gradients w.r.t. the full tables (for gradient checks)."""
    pos, neg = _as_id_array(positives), _as_id_array(negatives)
    loss, contribs = _batch_loss_and_contribs(params, pos, neg, config.margin)
    grad_e = np.zeros_like(params.entities)
    grad_r = np.zeros_like(params.relations)
    for table, ids, rows in contribs:
        np.add.at(grad_e if table == "entity" else grad_r, ids, rows)
    return loss, grad_e, grad_r


# -- negative sampling ------------------------------------------------------------


def negative_sample(kg: KnowledgeGraph, positive: Triple, rng: np.random.Generator) -> Triple:
    """Corrupt head or tail (fair coin) with a uniform entity, resampling while
    the corrupted triple is already in the graph; accept after 100 attempts."""
    if kg.num_entities < 2:
        raise ContractError("negative sampling needs at least 2 entities")
    h, r, t = positive
    corrupt_head = bool(rng.random() < 0.5)
    original = h if corrupt_head else t
    fallback = None
    for _ in range(100):
        e = int(rng.integers(kg.num_entities))
        if e == original:
            continue  # identical to the positive, which is in the graph anyway
        candidate = Triple(e, r, t) if corrupt_head else Triple(h, r, e)
        if not kg.contains(candidate):
            return candidate
        fallback = candidate
    if fallback is not None:
        return fallback
    e = (original + 1) % kg.num_entities
    return Triple(e, r, t) if corrupt_head else Triple(h, r, e)


def _corrupt_batch(kg: KnowledgeGraph, batch: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    out = np.empty((len(batch) * n, 3), dtype=np.intp)
    i = 0
    for row in batch:
        positive = Triple(int(row[0]), int(row[1]), int(row[2]))
        for _ in range(n):
            out[i] = negative_sample(kg, positive, rng)
            i += 1
    return out


# -- training ----------------------------------------------------------------------


def train(
    params: ModelParams,
    kg_train: KnowledgeGraph,
    config: TrainingConfig,
) -> tuple[ModelParams, list[float]]:
    """SGD over shuffled mini-batches; returns updated params and per-epoch loss.

    The input params are left untouched. All randomness (shuffling, corruption)
    comes from config.seed, so single-worker runs are bit-reproducible.
    """
    if len(kg_train) == 0:
        raise ContractError("cannot train on an empty graph")
    if params.entity_count < kg_train.num_entities or params.relation_count < kg_train.num_relations:
        raise ContractError("parameter tables are smaller than the graph vocabulary")
    work = params.copy()
    work.seed = config.seed
    rng = np.random.default_rng(config.seed)
    triples = _as_id_array(kg_train.triples)
    n_triples = len(triples)
    lr = config.learning_rate
    rotate = params.kind is ModelKind.ROTATE

    trace: list[float] = []
    for epoch in range(config.epochs):
        order = rng.permutation(n_triples)
        epoch_loss = 0.0
        for start in range(0, n_triples, config.batch_size):
            pos = triples[order[start:start + config.batch_size]]
            neg = _corrupt_batch(kg_train, pos, config.negatives_per_positive, rng)
            loss, contribs = _batch_loss_and_contribs(work, pos, neg, config.margin)
            if not np.isfinite(loss):
                raise NumericalError(
                    f"{params.kind.value}: non-finite loss at epoch {epoch + 1}, "
                    f"batch offset {start} (lr={lr}, margin={config.margin})"
                )
            for table, ids, rows in contribs:
                target = work.entities if table == "entity" else work.relations
                np.subtract.at(target, ids, lr * rows)
            if rotate:
                np.mod(work.relations, _TWO_PI, out=work.relations)
            epoch_loss += loss
        if not np.isfinite(epoch_loss):
            raise NumericalError(f"{params.kind.value}: non-finite epoch loss at epoch {epoch + 1}")
        trace.append(epoch_loss)
    return work, trace


# -- checkpoint format ---------------------------------------------------------------

_MAGIC = b"KGEMBED1"
_VERSION = 1
_KIND_CODES = {ModelKind.TRANSE: 0, ModelKind.DISTMULT: 1, ModelKind.ROTATE: 2}
_HEADER = struct.Struct("<8sIIIQQQ")


def save_model(params: ModelParams, path: str | Path) -> None:
    """Binary checkpoint: magic, version, kind, dim, counts, seed, little-endian
    float64 tables, trailing SHA-256 over everything before it."""
    header = _HEADER.pack(
        _MAGIC, _VERSION, _KIND_CODES[params.kind], params.dim,
        params.entity_count, params.relation_count, params.seed,
    )
    ent = np.ascontiguousarray(params.entities, dtype="<f8").tobytes()
    rel = np.ascontiguousarray(params.relations, dtype="<f8").tobytes()
    digest = hashlib.sha256(header + ent + rel).digest()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(ent)
        fh.write(rel)
        fh.write(digest)


def load_model(
    path: str | Path,
    expect_kind: ModelKind | None = None,
    expect_counts: tuple[int, int] | None = None,
) -> ModelParams:
    """Load and validate a checkpoint; header/checksum mismatches raise DataError."""
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size + 32:
        raise DataError(f"{path}: truncated model file")
    header, payload, digest = blob[:_HEADER.size], blob[_HEADER.size:-32], blob[-32:]
    magic, version, kind_code, dim, n_ent, n_rel, seed = _HEADER.unpack(header)
    if magic != _MAGIC:
        raise DataError(f"{path}: not a model checkpoint (bad magic)")
    if version != _VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    codes = {v: k for k, v in _KIND_CODES.items()}
    if kind_code not in codes:
        raise DataError(f"{path}: unknown model kind code {kind_code}")
    kind = codes[kind_code]
    if hashlib.sha256(header + payload).digest() != digest:
        raise DataError(f"{path}: checksum mismatch, file is corrupt")
    ent_cols = 2 * dim if kind is ModelKind.ROTATE else dim
    expected = (n_ent * ent_cols + n_rel * dim) * 8
    if len(payload) != expected:
        raise DataError(f"{path}: payload size {len(payload)} != expected {expected}")
    if expect_kind is not None and kind is not ModelKind(expect_kind):
        raise DataError(f"{path}: checkpoint holds a {kind.value} model, expected {ModelKind(expect_kind).value}")
    if expect_counts is not None and (n_ent, n_rel) != tuple(expect_counts):
        raise DataError(
            f"{path}: checkpoint sized for {n_ent} entities / {n_rel} relations, "
            f"expected {expect_counts[0]} / {expect_counts[1]}"
        )
    flat = np.frombuffer(payload, dtype="<f8")
    entities = flat[: n_ent * ent_cols].reshape(n_ent, ent_cols).copy()
    relations = flat[n_ent * ent_cols:].reshape(n_rel, dim).copy()
    return ModelParams(kind, dim, entities, relations, seed=seed)


def write_loss_trace(trace: Sequence[float], path: str | Path, header_lines: Sequence[str] = ()) -> None:
    """Per-epoch loss as `epoch,loss` CSV (1-based epochs)."""
    with open(path, "w", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("epoch,loss\n")
        for epoch, loss in enumerate(trace, start=1):
            fh.write(f"{epoch},{loss!r}\n")
