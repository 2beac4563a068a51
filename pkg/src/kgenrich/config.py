"""Pipeline configuration: key=value files, flag overrides, seeds, hashing.

One global seed drives every stage through named derivations, so each stage
is independently reproducible. The configuration hash covers the effective
key=value serialization and is embedded in every artifact header line.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from pathlib import Path

from .enrich import EnrichmentConfig
from .errors import ConfigError, ParseError
from .models import ModelKind, TrainingConfig
from .ranking import RankingMode
from .rules.atoms import MinerConfig


def derive_seed(seed: int, stage: str) -> int:
    """Stable per-stage seed derived from the global seed and a stage tag."""
    digest = hashlib.sha256(f"{seed}:{stage}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


_BOOL_VALUES = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def _parse_bool(value: str, key: str) -> bool:
    try:
        return _BOOL_VALUES[value.strip().lower()]
    except KeyError:
        raise ConfigError(f"{key}: expected a boolean, got {value!r}") from None


@dataclass(frozen=True)
class PipelineConfig:
    train_path: str = ""
    valid_path: str = ""
    test_path: str = ""
    out_dir: str = "out"
    model: ModelKind = ModelKind.TRANSE
    seed: int = 42
    workers: int = 1
    oov_policy: str = "drop"
    ranking_mode: RankingMode = RankingMode.RAW
    # embedding training
    dim: int = 50
    learning_rate: float = 0.01
    epochs: int = 200
    margin: float = 1.0
    negatives_per_positive: int = 1
    batch_size: int = 1024
    # enrichment
    target_relations: tuple[str, ...] = ()  # labels, resolved against the vocabulary
    sample_entities: int = 1000
    sample_relations: int = 10
    top_k: int = 50
    # rule mining
    max_body_atoms: int = 2
    min_support: int = 10
    min_head_coverage: float = 0.01
    min_pca_confidence: float = 0.1
    allow_constants: bool = False
    allow_reflexive: bool = True

    def training_config(self) -> TrainingConfig:
        return TrainingConfig(
            dim=self.dim,
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            margin=self.margin,
            negatives_per_positive=self.negatives_per_positive,
            batch_size=self.batch_size,
            seed=derive_seed(self.seed, "train"),
        )

    def enrichment_config(self, target_relation_ids: tuple[int, ...] = ()) -> EnrichmentConfig:
        return EnrichmentConfig(
            target_relations=target_relation_ids,
            sample_entities=self.sample_entities,
            sample_relations=self.sample_relations,
            top_k=self.top_k,
            seed=derive_seed(self.seed, "enrich"),
        )

    def miner_config(self) -> MinerConfig:
        return MinerConfig(
            max_body_atoms=self.max_body_atoms,
            min_support=self.min_support,
            min_head_coverage=self.min_head_coverage,
            min_pca_confidence=self.min_pca_confidence,
            allow_constants=self.allow_constants,
            allow_reflexive=self.allow_reflexive,
        )

    def to_lines(self) -> list[str]:
        """Effective configuration as sorted key=value lines."""
        items = {
            "train": self.train_path,
            "valid": self.valid_path,
            "test": self.test_path,
            "out_dir": self.out_dir,
            "model": self.model.value,
            "seed": str(self.seed),
            "workers": str(self.workers),
            "oov_policy": self.oov_policy,
            "ranking_mode": self.ranking_mode.value,
            "dim": str(self.dim),
            "learning_rate": repr(self.learning_rate),
            "epochs": str(self.epochs),
            "margin": repr(self.margin),
            "negatives_per_positive": str(self.negatives_per_positive),
            "batch_size": str(self.batch_size),
            "target_relations": ",".join(self.target_relations),
            "sample_entities": str(self.sample_entities),
            "sample_relations": str(self.sample_relations),
            "top_k": str(self.top_k),
            "max_body_atoms": str(self.max_body_atoms),
            "min_support": str(self.min_support),
            "min_head_coverage": repr(self.min_head_coverage),
            "min_pca_confidence": repr(self.min_pca_confidence),
            "allow_constants": str(self.allow_constants).lower(),
            "allow_reflexive": str(self.allow_reflexive).lower(),
        }
        return [f"{k}={v}" for k, v in sorted(items.items())]

    def config_hash(self) -> str:
        """Hash of the semantic configuration; where artifacts land (out_dir)
        and how many workers computed them do not change their content."""
        lines = [l for l in self.to_lines() if not l.startswith(("out_dir=", "workers="))]
        digest = hashlib.sha256("\n".join(lines).encode()).hexdigest()
        return digest[:12]


_SETTERS = {
    "train": ("train_path", str),
    "valid": ("valid_path", str),
    "test": ("test_path", str),
    "out_dir": ("out_dir", str),
    "model": ("model", lambda v: ModelKind(v.lower())),
    "seed": ("seed", int),
    "workers": ("workers", int),
    "oov_policy": ("oov_policy", str),
    "ranking_mode": ("ranking_mode", lambda v: RankingMode(v.lower())),
    "dim": ("dim", int),
    "learning_rate": ("learning_rate", float),
    "epochs": ("epochs", int),
    "margin": ("margin", float),
    "negatives_per_positive": ("negatives_per_positive", int),
    "batch_size": ("batch_size", int),
    "target_relations": ("target_relations", lambda v: tuple(s for s in v.split(",") if s)),
    "sample_entities": ("sample_entities", int),
    "sample_relations": ("sample_relations", int),
    "top_k": ("top_k", int),
    "max_body_atoms": ("max_body_atoms", int),
    "min_support": ("min_support", int),
    "min_head_coverage": ("min_head_coverage", float),
    "min_pca_confidence": ("min_pca_confidence", float),
    "allow_constants": ("allow_constants", None),  # bool, handled below
    "allow_reflexive": ("allow_reflexive", None),
}


def apply_setting(config: PipelineConfig, key: str, value: str) -> PipelineConfig:
    """Return a config with one key overridden from its textual form."""
    key = key.strip()
    if key not in _SETTERS:
        raise ConfigError(f"unknown configuration key {key!r}")
    attr, conv = _SETTERS[key]
    try:
        parsed = _parse_bool(value, key) if conv is None else conv(value.strip())
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"{key}: cannot parse {value!r}: {exc}") from exc
    return replace(config, **{attr: parsed})


def load_config_file(path: str | Path, base: PipelineConfig | None = None) -> PipelineConfig:
    """Line-oriented `key=value` file; blank lines and `#` comments allowed."""
    config = base or PipelineConfig()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError("expected key=value", source=str(path), line=lineno)
            key, _, value = line.partition("=")
            try:
                config = apply_setting(config, key, value)
            except ConfigError as exc:
                raise ParseError(str(exc), source=str(path), line=lineno) from exc
    return config
