"""End-to-end pipeline: train, enrich, mine both graphs, diff, evaluate.

Stages run sequentially and write their artifacts as soon as they finish, so
a failing stage leaves earlier artifacts intact and aborts with the stage
name. Every output file starts with a `# config_hash=...` header line; reruns
with the same configuration and seed are byte-identical (workers=1).
"""

from __future__ import annotations

import json
import logging
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .config import PipelineConfig
from .diff import diff_rules, summarize_confidence, write_diff_summary
from .enrich import enrich, write_manifest
from .errors import ConfigError, PipelineError, VocabularyError
from .graph import DatasetSplit, load_split, save_triples
from .models import init_model, load_model, save_model, train, write_loss_trace
from .ranking import evaluate_embeddings, evaluate_rules, write_report
from .rules.mining import mine_rules, write_rules

logger = logging.getLogger(__name__)


@contextmanager
def _stage(name: str, timings: list[dict]):
    logger.info("stage %s: start", name)
    started = time.monotonic()
    try:
        yield
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(name, exc) from exc
    elapsed = time.monotonic() - started
    timings.append({"stage": name, "seconds": round(elapsed, 3)})
    logger.info("stage %s: done in %.2fs", name, elapsed)


def _resolve_target_relations(config: PipelineConfig, split: DatasetSplit) -> tuple[int, ...]:
    ids = []
    for label in config.target_relations:
        if label not in split.relations:
            raise VocabularyError(f"target relation {label!r} not in the graph vocabulary")
        ids.append(split.relations.id(label))
    return tuple(ids)


def run_pipeline(config: PipelineConfig, resume: bool = False) -> dict:
    """Execute the full pipeline; returns the run manifest (also written to disk)."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    chash = config.config_hash()
    header = [f"config_hash={chash}"]
    timings: list[dict] = []

    (out / "config.txt").write_text(
        "\n".join([f"# config_hash={chash}", *config.to_lines()]) + "\n", encoding="utf-8"
    )

    with _stage("load", timings):
        split = load_split(
            config.train_path, config.valid_path or None, config.test_path or None,
            oov_policy=config.oov_policy,
        )
        target_ids = _resolve_target_relations(config, split)

    with _stage("train", timings):
        training = config.training_config()
        model_path = out / "model.bin"
        params = None
        if resume and model_path.exists():
            try:
                params = load_model(
                    model_path,
                    expect_kind=config.model,
                    expect_counts=(split.train.num_entities, split.train.num_relations),
                )
                if params.seed != training.seed or params.dim != training.dim:
                    params = None
            except Exception:
                params = None
            if params is not None:
                logger.info("reusing checkpoint %s (header matches)", model_path)
        if params is None:
            params = init_model(config.model, split.train.num_entities, split.train.num_relations, training)
            params, trace = train(params, split.train, training)
            save_model(params, model_path)
            write_loss_trace(trace, out / "loss_trace.csv", header)

    with _stage("enrich", timings):
        enrichment = config.enrichment_config(target_ids)
        result = enrich(split.train, params, enrichment, workers=config.workers)
        write_manifest(result, split.entities, split.relations, out / "added_manifest.tsv", header)
        with open(out / "enriched.tsv", "w", encoding="utf-8") as fh:
            fh.write(f"# config_hash={chash}\n")
            for h, r, t in result.enriched.triples:
                fh.write(f"{split.entities.label(h)}\t{split.relations.label(r)}\t{split.entities.label(t)}\n")

    miner = config.miner_config()
    with _stage("mine_original", timings):
        rules_before = mine_rules(split.train, miner, workers=config.workers)
        write_rules(rules_before, split.relations, split.entities, out / "rules_before.tsv", header)

    with _stage("mine_enriched", timings):
        rules_after = mine_rules(result.enriched, miner, workers=config.workers)
        write_rules(rules_after, split.relations, split.entities, out / "rules_after.tsv", header)

    with _stage("diff", timings):
        diff = diff_rules(rules_before, rules_after, split.relations, split.entities)
        for name, rules in (("new", diff.new), ("dropped", diff.dropped), ("same", diff.same)):
            write_rules(rules, split.relations, split.entities, out / f"rules_{name}.tsv", header)
        summary = summarize_confidence(diff, split.train, result.enriched, miner.allow_reflexive)
        write_diff_summary(diff, summary, out / "diff_summary.txt", header)

    with _stage("eval_embeddings", timings):
        report = evaluate_embeddings(params, split, config.ranking_mode, workers=config.workers)
        write_report(report, out / "eval_embeddings.txt", header)

    with _stage("eval_rules", timings):
        report_before = evaluate_rules(rules_before, split, config.ranking_mode, workers=config.workers)
        write_report(report_before, out / "eval_rules_before.txt", header)
        report_after = evaluate_rules(rules_after, split, config.ranking_mode, workers=config.workers)
        write_report(report_after, out / "eval_rules_after.txt", header)

    manifest = {
        "config_hash": chash,
        "seed": config.seed,
        "stages": timings,
        "artifacts": sorted(p.name for p in out.iterdir() if p.is_file() and p.name != "manifest.json"),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return manifest


def split_stage(
    triples,
    ratios: tuple[float, float, float],
    seed: int,
) -> tuple[list, list, list]:
    """Shuffle-split triples into train/valid/test by ratios, then move any
    held-out triple whose entity or relation is uncovered by train into train."""
    if any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"ratios must be non-negative and sum to 1, got {ratios}")
    triples = list(triples)
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(triples))
    n_valid = int(len(triples) * ratios[1])
    n_test = int(len(triples) * ratios[2])
    n_train = len(triples) - n_valid - n_test
    shuffled = [triples[i] for i in order]
    train_part = shuffled[:n_train]
    valid_part = shuffled[n_train:n_train + n_valid]
    test_part = shuffled[n_train + n_valid:]

    covered_entities = {e for h, _, t in train_part for e in (h, t)}
    covered_relations = {r for _, r, _ in train_part}

    def sweep(part: list) -> list:
        kept = []
        for t in part:
            if t.head in covered_entities and t.tail in covered_entities and t.relation in covered_relations:
                kept.append(t)
            else:
                train_part.append(t)
                covered_entities.update((t.head, t.tail))
                covered_relations.add(t.relation)
        return kept

    valid_part = sweep(valid_part)
    test_part = sweep(test_part)
    return train_part, valid_part, test_part


def write_split(split_parts, entities, relations, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = ("train.tsv", "valid.tsv", "test.tsv")
    for name, part in zip(names, split_parts):
        save_triples(part, entities, relations, out / name)
