"""Command-line interface.

Subcommands mirror the pipeline stages (`split`, `train`, `enrich`, `mine`,
`eval`, `apply`, `diff`) plus `pipeline` for the full run. Pipeline options
come from a key=value config file overridden by command-line flags.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import PipelineConfig, apply_setting, derive_seed, load_config_file
from .diff import diff_rules, summarize_confidence, write_diff_summary
from .enrich import enrich, write_manifest
from .errors import (
    ConfigError,
    ContractError,
    DataError,
    KgenrichError,
    NumericalError,
    ParseError,
    PipelineError,
    UndefinedMetricError,
    VocabularyError,
)
from .graph import Vocabulary, load_split, load_triples, write_stats
from .models import ModelKind, init_model, load_model, save_model, train, write_loss_trace
from .pipeline import run_pipeline, split_stage, write_split
from .ranking import RankingMode, evaluate_embeddings, evaluate_rules, write_report
from .rules.atoms import MinerConfig
from .rules.mining import mine_rules, read_rules, write_rules

USAGE_ERROR = 1
DATA_ERROR = 2
NUMERICAL_ERROR = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        raise SystemExit(self.exit_code_for_error(message))

    @staticmethod
    def exit_code_for_error(message: str) -> int:
        sys.stderr.write(f"error: {message}\n")
        return USAGE_ERROR


def _add_split_paths(parser: argparse.ArgumentParser, valid_required: bool = False):
    parser.add_argument("--train", required=True, help="train triples TSV")
    parser.add_argument("--valid", default=None, required=valid_required, help="validation triples TSV")
    parser.add_argument("--test", default=None, required=valid_required, help="test triples TSV")
    parser.add_argument("--oov-policy", default="drop", choices=("drop", "move", "error"),
                        help="held-out triples with labels unseen in train")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kgenrich", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"kgenrich {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="info-level logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("split", help="split a triple file into train/valid/test")
    p.add_argument("input", help="triples TSV to split")
    p.add_argument("--ratios", default="0.8,0.1,0.1", help="train,valid,test fractions summing to 1")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("train", help="train an embedding model")
    _add_split_paths(p)
    p.add_argument("--model", default="transe", choices=[k.value for k in ModelKind])
    p.add_argument("--dim", type=int, default=50)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--margin", type=float, default=1.0)
    p.add_argument("--negatives", type=int, default=1)
    p.add_argument("--batch-size", type=int, default=1024)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True, help="model checkpoint path")
    p.add_argument("--loss-csv", default=None, help="per-epoch loss trace CSV")

    p = sub.add_parser("enrich", help="add top-k model-scored candidate triples")
    _add_split_paths(p)
    p.add_argument("--model-file", required=True)
    p.add_argument("--top-k", type=int, default=50)
    p.add_argument("--sample-entities", type=int, default=1000)
    p.add_argument("--sample-relations", type=int, default=10)
    p.add_argument("--target-relations", default="", help="comma-separated relation labels")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out-graph", required=True, help="enriched graph TSV")
    p.add_argument("--out-manifest", required=True, help="added-triples manifest TSV")

    p = sub.add_parser("mine", help="mine closed Horn rules from a triple file")
    p.add_argument("graph", help="triples TSV")
    p.add_argument("--max-body-atoms", type=int, default=2)
    p.add_argument("--min-support", type=int, default=10)
    p.add_argument("--min-head-coverage", type=float, default=0.01)
    p.add_argument("--min-pca-confidence", type=float, default=0.1)
    p.add_argument("--allow-constants", action="store_true")
    p.add_argument("--no-reflexive", action="store_true", help="forbid entity-sharing bindings")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="rules TSV")

    p = sub.add_parser("eval", help="link prediction with a trained model")
    _add_split_paths(p, valid_required=False)
    p.add_argument("--model-file", required=True)
    p.add_argument("--mode", default="raw", choices=[m.value for m in RankingMode])
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="report file (key=value lines)")

    p = sub.add_parser("apply", help="link prediction with mined rules")
    _add_split_paths(p, valid_required=False)
    p.add_argument("--rules", required=True, help="rules TSV")
    p.add_argument("--mode", default="raw", choices=[m.value for m in RankingMode])
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)

    p = sub.add_parser("diff", help="compare two rule files (new/dropped/same)")
    p.add_argument("--before", required=True)
    p.add_argument("--after", required=True)
    p.add_argument("--graph-original", default=None, help="score before/dropped/same on this graph")
    p.add_argument("--graph-enriched", default=None, help="score after/new on this graph")
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("stats", help="graph statistics as key=value lines")
    p.add_argument("graph")
    p.add_argument("--out", default=None, help="write to file instead of stdout")

    p = sub.add_parser("pipeline", help="full run: train, enrich, mine, diff, evaluate")
    p.add_argument("--config", default=None, help="key=value configuration file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a configuration key (repeatable)")
    p.add_argument("--print-config", action="store_true", help="dump the effective configuration and exit")
    p.add_argument("--resume", action="store_true", help="reuse a matching model checkpoint")
    # common keys as first-class flags
    p.add_argument("--train", dest="train_path", default=None)
    p.add_argument("--valid", dest="valid_path", default=None)
    p.add_argument("--test", dest="test_path", default=None)
    p.add_argument("--out-dir", dest="flag_out_dir", default=None)
    p.add_argument("--model", dest="flag_model", default=None, choices=[k.value for k in ModelKind])
    p.add_argument("--seed", dest="flag_seed", type=int, default=None)
    p.add_argument("--top-k", dest="flag_top_k", type=int, default=None)
    p.add_argument("--epochs", dest="flag_epochs", type=int, default=None)
    p.add_argument("--workers", dest="flag_workers", type=int, default=None)

    return parser


def _cmd_split(args) -> int:
    kg = load_triples(args.input)
    try:
        ratios = tuple(float(x) for x in args.ratios.split(","))
        if len(ratios) != 3:
            raise ValueError("need exactly three ratios")
    except ValueError as exc:
        raise ConfigError(f"bad --ratios {args.ratios!r}: {exc}") from exc
    parts = split_stage(list(kg.triples), ratios, derive_seed(args.seed, "split"))
    write_split(parts, kg.entities, kg.relations, args.out_dir)
    print(f"wrote train/valid/test ({len(parts[0])}/{len(parts[1])}/{len(parts[2])} triples) to {args.out_dir}")
    return 0


def _load_cli_split(args):
    return load_split(args.train, args.valid, args.test, oov_policy=args.oov_policy)


def _cmd_train(args) -> int:
    from .models import TrainingConfig

    split = _load_cli_split(args)
    config = TrainingConfig(
        dim=args.dim, learning_rate=args.lr, epochs=args.epochs, margin=args.margin,
        negatives_per_positive=args.negatives, batch_size=args.batch_size, seed=args.seed,
    )
    params = init_model(ModelKind(args.model), split.train.num_entities, split.train.num_relations, config)
    params, trace = train(params, split.train, config)
    save_model(params, args.out)
    if args.loss_csv:
        write_loss_trace(trace, args.loss_csv)
    final = trace[-1] if trace else float("nan")
    print(f"trained {args.model} for {args.epochs} epochs (final loss {final:.4f}); saved to {args.out}")
    return 0


def _cmd_enrich(args) -> int:
    from .enrich import EnrichmentConfig

    split = _load_cli_split(args)
    params = load_model(args.model_file,
                        expect_counts=(split.train.num_entities, split.train.num_relations))
    target_ids = []
    for label in (s for s in args.target_relations.split(",") if s):
        target_ids.append(split.relations.id(label))
    config = EnrichmentConfig(
        target_relations=tuple(target_ids),
        sample_entities=args.sample_entities,
        sample_relations=args.sample_relations,
        top_k=args.top_k,
        seed=args.seed,
    )
    result = enrich(split.train, params, config)
    write_manifest(result, split.entities, split.relations, args.out_manifest)
    result.enriched.save(args.out_graph)
    print(f"added {len(result.added)} of {result.candidate_count} candidates; "
          f"enriched graph has {len(result.enriched)} triples")
    return 0


def _cmd_mine(args) -> int:
    kg = load_triples(args.graph)
    config = MinerConfig(
        max_body_atoms=args.max_body_atoms,
        min_support=args.min_support,
        min_head_coverage=args.min_head_coverage,
        min_pca_confidence=args.min_pca_confidence,
        allow_constants=args.allow_constants,
        allow_reflexive=not args.no_reflexive,
    )
    rules = mine_rules(kg, config, workers=args.workers)
    write_rules(rules, kg.relations, kg.entities, args.out)
    print(f"mined {len(rules)} rules from {args.graph} -> {args.out}")
    return 0


def _cmd_eval(args) -> int:
    split = _load_cli_split(args)
    params = load_model(args.model_file,
                        expect_counts=(split.train.num_entities, split.train.num_relations))
    report = evaluate_embeddings(params, split, RankingMode(args.mode), workers=args.workers)
    write_report(report, args.out)
    print(f"hits@1={report.hits1:.4f} hits@3={report.hits3:.4f} "
          f"hits@10={report.hits10:.4f} mrr={report.mrr:.4f} ({report.mode.value})")
    return 0


def _cmd_apply(args) -> int:
    split = _load_cli_split(args)
    rules = read_rules(args.rules, split.relations, split.entities, grow_vocab=False)
    report = evaluate_rules(rules, split, RankingMode(args.mode), workers=args.workers)
    write_report(report, args.out)
    print(f"hits@1={report.hits1:.4f} hits@3={report.hits3:.4f} "
          f"hits@10={report.hits10:.4f} mrr={report.mrr:.4f} ({report.mode.value})")
    return 0


def _cmd_diff(args) -> int:
    if bool(args.graph_original) != bool(args.graph_enriched):
        raise ConfigError("--graph-original and --graph-enriched must be given together")
    kg_orig = kg_enr = None
    if args.graph_enriched:
        # the enriched graph's vocabulary covers the original (it is a superset)
        kg_enr = load_triples(args.graph_enriched)
        kg_orig = load_triples(args.graph_original, vocab=(kg_enr.entities, kg_enr.relations))
        relations, entities = kg_enr.relations, kg_enr.entities
        before = read_rules(args.before, relations, entities, grow_vocab=False)
        after = read_rules(args.after, relations, entities, grow_vocab=False)
    else:
        relations, entities = Vocabulary(), Vocabulary()
        before = read_rules(args.before, relations, entities, grow_vocab=True)
        after = read_rules(args.after, relations, entities, grow_vocab=True)
    diff = diff_rules(before, after, relations, entities)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, rules in (("new", diff.new), ("dropped", diff.dropped), ("same", diff.same)):
        write_rules(rules, relations, entities, out / f"rules_{name}.tsv")
    summary = None
    if kg_enr is not None:
        summary = summarize_confidence(diff, kg_orig, kg_enr)
    write_diff_summary(diff, summary, out / "diff_summary.txt")
    print(f"before={len(diff.before)} after={len(diff.after)} new={len(diff.new)} "
          f"dropped={len(diff.dropped)} same={len(diff.same)}")
    return 0


def _cmd_stats(args) -> int:
    kg = load_triples(args.graph)
    if args.out:
        write_stats(kg, args.out)
    else:
        from .graph import graph_stats

        for key, value in graph_stats(kg).items():
            print(f"{key}={value}")
    return 0


def _cmd_pipeline(args) -> int:
    config = PipelineConfig()
    if args.config:
        config = load_config_file(args.config, config)
    for setting in args.set:
        if "=" not in setting:
            raise ConfigError(f"--set expects KEY=VALUE, got {setting!r}")
        key, _, value = setting.partition("=")
        config = apply_setting(config, key, value)
    flag_map = {
        "train": args.train_path, "valid": args.valid_path, "test": args.test_path,
        "out_dir": args.flag_out_dir, "model": args.flag_model,
        "seed": args.flag_seed, "top_k": args.flag_top_k,
        "epochs": args.flag_epochs, "workers": args.flag_workers,
    }
    for key, value in flag_map.items():
        if value is not None:
            config = apply_setting(config, key, str(value))
    if args.print_config:
        print(f"# config_hash={config.config_hash()}")
        for line in config.to_lines():
            print(line)
        return 0
    if not config.train_path:
        raise ConfigError("pipeline needs a train file (--train or train= in the config)")
    manifest = run_pipeline(config, resume=args.resume)
    print(f"pipeline complete: config_hash={manifest['config_hash']} "
          f"artifacts={len(manifest['artifacts'])} in {config.out_dir}")
    return 0


_COMMANDS = {
    "split": _cmd_split,
    "train": _cmd_train,
    "enrich": _cmd_enrich,
    "mine": _cmd_mine,
    "eval": _cmd_eval,
    "apply": _cmd_apply,
    "diff": _cmd_diff,
    "stats": _cmd_stats,
    "pipeline": _cmd_pipeline,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _COMMANDS[args.command](args)
    except NumericalError as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return NUMERICAL_ERROR
    except (ConfigError, ContractError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except PipelineError as exc:
        code = NUMERICAL_ERROR if isinstance(exc.cause, NumericalError) else DATA_ERROR
        print(f"pipeline error: {exc}", file=sys.stderr)
        return code
    except (ParseError, VocabularyError, DataError, UndefinedMetricError, KgenrichError,
            FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
