"""Command-line entry points.

Every subcommand prints a JSON summary on success. On failure it writes one
JSON object ``{"error": ..., "message": ...}`` to stderr and exits with 1.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import asdict
from pathlib import Path
from typing import Any

from erld.components import consolidate
from erld.datagen import GeneratorConfig, generate, read_gold, residents_rules_config, residents_schema, write_gold
from erld.evaluate import Metrics, allpairs_baseline, pairwise_metrics, read_entity_partition, run_benefit_experiment, write_entities
from erld.index import PrimaryKeyStore
from erld.lsh import LshParams
from erld.matching import match_function_from_dict
from erld.model import SchemaConfig, load_json, load_schema, read_corpus, write_corpus
from erld.pipeline import ERLDConfig, resolve_batch, resolve_incremental
from erld.storage import StateError, load_state, save_state, state_lock
from erld.traversal import TraversalConfig


def _emit(payload: dict[str, Any]) -> None:
    print(json.dumps(payload, sort_keys=True))


def _schema(path: str | None) -> SchemaConfig:
    return load_schema(path) if path else residents_schema()


def cmd_generate(args: argparse.Namespace) -> dict[str, Any]:
    cfg = GeneratorConfig.from_dict(load_json(args.config)) if args.config else GeneratorConfig()
    if args.seed is not None:
        cfg.rng_seed = args.seed
    if args.entities is not None:
        cfg.num_seed_entities = args.entities
    docs, gold = generate(cfg)
    write_corpus(docs, args.out)
    write_gold(gold, args.gold)
    if args.schema_out:
        Path(args.schema_out).write_text(json.dumps(residents_schema().to_dict(), indent=2) + "\n")
    if args.rules_out:
        Path(args.rules_out).write_text(json.dumps(residents_rules_config(True), indent=2) + "\n")
    if args.plain_rules_out:
        Path(args.plain_rules_out).write_text(json.dumps(residents_rules_config(False), indent=2) + "\n")
    return {"documents": len(docs), "entities": len(set(gold.values()))}


def _stats(state) -> dict[str, Any]:
    return {k: v for k, v in asdict(state.last_run).items() if v is not None}


def cmd_resolve(args: argparse.Namespace) -> dict[str, Any]:
    schema = load_schema(args.schema)
    match_fn = match_function_from_dict(load_json(args.rules), schema)
    lsh = LshParams.create(m=args.lsh_m, n=args.lsh_n, rng_seed=args.lsh_seed)
    traversal = TraversalConfig(args.max_steps, args.ust_threshold)
    docs = read_corpus(args.input, schema)
    config = ERLDConfig(schema, match_fn, traversal, lsh)
    with state_lock(args.state):
        entities, state = resolve_batch(docs, config)
        save_state(state, args.state)
    write_entities(entities, args.out)
    return {"entities": len(entities), **_stats(state)}


def cmd_resolve_inc(args: argparse.Namespace) -> dict[str, Any]:
    if not (Path(args.state) / "manifest.json").is_file():
        raise StateError(f"no state manifest in {args.state}")
    with state_lock(args.state):
        state = load_state(args.state)
        docs = read_corpus(args.input, state.schema)
        changed, state = resolve_incremental(docs, state)
        save_state(state, args.state)
    write_entities(state.entities.values(), args.out)
    return {"entities": len(state.entities), "changed": len(changed), **_stats(state)}


def cmd_evaluate(args: argparse.Namespace) -> dict[str, Any]:
    metrics = pairwise_metrics(read_entity_partition(args.pred), read_gold(args.gold))
    if args.report:
        Path(args.report).write_text(json.dumps(metrics.to_dict(), indent=2) + "\n")
    print("\t".join(Metrics.HEADER))
    print(metrics.row())
    return {}


def cmd_benefit(args: argparse.Namespace) -> dict[str, Any]:
    schema = _schema(args.schema)
    docs = read_corpus(args.corpus, schema)
    gold = read_gold(args.gold)
    rules_a = match_function_from_dict(load_json(args.rules_a), schema)
    rules_b = match_function_from_dict(load_json(args.rules_b), schema)
    report = run_benefit_experiment(docs, gold, rules_a, rules_b, ERLDConfig(schema, rules_a))
    if args.report:
        Path(args.report).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    return report.to_dict()


def cmd_baseline(args: argparse.Namespace) -> dict[str, Any]:
    schema = _schema(args.schema)
    docs = read_corpus(args.input, schema)
    match_fn = match_function_from_dict(load_json(args.rules), schema)
    started = time.perf_counter()
    partition, evaluations = allpairs_baseline(docs, ERLDConfig(schema, match_fn))
    elapsed = time.perf_counter() - started
    if args.out:
        write_entities(consolidate(partition, PrimaryKeyStore(docs)), args.out)
    return {"entities": len(partition), "match_evaluations": evaluations, "wall_time": elapsed}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="erld", description="Entity resolution with linked documents.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic corpus and its gold labels")
    p.add_argument("--config", help="generator options as JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--entities", type=int, help="number of seed persons")
    p.add_argument("--schema-out")
    p.add_argument("--rules-out")
    p.add_argument("--plain-rules-out", help="the same ruleset without traversal predicates")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("resolve", help="batch resolution; writes a fresh state directory")
    p.add_argument("--schema", required=True)
    p.add_argument("--rules", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--state", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--lsh-m", type=int, default=3)
    p.add_argument("--lsh-n", type=int, default=6)
    p.add_argument("--lsh-seed", type=int, default=7)
    p.add_argument("--max-steps", type=int, default=4)
    p.add_argument("--ust-threshold", type=int, default=10)
    p.set_defaults(func=cmd_resolve)

    p = sub.add_parser("resolve-inc", help="resolve new documents against a saved state")
    p.add_argument("--state", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_resolve_inc)

    p = sub.add_parser("evaluate", help="pairwise precision, recall and F1")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--report")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("benefit", help="compare two rulesets, typically with and without traversal")
    p.add_argument("--corpus", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--rules-a", required=True, help="ruleset with traversal predicates")
    p.add_argument("--rules-b", required=True, help="ruleset without them")
    p.add_argument("--schema")
    p.add_argument("--report")
    p.set_defaults(func=cmd_benefit)

    p = sub.add_parser("baseline-allpairs", help="match every pair, then connected components")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--rules", required=True)
    p.add_argument("--schema")
    p.add_argument("--out")
    p.set_defaults(func=cmd_baseline)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        summary = args.func(args)
    except Exception as exc:  # every failure becomes one machine-readable line
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    if summary:
        _emit(summary)
    return 0
