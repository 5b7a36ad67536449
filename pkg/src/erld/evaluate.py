"""Pairwise quality metrics, the all-pairs baseline and the traversal-benefit
experiment."""

from __future__ import annotations

import json
import time
from collections import Counter
from collections.abc import Iterable, Mapping
from dataclasses import asdict, dataclass
from itertools import combinations
from pathlib import Path
from typing import Any

from erld.components import DisjointSets
from erld.index import build_indexes
from erld.matching import MatchFunction, MatchItem
from erld.model import Document, Entity
from erld.pipeline import ERLDConfig, resolve_batch
from erld.traversal import traversal_sets


def _pairs(n: int) -> int:
    return n * (n - 1) // 2


@dataclass
class Metrics:
    """Pairwise quality. With no predicted pairs precision is 1.0; with no
    true pairs recall is 1.0."""

    precision: float
    recall: float
    f1: float
    true_pairs: int
    predicted_pairs: int
    correct_pairs: int
    match_evaluations: int = 0
    wall_time: float = 0.0

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def row(self, sep: str = "\t") -> str:
        return sep.join(
            [f"{self.precision:.4f}", f"{self.recall:.4f}", f"{self.f1:.4f}", str(self.true_pairs),
             str(self.predicted_pairs), str(self.correct_pairs), str(self.match_evaluations),
             f"{self.wall_time:.3f}"]
        )

    HEADER = ("precision", "recall", "f1", "true_pairs", "predicted_pairs", "correct_pairs",
              "match_evaluations", "wall_time")


class CoverageError(ValueError):
    def __init__(self, missing: set[str], extra: set[str]):
        self.missing, self.extra = missing, extra
        super().__init__(
            f"prediction does not cover the gold ids: {len(missing)} missing {sorted(missing)[:5]}, "
            f"{len(extra)} extra {sorted(extra)[:5]}"
        )


def _labels(predicted: Mapping[str, str] | Iterable[Iterable[str]]) -> dict[str, Any]:
    if isinstance(predicted, Mapping):
        return dict(predicted)
    labels: dict[str, Any] = {}
    for i, group in enumerate(predicted):
        for doc_id in group:
            if doc_id in labels:
                raise ValueError(f"document {doc_id!r} appears in two predicted entities")
            labels[doc_id] = i
    return labels


def pairwise_metrics(
    predicted: Mapping[str, str] | Iterable[Iterable[str]],
    gold: Mapping[str, str],
    match_evaluations: int = 0,
    wall_time: float = 0.0,
) -> Metrics:
    """Pair counts come from class sizes; no pair lists are built."""
    pred = _labels(predicted)
    missing, extra = set(gold) - set(pred), set(pred) - set(gold)
    if missing or extra:
        raise CoverageError(missing, extra)
    true_pairs = sum(_pairs(c) for c in Counter(gold.values()).values())
    predicted_pairs = sum(_pairs(c) for c in Counter(pred.values()).values())
    correct = sum(_pairs(c) for c in Counter((pred[d], gold[d]) for d in gold).values())
    precision = correct / predicted_pairs if predicted_pairs else 1.0
    recall = correct / true_pairs if true_pairs else 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return Metrics(precision, recall, f1, true_pairs, predicted_pairs, correct, match_evaluations, wall_time)


def allpairs_baseline(docs: Iterable[Document], config: ERLDConfig) -> tuple[list[frozenset[str]], int]:
    """Compare every pair of documents, link matches, take components.

    Traversal sets are still computed so traversal predicates keep their
    meaning. Returns the partition and the number of match evaluations.
    """
    docs = list(docs)
    pk, inv = build_indexes(docs, config.schema)
    ts = traversal_sets(docs, config.traversal, pk, inv, config.schema)
    items = [MatchItem(d, reach=ts[d.id]) for d in docs]
    match_fn: MatchFunction = config.match_fn
    sets = DisjointSets(d.id for d in docs)
    evaluations = 0
    for a, b in combinations(items, 2):
        evaluations += 1
        if match_fn(a, b):
            sets.union(a.doc.id, b.doc.id)
    return sets.groups(), evaluations


@dataclass
class BenefitReport:
    with_traversal: Metrics
    without_traversal: Metrics
    precision_tolerance: float = 0.005

    @property
    def recall_gain(self) -> float:
        return self.with_traversal.recall - self.without_traversal.recall

    @property
    def precision_change(self) -> float:
        return self.with_traversal.precision - self.without_traversal.precision

    @property
    def direction_ok(self) -> bool:
        return self.recall_gain >= 0 and self.precision_change >= -self.precision_tolerance

    def to_dict(self) -> dict[str, Any]:
        return {
            "with_traversal": self.with_traversal.to_dict(),
            "without_traversal": self.without_traversal.to_dict(),
            "recall_gain": self.recall_gain,
            "precision_change": self.precision_change,
            "direction_ok": self.direction_ok,
        }


def resolve_and_score(docs: list[Document], gold: Mapping[str, str], config: ERLDConfig) -> tuple[list[Entity], Metrics]:
    started = time.perf_counter()
    entities, state = resolve_batch(docs, config)
    elapsed = time.perf_counter() - started
    metrics = pairwise_metrics([e.members for e in entities], gold, state.last_run.match_evaluations, elapsed)
    return entities, metrics


def run_benefit_experiment(
    corpus: list[Document],
    gold: Mapping[str, str],
    rules_with_traversal: MatchFunction,
    rules_without: MatchFunction,
    config: ERLDConfig,
    precision_tolerance: float = 0.005,
) -> BenefitReport:
    """Resolve the corpus twice, differing only in the match function."""
    base = {f: getattr(config, f) for f in ("schema", "traversal", "lsh", "cache_capacity")}
    _, with_m = resolve_and_score(corpus, gold, ERLDConfig(match_fn=rules_with_traversal, **base))
    _, without_m = resolve_and_score(corpus, gold, ERLDConfig(match_fn=rules_without, **base))
    return BenefitReport(with_m, without_m, precision_tolerance)


def write_entities(entities: Iterable[Entity], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in sorted(entities, key=lambda e: e.id):
            row = {
                "entity_id": e.id,
                "members": sorted(e.members),
                "attrs": {k: sorted(v) for k, v in sorted(e.merged.attrs.items())},
            }
            fh.write(json.dumps(row) + "\n")


def read_entity_partition(path: str | Path) -> dict[str, str]:
    """Document id -> entity id from an entities JSON-Lines file."""
    labels: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            row = json.loads(line)
            for doc_id in row["members"]:
                if doc_id in labels:
                    raise ValueError(f"{path}:{line_no}: document {doc_id!r} in two entities")
                labels[doc_id] = row["entity_id"]
    return labels
