"""Traversal sets from downstream (DST) and upstream (UST) reference walks."""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass

from erld.index import InvertedIndex, PrimaryKeyStore
from erld.model import Document, SchemaConfig


@dataclass(frozen=True)
class TraversalConfig:
    """``max_dst_ust_steps`` bounds the DST-UST rounds; a single UST search
    returning more than ``ust_fanout_threshold`` documents is discarded."""

    max_dst_ust_steps: int = 4
    ust_fanout_threshold: int = 10

    def __post_init__(self):
        if self.max_dst_ust_steps < 1 or self.ust_fanout_threshold < 1:
            raise ValueError("traversal limits must be >= 1")


@dataclass(frozen=True)
class TraversalSet:
    owner: str
    members: frozenset[str]


def downstream_step(doc: Document, pk: PrimaryKeyStore, schema: SchemaConfig) -> set[str]:
    """Documents ``doc`` explicitly refers to. Dangling references are dropped."""
    return {ref for ref in schema.explicit_references(doc) if ref in pk and ref != doc.id}


def downstream_closure(doc: Document, pk: PrimaryKeyStore, schema: SchemaConfig) -> set[str]:
    """Every document reachable by following explicit references downwards."""
    seen: set[str] = set()
    frontier = [doc]
    while frontier:
        nxt = []
        for d in frontier:
            for ref in downstream_step(d, pk, schema):
                if ref not in seen and ref != doc.id:
                    seen.add(ref)
                    nxt.append(pk[ref])
        frontier = nxt
    return seen


def upstream_step(doc: Document, inv: InvertedIndex, threshold: int, schema: SchemaConfig) -> set[str]:
    """Referrers of ``doc``: search its key and explicit references in ``inv``.

    The document owning a searched key is not a referrer of it, so it is
    dropped from the hits along with ``doc`` itself.
    """
    found: set[str] = set()
    for token in {doc.id} | schema.explicit_references(doc):
        hits = inv.search(token) - {doc.id, token}
        if len(hits) > threshold:
            continue
        found |= hits
    return found


def traversal_set(
    doc: Document,
    cfg: TraversalConfig,
    pk: PrimaryKeyStore,
    inv: InvertedIndex,
    schema: SchemaConfig,
) -> TraversalSet:
    """Repeated DST-UST rounds, each applied only to the newly added frontier."""
    seen = {doc.id}
    frontier = {doc.id}
    for _ in range(cfg.max_dst_ust_steps):
        down: set[str] = set()
        for node in frontier:
            down |= downstream_step(pk[node], pk, schema)
        up: set[str] = set()
        for node in frontier | down:
            up |= upstream_step(pk[node], inv, cfg.ust_fanout_threshold, schema)
        frontier = (down | up) - seen
        if not frontier:
            break
        seen |= frontier
    return TraversalSet(doc.id, frozenset(seen - {doc.id}))


def traversal_sets(
    docs: Iterable[Document],
    cfg: TraversalConfig,
    pk: PrimaryKeyStore,
    inv: InvertedIndex,
    schema: SchemaConfig,
) -> dict[str, frozenset[str]]:
    return {doc.id: traversal_set(doc, cfg, pk, inv, schema).members for doc in docs}
