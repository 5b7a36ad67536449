"""Batch and incremental resolution, and the state carried between runs."""

from __future__ import annotations

import logging
import time
from collections.abc import Iterable
from dataclasses import dataclass, field
from itertools import combinations

from erld.components import DisjointSets, consolidate, edges_from_partial_entity, entity_id_for
from erld.imm import PartialEntity, merge_items, rswoosh
from erld.index import InvertedIndex, PrimaryKeyStore, build_indexes
from erld.lsh import LshIndex, LshParams, assign_buckets, document_bucket_ids
from erld.matching import Matcher, MatchFunction, MatchItem, PairCache, fingerprint
from erld.model import Document, Entity, SchemaConfig, merge
from erld.traversal import TraversalConfig, traversal_sets

log = logging.getLogger(__name__)


class StaleStateError(RuntimeError):
    """The saved state was built with a different schema, rules or LSH params."""


class StateInvariantError(RuntimeError):
    pass


@dataclass(frozen=True)
class ERLDConfig:
    schema: SchemaConfig
    match_fn: MatchFunction
    traversal: TraversalConfig = TraversalConfig()
    lsh: LshParams = field(default_factory=LshParams.create)
    cache_capacity: int = 10**7


@dataclass
class RunStats:
    mode: str
    documents: int = 0
    buckets: int = 0
    resolved_buckets: int = 0
    bucket_pair_bound: int = 0
    match_evaluations: int = 0
    cache_hits: int = 0
    entities_read: int = 0
    co_bucketed_pairs: int | None = None
    wall_time: float = 0.0


@dataclass(eq=False)
class ResolutionState:
    """Everything an incremental run needs from earlier runs."""

    schema: SchemaConfig
    match_fn: MatchFunction
    traversal_cfg: TraversalConfig
    lsh_params: LshParams
    pk_store: PrimaryKeyStore
    inverted_index: InvertedIndex
    lsh_index: LshIndex
    traversal: dict[str, frozenset[str]]
    doc_entity_map: dict[str, str]
    entities: dict[str, Entity]
    pair_cache: PairCache
    tombstones: dict[str, str] = field(default_factory=dict)
    last_run: RunStats | None = None
    entity_reads: set[str] = field(default_factory=set)

    @property
    def schema_hash(self) -> str:
        return self.schema.fingerprint()

    def entity(self, eid: str) -> Entity:
        """Read access to a stored entity; reads are tracked per run."""
        self.entity_reads.add(eid)
        return self.entities[eid]

    def matches_config(self, config: ERLDConfig) -> list[str]:
        problems = []
        if config.schema.fingerprint() != self.schema_hash:
            problems.append("schema")
        if config.lsh != self.lsh_params:
            problems.append("lsh params")
        if fingerprint(config.match_fn) != fingerprint(self.match_fn):
            problems.append("match function")
        if config.traversal != self.traversal_cfg:
            problems.append("traversal config")
        return problems

    def config(self) -> ERLDConfig:
        return ERLDConfig(self.schema, self.match_fn, self.traversal_cfg, self.lsh_params, self.pair_cache.capacity)

    def check_invariants(self) -> None:
        ids = set(self.pk_store)
        covered: set[str] = set()
        for eid, ent in self.entities.items():
            if ent.id != eid:
                raise StateInvariantError(f"entity stored under {eid!r} has id {ent.id!r}")
            if not ent.members:
                raise StateInvariantError(f"entity {eid!r} has no members")
            if covered & ent.members:
                raise StateInvariantError(f"entity {eid!r} shares members with another entity")
            covered |= ent.members
            for doc_id in ent.members:
                if self.doc_entity_map.get(doc_id) != eid:
                    raise StateInvariantError(f"document {doc_id!r} not mapped to its entity {eid!r}")
        if covered != ids or set(self.doc_entity_map) != ids:
            raise StateInvariantError("entity members do not partition the stored corpus")
        if set(self.traversal) != ids:
            raise StateInvariantError("traversal sets do not cover the stored corpus")
        unknown = self.lsh_index.members() - ids
        if unknown:
            raise StateInvariantError(f"LSH index references unknown ids {sorted(unknown)[:5]}")
        for retired, survivor in self.tombstones.items():
            if survivor not in self.entities or retired in self.entities:
                raise StateInvariantError(f"tombstone {retired!r} -> {survivor!r} is dangling")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ResolutionState):
            return NotImplemented
        return (
            self.schema == other.schema
            and fingerprint(self.match_fn) == fingerprint(other.match_fn)
            and self.traversal_cfg == other.traversal_cfg
            and self.lsh_params == other.lsh_params
            and self.pk_store == other.pk_store
            and self.inverted_index == other.inverted_index
            and self.lsh_index == other.lsh_index
            and self.traversal == other.traversal
            and self.doc_entity_map == other.doc_entity_map
            and self.entities == other.entities
            and self.pair_cache == other.pair_cache
            and self.pair_cache.capacity == other.pair_cache.capacity
            and self.tombstones == other.tombstones
        )


class _BucketResolver:
    """Runs R-Swoosh per bucket, skipping buckets whose content was seen."""

    def __init__(self, matcher: Matcher, audit: bool = False):
        self.matcher = matcher
        self.audit = audit
        self.co_bucketed: set[tuple] = set()
        self.pair_bound = 0
        self.resolved = 0

    def run(self, items: list[MatchItem]) -> list[PartialEntity]:
        items.sort(key=lambda it: it.key)
        self.pair_bound += len(items) * (len(items) - 1) // 2
        self.resolved += 1
        if not self.audit:
            return rswoosh(items, self.matcher)
        keys = [it.key for it in items]

        def tracking_merge(a: MatchItem, b: MatchItem) -> MatchItem:
            out = merge_items(a, b)
            keys.append(out.key)
            return out

        result = rswoosh(items, self.matcher, tracking_merge)
        for ka, kb in combinations(keys, 2):
            self.co_bucketed.add((ka, kb) if ka <= kb else (kb, ka))
        return result


def _distinct_groups(groups: Iterable[Iterable[str]]) -> list[tuple[str, ...]]:
    """Unique bucket contents with at least two members, in sorted order."""
    seen = {tuple(sorted(g)) for g in groups}
    return sorted(g for g in seen if len(g) > 1)


def resolve_batch(
    docs: Iterable[Document], config: ERLDConfig, audit: bool = False, cache: PairCache | None = None
) -> tuple[list[Entity], ResolutionState]:
    """Index, traverse, hash, match-merge per bucket, then connect components.

    With ``audit`` the run also records every pair of items that shared a
    bucket, for the cache accounting checks. A ``cache`` from an earlier run
    over the same rules is reused; pairs it already holds are not evaluated.
    """
    started = time.perf_counter()
    docs = list(docs)
    schema = config.schema
    pk, inv = build_indexes(docs, schema)
    ts = traversal_sets(docs, config.traversal, pk, inv, schema)
    lsh_index, _ = assign_buckets(docs, ts, schema, config.lsh)

    if cache is None:
        cache = PairCache(config.cache_capacity)
    resolver = _BucketResolver(Matcher(config.match_fn, cache), audit)
    items = {d.id: MatchItem(d, reach=ts[d.id]) for d in docs}
    sets = DisjointSets(pk)
    for group in _distinct_groups(lsh_index.buckets.values()):
        for pe in resolver.run([items[i] for i in group]):
            for a, b in edges_from_partial_entity(pe.members):
                sets.union(a, b)
    entities = consolidate(sets.groups(), pk)

    state = ResolutionState(
        schema=schema,
        match_fn=config.match_fn,
        traversal_cfg=config.traversal,
        lsh_params=config.lsh,
        pk_store=pk,
        inverted_index=inv,
        lsh_index=lsh_index,
        traversal=ts,
        doc_entity_map={d: e.id for e in entities for d in e.members},
        entities={e.id: e for e in entities},
        pair_cache=cache,
    )
    state.last_run = _stats("batch", len(docs), len(lsh_index), resolver, state, started)
    log.info("batch: %d documents -> %d entities, %d evaluations", len(docs), len(entities),
             resolver.matcher.evaluations)
    return entities, state


def _stats(mode, n_docs, n_buckets, resolver, state, started) -> RunStats:
    return RunStats(
        mode=mode,
        documents=n_docs,
        buckets=n_buckets,
        resolved_buckets=resolver.resolved,
        bucket_pair_bound=resolver.pair_bound,
        match_evaluations=resolver.matcher.evaluations,
        cache_hits=resolver.matcher.cache_hits,
        entities_read=len(state.entity_reads),
        co_bucketed_pairs=len(resolver.co_bucketed) if resolver.audit else None,
        wall_time=time.perf_counter() - started,
    )


def resolve_incremental(
    new_docs: Iterable[Document],
    state: ResolutionState,
    config: ERLDConfig | None = None,
    audit: bool = False,
) -> tuple[list[Entity], ResolutionState]:
    """Resolve ``new_docs`` against ``state``, updating it in place.

    Returns the entities created or changed by this run. Entities that no
    touched bucket reaches are never read.
    """
    started = time.perf_counter()
    if config is not None:
        problems = state.matches_config(config)
        if problems:
            raise StaleStateError("state was built with a different " + ", ".join(problems))
    new_docs = list(new_docs)
    seen_new: set[str] = set()
    for doc in new_docs:
        if doc.id in state.pk_store or doc.id in seen_new:
            raise ValueError(f"document id {doc.id!r} is already resolved or repeated")
        seen_new.add(doc.id)
    state.entity_reads = set()
    schema = state.schema
    pk, inv = state.pk_store, state.inverted_index

    for doc in new_docs:
        pk.add(doc)
        inv.add(doc, schema)
    ts_new = traversal_sets(new_docs, state.traversal_cfg, pk, inv, schema)

    touched: dict[str, set[str]] = {}
    chosen: dict[str, list[str]] = {}
    for doc in new_docs:
        chosen[doc.id] = document_bucket_ids(doc, schema, state.lsh_params)
        for bid in chosen[doc.id]:
            touched.setdefault(bid, set()).update({doc.id, *ts_new[doc.id]})
    for bid, ids in touched.items():
        ids |= state.lsh_index.buckets.get(bid, set())

    doc_items = {d.id: MatchItem(d, reach=ts_new[d.id]) for d in new_docs}
    entity_items: dict[str, MatchItem] = {}

    def entity_item(eid: str) -> MatchItem:
        if eid not in entity_items:
            ent = state.entity(eid)
            reach: set[str] = set()
            for m in ent.members:
                reach |= state.traversal[m]
            entity_items[eid] = MatchItem(ent.merged, ent.members, reach, origins={eid})
        return entity_items[eid]

    groups = set()
    for ids in touched.values():
        eids = {state.doc_entity_map[i] for i in ids if i not in seen_new}
        groups.add(tuple(sorted({("d", i) for i in ids if i in seen_new} | {("e", e) for e in eids})))

    resolver = _BucketResolver(Matcher(state.match_fn, state.pair_cache), audit)
    sets = DisjointSets(seen_new)
    for group in sorted(g for g in groups if len(g) > 1):
        items = [doc_items[x] if kind == "d" else entity_item(x) for kind, x in group]
        for pe in resolver.run(items):
            for node in pe.members:
                sets.add(node)
            for a, b in edges_from_partial_entity(pe.members):
                sets.union(a, b)

    changed = _apply_components(state, sets.groups(), seen_new)

    for doc in new_docs:
        for bid in chosen[doc.id]:
            state.lsh_index.add(bid, {doc.id, *ts_new[doc.id]})
    state.traversal.update(ts_new)
    state.last_run = _stats("incremental", len(new_docs), len(touched), resolver, state, started)
    log.info("incremental: %d documents, %d buckets touched, %d entities changed, %d read",
             len(new_docs), len(touched), len(changed), len(state.entity_reads))
    return changed, state


def _apply_components(state: ResolutionState, components: list[frozenset[str]], new_ids: set[str]) -> list[Entity]:
    changed = []
    for comp in components:
        old_eids = {state.doc_entity_map[d] for d in comp if d not in new_ids}
        if not (comp & new_ids) and len(old_eids) == 1:
            continue
        survivor = min(old_eids) if old_eids else entity_id_for(comp)
        for retired in old_eids - {survivor}:
            del state.entities[retired]
            state.tombstones[retired] = survivor
        for retired, target in state.tombstones.items():
            if target in old_eids and target != survivor:
                state.tombstones[retired] = survivor
        merged = merge((state.pk_store[d] for d in sorted(comp)), doc_id=survivor)
        ent = Entity(survivor, merged, frozenset(comp))
        state.entities[survivor] = ent
        for d in comp:
            state.doc_entity_map[d] = survivor
        changed.append(ent)
    return sorted(changed, key=lambda e: e.id)


def entity_partition(entities: Iterable[Entity]) -> list[frozenset[str]]:
    return sorted((e.members for e in entities), key=min)
