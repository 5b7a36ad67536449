import random
import time

import pytest

from erld.datagen import GeneratorConfig, generate, residents_rules, residents_schema
from erld.evaluate import allpairs_baseline, pairwise_metrics
from erld.lsh import LshParams, document_bucket_ids
from erld.matching import PairCache
from erld.model import Document
from erld.pipeline import ERLDConfig, StaleStateError, entity_partition, resolve_batch, resolve_incremental
from erld.traversal import TraversalConfig
from tests.conftest import LABELS, ids

EXPECTED = {ids("d1", "d2", "d3", "d4"), ids("d5", "d6", "d7"), ids("d8", "d9", "d10"), ids("d11")}


@pytest.fixture
def config(schema, rules):
    return ERLDConfig(schema, rules)


def test_worked_example_resolves_to_four_entities(corpus, config):
    started = time.perf_counter()
    entities, state = resolve_batch(corpus, config)
    assert time.perf_counter() - started < 1.0
    assert {e.members for e in entities} == EXPECTED
    state.check_invariants()
    e2 = next(e for e in entities if LABELS["d5"] in e.members)
    assert e2.id == "E:" + min(e2.members)
    assert len(e2.merged.values("address")) == 2


def test_unrelated_documents_stay_apart(schema, rules):
    docs = [Document(f"PAN{i}", "PAN", {"pan_no": {str(i)}, "name": {n}})
            for i, n in enumerate(["Amita Kumar", "Rahul Verma", "Sunil Mehta"])]
    entities, _ = resolve_batch(docs, ERLDConfig(schema, rules))
    assert sorted(len(e.members) for e in entities) == [1, 1, 1]


def test_empty_corpus(config):
    entities, state = resolve_batch([], config)
    assert entities == [] and state.entities == {}
    state.check_invariants()


def test_result_does_not_depend_on_input_order(corpus, config):
    shuffled = corpus[:]
    random.Random(1).shuffle(shuffled)
    assert entity_partition(resolve_batch(shuffled, config)[0]) == entity_partition(resolve_batch(corpus, config)[0])


def test_held_out_d3_joins_both_fragments(corpus, config):
    d3 = LABELS["d3"]
    _, state = resolve_batch([d for d in corpus if d.id != d3], config)
    e1a = state.doc_entity_map[LABELS["d1"]]
    e1b = state.doc_entity_map[LABELS["d4"]]
    assert state.entities[e1a].members == ids("d1", "d2")
    assert state.entities[e1b].members == ids("d4")
    untouched = {state.doc_entity_map[LABELS[x]] for x in ("d5", "d8", "d11")}

    changed, state = resolve_incremental([d for d in corpus if d.id == d3], state, config)
    assert [e.members for e in changed] == [ids("d1", "d2", "d3", "d4")]
    assert {e.members for e in state.entities.values()} == EXPECTED
    survivor = min(e1a, e1b)
    retired = max(e1a, e1b)
    assert changed[0].id == survivor
    assert state.tombstones == {retired: survivor}
    assert state.entity_reads == {e1a, e1b}
    assert not state.entity_reads & untouched
    state.check_invariants()


def test_empty_increment_changes_nothing(corpus, config):
    _, state = resolve_batch(corpus, config)
    before = dict(state.doc_entity_map), dict(state.entities), {k: set(v) for k, v in state.lsh_index.buckets.items()}
    changed, state = resolve_incremental([], state, config)
    assert changed == []
    assert state.last_run.buckets == 0 and state.last_run.match_evaluations == 0
    assert (state.doc_entity_map, state.entities, state.lsh_index.buckets) == before


def test_stale_config_refused(corpus, config, schema, rules):
    _, state = resolve_batch(corpus, config)
    for other in (
        ERLDConfig(schema, rules, lsh=LshParams.create(rng_seed=8)),
        ERLDConfig(schema, rules.without_traversal()),
        ERLDConfig(schema, rules, traversal=TraversalConfig(2)),
        ERLDConfig(residents_schema(), rules),
    ):
        with pytest.raises(StaleStateError):
            resolve_incremental([], state, other)


def test_repeated_ids_refused(corpus, config):
    _, state = resolve_batch(corpus[:5], config)
    with pytest.raises(ValueError, match="already"):
        resolve_incremental(corpus[:1], state, config)
    with pytest.raises(ValueError, match="repeated"):
        resolve_incremental([corpus[6], corpus[6]], state, config)


def test_warm_cache_rerun_evaluates_nothing(corpus, config):
    cache = PairCache()
    _, first = resolve_batch(corpus, config, cache=cache)
    assert first.last_run.match_evaluations > 0
    _, second = resolve_batch(corpus, config, cache=cache)
    assert second.last_run.match_evaluations == 0
    assert second.last_run.cache_hits >= first.last_run.match_evaluations


def test_evaluations_bounded_by_co_bucketed_pairs(corpus, config):
    _, state = resolve_batch(corpus, config, audit=True)
    run = state.last_run
    assert run.match_evaluations <= run.co_bucketed_pairs
    assert run.match_evaluations == len(state.pair_cache)


@pytest.fixture(scope="module")
def generated():
    return generate(GeneratorConfig(num_seed_entities=150, rng_seed=11))


def test_generated_corpus_accounting(generated):
    docs, _ = generated
    cfg = ERLDConfig(residents_schema(), residents_rules())
    _, state = resolve_batch(docs, cfg, audit=True)
    run = state.last_run
    n = len(docs)
    assert run.match_evaluations <= run.co_bucketed_pairs
    assert run.match_evaluations <= run.bucket_pair_bound < n * (n - 1) // 2


def test_close_to_all_pairs_on_small_corpora():
    """Blocking loses little against comparing every pair."""
    cfg = ERLDConfig(residents_schema(), residents_rules())
    gaps = []
    for seed in range(5):
        docs, gold = generate(GeneratorConfig(num_seed_entities=75, rng_seed=seed))
        erld = pairwise_metrics(entity_partition(resolve_batch(docs, cfg)[0]), gold)
        base = pairwise_metrics(allpairs_baseline(docs, cfg)[0], gold)
        assert erld.precision == base.precision
        gaps.append(base.recall - erld.recall)
    assert sum(gaps) / len(gaps) <= 0.03, gaps


def test_incremental_split_close_to_batch(generated):
    docs, gold = generated
    cfg = ERLDConfig(residents_schema(), residents_rules())
    shuffled = docs[:]
    random.Random(4).shuffle(shuffled)
    cut = int(len(docs) * 0.95)
    full, _ = resolve_batch(docs, cfg)
    _, state = resolve_batch(shuffled[:cut], cfg)
    n_entities = len(state.entities)
    resolve_incremental(shuffled[cut:], state, cfg)
    state.check_invariants()
    inc = pairwise_metrics(state.doc_entity_map, gold)
    batch = pairwise_metrics(entity_partition(full), gold)
    assert abs(inc.f1 - batch.f1) <= 0.01
    assert state.last_run.entities_read < n_entities / 4


def test_reads_stay_inside_touched_buckets(generated):
    docs, _ = generated
    cfg = ERLDConfig(residents_schema(), residents_rules())
    cut = int(len(docs) * 0.95)
    old, new = docs[:cut], docs[cut:]
    _, state = resolve_batch(old, cfg)
    reachable = set()
    for d in new:
        for bid in document_bucket_ids(d, state.schema, state.lsh_params):
            reachable |= {state.doc_entity_map[i] for i in state.lsh_index.buckets.get(bid, ())}
    before = {eid: e for eid, e in state.entities.items()}
    resolve_incremental(new, state, cfg)
    touched_docs = set()
    for d in new:
        touched_docs |= state.traversal[d.id]
    reachable |= {e for i in touched_docs if i in before for e in [_old_entity(before, i)]}
    assert state.entity_reads <= reachable
    for eid, ent in before.items():
        if eid not in state.entity_reads:
            assert state.entities[eid] == ent


def _old_entity(entities, doc_id):
    return next(eid for eid, e in entities.items() if doc_id in e.members)
