import random

from hypothesis import given, settings
from hypothesis import strategies as st

from erld.index import InvertedIndex, build_indexes, search_referential, tokenize_referential
from erld.model import Document, load_schema
from tests.conftest import DATA, LABELS

SCHEMA = load_schema(DATA / "sample_schema.json")


def test_implicit_value_splits_on_punctuation():
    assert tokenize_referential("Driving License ID:DL77", "referential-implicit") == {"Driving", "License", "ID", "DL77"}


def test_explicit_value_is_one_token():
    assert tokenize_referential(" DL123 ", "referential-explicit") == {"DL123"}


def test_empty_values_give_no_tokens():
    assert tokenize_referential("", "referential-implicit") == set()
    assert tokenize_referential("   ", "referential-explicit") == set()


def test_case_is_preserved():
    assert tokenize_referential("(pan11), Ref", "referential-implicit") == {"pan11", "Ref"}


def test_fixture_lookups(corpus, schema):
    pk, inv = build_indexes(corpus, schema)
    assert len(pk) == 11
    assert LABELS["d11"] in search_referential("BAN91", inv)
    assert LABELS["d6"] in search_referential("DL77", inv)
    assert search_referential("VOT22", inv) == {LABELS["d1"], LABELS["d2"], LABELS["d3"]}
    assert search_referential("nope", inv) == frozenset()


def test_empty_corpus(schema):
    pk, inv = build_indexes([], schema)
    assert len(pk) == 0 and len(inv) == 0


def _random_docs(rng: random.Random, n: int) -> list[Document]:
    keys = [f"PAN{i}" for i in range(n)]
    docs = []
    for i in range(n):
        attrs = {"pan_no": {str(i)}, "name": {"x"}}
        refs = rng.sample(keys, rng.randrange(0, 3))
        if refs:
            attrs["proof_id"] = set(refs)
        if rng.random() < 0.5:
            attrs["doc_details"] = {f"see ({rng.choice(keys)}); also {rng.choice(keys)}."}
        docs.append(Document(keys[i], "PAN", attrs))
    return docs


def _scan(docs, schema, token):
    """Every document whose key or referential content yields ``token``."""
    hits = set()
    for d in docs:
        if d.id == token:
            hits.add(d.id)
        for name, vals in d.attrs.items():
            role = schema.spec(d.doc_type, name).ref_role
            for v in vals:
                if role == "referential-explicit" and v.strip() == token:
                    hits.add(d.id)
                if role == "referential-implicit":
                    words = [w.strip(".,:;()\"'") for w in v.replace(":", " ").replace("(", " ").split()]
                    if token in words:
                        hits.add(d.id)
    return hits


def test_index_matches_linear_scan(schema):
    rng = random.Random(3)
    docs = _random_docs(rng, 50)
    _, inv = build_indexes(docs, schema)
    tokens = set(inv.postings) | {"unknown", "see"}
    for t in tokens:
        assert inv.search(t) == _scan(docs, schema, t), t


@settings(max_examples=30, deadline=None)
@given(st.randoms(use_true_random=False), st.integers(1, 30))
def test_build_ignores_order_and_supports_incremental_add(rnd, cut):
    schema = SCHEMA
    docs = _random_docs(rnd, 30)
    _, full = build_indexes(docs, schema)
    shuffled = docs[:]
    rnd.shuffle(shuffled)
    _, again = build_indexes(shuffled, schema)
    assert again == full
    _, part = build_indexes(docs[:cut], schema)
    for d in docs[cut:]:
        part.add(d, schema)
    assert part == full


def test_delimiters_are_configurable(schema):
    inv = InvertedIndex(delimiters="/")
    d = Document("PAN1", "PAN", {"pan_no": {"1"}, "doc_details": {"a/DL77:x"}})
    inv.add(d, schema)
    assert inv.search("DL77:x") == {"PAN1"}
