"""Match functions: similarity metrics, attribute predicates, rule tables,
a linear scorer plug-in, and the pair cache shared across buckets."""

from __future__ import annotations

import hashlib
import json
import math
from collections import OrderedDict
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any, Protocol

from rapidfuzz.distance import JaroWinkler

from erld.model import SOFT, Document, SchemaConfig, SchemaError

# ---------------------------------------------------------------- metrics


def _tokens(s: str) -> frozenset[str]:
    return frozenset(s.lower().split())


def jaccard(s1: str, s2: str) -> float:
    a, b = _tokens(s1), _tokens(s2)
    if not a and not b:
        return 0.0
    return len(a & b) / len(a | b)


def overlap_coefficient(s1: str, s2: str) -> float:
    a, b = _tokens(s1), _tokens(s2)
    if not a or not b:
        return 0.0
    return len(a & b) / min(len(a), len(b))


def cosine(s1: str, s2: str) -> float:
    a, b = _tokens(s1), _tokens(s2)
    if not a or not b:
        return 0.0
    return len(a & b) / math.sqrt(len(a) * len(b))


def jaro_winkler(s1: str, s2: str) -> float:
    if not s1 and not s2:
        return 0.0
    return JaroWinkler.normalized_similarity(s1.lower(), s2.lower())


_SOUNDEX_CODES = {
    **dict.fromkeys("bfpv", "1"),
    **dict.fromkeys("cgjkqsxz", "2"),
    **dict.fromkeys("dt", "3"),
    "l": "4",
    **dict.fromkeys("mn", "5"),
    "r": "6",
}


def soundex_code(s: str) -> str:
    letters = [c for c in s.lower() if "a" <= c <= "z"]
    if not letters:
        return ""
    out = [letters[0].upper()]
    prev = _SOUNDEX_CODES.get(letters[0], "")
    for c in letters[1:]:
        code = _SOUNDEX_CODES.get(c, "")
        if code and code != prev:
            out.append(code)
            if len(out) == 4:
                break
        # h and w do not separate equal codes; vowels do
        if c not in "hw":
            prev = code
    return "".join(out).ljust(4, "0")


def soundex(s1: str, s2: str) -> float:
    c1, c2 = soundex_code(s1), soundex_code(s2)
    return 1.0 if c1 and c1 == c2 else 0.0


METRICS: dict[str, Callable[[str, str], float]] = {
    "jaccard": jaccard,
    "overlap": overlap_coefficient,
    "cosine": cosine,
    "jaro_winkler": jaro_winkler,
    "soundex": soundex,
}


def similarity(metric: str, s1: str, s2: str) -> float:
    try:
        fn = METRICS[metric]
    except KeyError:
        raise ValueError(f"unknown metric {metric!r}; choose from {sorted(METRICS)}") from None
    return fn(s1, s2)


# ---------------------------------------------------------------- items


class MatchItem:
    """What a match function compares: a (possibly merged) document, the
    original document ids it stands for, and the ids its members reach by
    reference traversal."""

    __slots__ = ("doc", "members", "reach", "origins", "key")

    def __init__(
        self,
        doc: Document,
        members: Iterable[str] | None = None,
        reach: Iterable[str] = (),
        origins: Iterable[str] = (),
    ):
        self.doc = doc
        self.members = frozenset(members) if members is not None else frozenset({doc.id})
        self.reach = frozenset(reach)
        self.origins = frozenset(origins)
        self.key = tuple(sorted(self.members))

    def __repr__(self) -> str:
        return f"MatchItem({'+'.join(self.key)})"


# ---------------------------------------------------------------- predicates


def _max_similarity(metric: Callable[[str, str], float], va: Iterable[str], vb: Iterable[str], stop: float) -> float:
    best = 0.0
    for x in va:
        for y in vb:
            s = metric(x, y)
            if s > best:
                best = s
                if best >= stop:
                    return best
    return best


def _linked(a: MatchItem, b: MatchItem) -> bool:
    return not a.reach.isdisjoint(b.members) or not b.reach.isdisjoint(a.members)


@dataclass(frozen=True)
class Predicate:
    """One conjunct. ``kind`` is ``exact``, ``similar`` or ``traversal``."""

    kind: str
    attribute: str | None = None
    metric: str | None = None
    threshold: float | None = None
    _fn: Callable = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind == "traversal":
            fn = _linked
        elif self.kind == "exact":
            attr = self.attribute

            def fn(a: MatchItem, b: MatchItem) -> bool:
                va = a.doc.attrs.get(attr)
                vb = b.doc.attrs.get(attr)
                return va is not None and vb is not None and not va.isdisjoint(vb)
        elif self.kind == "similar":
            attr, metric, threshold = self.attribute, METRICS[self.metric], self.threshold

            def fn(a: MatchItem, b: MatchItem) -> bool:
                va = a.doc.attrs.get(attr)
                vb = b.doc.attrs.get(attr)
                if va is None or vb is None:
                    return False
                return _max_similarity(metric, va, vb, threshold) >= threshold
        else:
            raise SchemaError(f"unknown predicate kind {self.kind!r}")
        object.__setattr__(self, "_fn", fn)

    def __call__(self, a: MatchItem, b: MatchItem) -> bool:
        return self._fn(a, b)

    @property
    def cost(self) -> int:
        return {"traversal": 0, "exact": 1}.get(self.kind, 2)

    def to_dict(self) -> dict[str, Any]:
        if self.kind == "traversal":
            return {"predicate": "traversal"}
        out: dict[str, Any] = {"predicate": self.kind, "attribute": self.attribute}
        if self.kind == "similar":
            out["metric"] = self.metric
            out["threshold"] = self.threshold
        return out


def predicate(kind: str, attr: str | None, a: MatchItem | Document, b: MatchItem | Document,
              metric: str = "jaro_winkler", threshold: float = 0.9) -> bool:
    """Evaluate one predicate directly; documents are wrapped as items."""
    a = a if isinstance(a, MatchItem) else MatchItem(a)
    b = b if isinstance(b, MatchItem) else MatchItem(b)
    if kind == "similar":
        return Predicate(kind, attr, metric, threshold)(a, b)
    return Predicate(kind, attr)(a, b)


DEFAULT_SIMILARITY: dict[str, tuple[str, float]] = {
    "name": ("jaro_winkler", 0.9),
    "address": ("jaccard", 0.6),
}
FALLBACK_SIMILARITY = ("jaro_winkler", 0.9)


class MatchFunction(Protocol):
    def __call__(self, a: MatchItem, b: MatchItem) -> bool: ...

    def to_dict(self) -> dict[str, Any]: ...


@dataclass(frozen=True)
class MatchRule:
    conjuncts: tuple[Predicate, ...]

    def __post_init__(self):
        if not self.conjuncts:
            raise SchemaError("a rule needs at least one conjunct")
        # cheap predicates first; AND is order-free
        object.__setattr__(self, "conjuncts", tuple(sorted(self.conjuncts, key=lambda p: p.cost)))

    def __call__(self, a: MatchItem, b: MatchItem) -> bool:
        for p in self.conjuncts:
            if not p._fn(a, b):
                return False
        return True

    @property
    def uses_traversal(self) -> bool:
        return any(p.kind == "traversal" for p in self.conjuncts)


@dataclass(frozen=True)
class RuleSet:
    """Disjunction of rules, each a conjunction of predicates."""

    rules: tuple[MatchRule, ...]
    names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if not self.rules:
            raise SchemaError("a rule set needs at least one rule")

    def __call__(self, a: MatchItem, b: MatchItem) -> bool:
        for rule in self.rules:
            if rule(a, b):
                return True
        return False

    def satisfied(self, a: MatchItem, b: MatchItem) -> list[int]:
        """Indices of the rules that hold for ``(a, b)``."""
        return [i for i, rule in enumerate(self.rules) if rule(a, b)]

    def without_traversal(self) -> RuleSet:
        kept = [(r, n) for r, n in zip(self.rules, self._names()) if not r.uses_traversal]
        return RuleSet(tuple(r for r, _ in kept), tuple(n for _, n in kept))

    def _names(self) -> tuple[str, ...]:
        return self.names or tuple(f"rule{i + 1}" for i in range(len(self.rules)))

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "rules",
            "rules": [
                {"name": name, "all": [p.to_dict() for p in rule.conjuncts]}
                for name, rule in zip(self._names(), self.rules)
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], schema: SchemaConfig) -> RuleSet:
        sim_cfg = {**{k: {"metric": m, "threshold": t} for k, (m, t) in DEFAULT_SIMILARITY.items()},
                   **data.get("similarity", {})}
        declared = {spec.name: spec for spec in schema.attributes}
        rules, names = [], []
        raw_rules = data.get("rules")
        if not raw_rules:
            raise SchemaError("rule config has no rules")
        for i, raw in enumerate(raw_rules):
            conj = raw.get("all", raw) if isinstance(raw, Mapping) else raw
            preds = [_predicate_from_config(c, declared, sim_cfg) for c in conj]
            rules.append(MatchRule(tuple(preds)))
            names.append(raw.get("name", f"rule{i + 1}") if isinstance(raw, Mapping) else f"rule{i + 1}")
        return cls(tuple(rules), tuple(names))


def _predicate_from_config(conj: Mapping[str, Any], declared: Mapping, sim_cfg: Mapping) -> Predicate:
    kind = conj.get("predicate", "same")
    if kind in ("traversal", "isInTraversalSet"):
        return Predicate("traversal")
    attr = conj.get("attribute")
    if attr not in declared:
        raise SchemaError(f"rule references unknown attribute {attr!r}")
    if kind == "same":
        kind = "similar" if declared[attr].match_role in (SOFT, None) else "exact"
    if kind == "exact":
        return Predicate("exact", attr)
    if kind != "similar":
        raise SchemaError(f"unknown predicate {kind!r}")
    defaults = sim_cfg.get(attr, {})
    metric = conj.get("metric", defaults.get("metric", FALLBACK_SIMILARITY[0]))
    threshold = float(conj.get("threshold", defaults.get("threshold", FALLBACK_SIMILARITY[1])))
    if metric not in METRICS:
        raise SchemaError(f"unknown metric {metric!r}")
    return Predicate("similar", attr, metric, threshold)


@dataclass(frozen=True)
class LinearThresholdScorer:
    """Pluggable classifier slot: a weighted sum of per-attribute similarity
    scores plus a bias; the pair matches when the sum is >= 0."""

    features: tuple[tuple[str, str], ...]
    weights: tuple[float, ...]
    bias: float

    def __post_init__(self):
        if len(self.features) != len(self.weights):
            raise SchemaError("one weight per feature")
        for _, metric in self.features:
            if metric not in METRICS:
                raise SchemaError(f"unknown metric {metric!r}")

    def feature_vector(self, a: MatchItem, b: MatchItem) -> list[float]:
        out = []
        for attr, metric in self.features:
            va, vb = a.doc.values(attr), b.doc.values(attr)
            out.append(_max_similarity(METRICS[metric], va, vb, 1.0) if va and vb else 0.0)
        return out

    def __call__(self, a: MatchItem, b: MatchItem) -> bool:
        score = self.bias + sum(w * f for w, f in zip(self.weights, self.feature_vector(a, b)))
        return score >= 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "linear",
            "features": [list(f) for f in self.features],
            "weights": list(self.weights),
            "bias": self.bias,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], schema: SchemaConfig) -> LinearThresholdScorer:
        declared = {spec.name for spec in schema.attributes}
        features = tuple((str(a), str(m)) for a, m in data["features"])
        for attr, _ in features:
            if attr not in declared:
                raise SchemaError(f"scorer references unknown attribute {attr!r}")
        return cls(features, tuple(float(w) for w in data["weights"]), float(data["bias"]))


def match_function_from_dict(data: Mapping[str, Any], schema: SchemaConfig) -> MatchFunction:
    kind = data.get("kind", "rules")
    if kind == "rules":
        return RuleSet.from_dict(data, schema)
    if kind == "linear":
        return LinearThresholdScorer.from_dict(data, schema)
    raise SchemaError(f"unknown match function kind {kind!r}")


def fingerprint(match_fn: MatchFunction) -> str:
    blob = json.dumps(match_fn.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


# ---------------------------------------------------------------- cache

PairKey = tuple[tuple[str, ...], tuple[str, ...]]


def pair_key(a: Sequence[str], b: Sequence[str]) -> PairKey:
    a, b = tuple(a), tuple(b)
    return (a, b) if a <= b else (b, a)


class PairCache:
    """Known matching and non-matching pairs, keyed by sorted member ids.

    Bounded: past ``capacity`` entries the least recently used one is dropped.
    """

    def __init__(self, capacity: int = 10**7):
        self.capacity = capacity
        self._entries: OrderedDict[PairKey, bool] = OrderedDict()

    def lookup(self, key: PairKey) -> bool | None:
        value = self._entries.get(key)
        if value is not None:
            self._entries.move_to_end(key)
        return value

    def record(self, key: PairKey, value: bool) -> None:
        self._entries[key] = value
        self._entries.move_to_end(key)
        while len(self._entries) > self.capacity:
            self._entries.popitem(last=False)

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: object) -> bool:
        return key in self._entries

    def __eq__(self, other: object) -> bool:
        return isinstance(other, PairCache) and list(self._entries.items()) == list(other._entries.items())

    def items(self):
        return self._entries.items()

    @property
    def matching(self) -> set[PairKey]:
        return {k for k, v in self._entries.items() if v}

    @property
    def non_matching(self) -> set[PairKey]:
        return {k for k, v in self._entries.items() if not v}


class Matcher:
    """A match function behind the pair cache, with evaluation counters."""

    def __init__(self, match_fn: MatchFunction, cache: PairCache | None = None):
        self.match_fn = match_fn
        self.cache = cache if cache is not None else PairCache()
        self.evaluations = 0
        self.cache_hits = 0
        self.evaluated: set[PairKey] = set()

    def __call__(self, a: MatchItem, b: MatchItem) -> bool:
        key = pair_key(a.key, b.key)
        cached = self.cache.lookup(key)
        if cached is not None:
            self.cache_hits += 1
            return cached
        result = bool(self.match_fn(a, b))
        self.evaluations += 1
        self.evaluated.add(key)
        self.cache.record(key, result)
        return result


def match(a: MatchItem, b: MatchItem, rules: MatchFunction, cache: PairCache | None = None) -> bool:
    if a.key == b.key:
        raise ValueError("match needs two distinct items")
    return Matcher(rules, cache)(a, b)
