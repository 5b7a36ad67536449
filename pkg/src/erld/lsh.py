"""MinHash signatures, banded bucket ids and the bucket table."""

from __future__ import annotations

import hashlib
import random
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from erld.model import Document, SchemaConfig

MERSENNE_31 = 2**31 - 1


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    # deterministic Miller-Rabin for n < 3.3e24
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41):
        if a % n == 0:
            continue
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


@dataclass(frozen=True)
class LshParams:
    """``m`` minhashes per bucket id, ``n`` bucket ids per document.

    ``coefficients`` holds the m*n ``(a, b)`` pairs in (band, row) order; build
    them with :meth:`create` so they follow from ``rng_seed``.
    """

    m: int
    n: int
    p: int
    rng_seed: int
    coefficients: tuple[tuple[int, int], ...]
    _a: np.ndarray = field(init=False, repr=False, compare=False)
    _b: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError("m and n must be >= 1")
        if not _is_prime(self.p):
            raise ValueError(f"p={self.p} is not prime")
        if self.p >= 2**31:
            # keeps (a*x + b) inside int64
            raise ValueError("p must be below 2**31")
        coeffs = tuple((int(a), int(b)) for a, b in self.coefficients)
        if len(coeffs) != self.m * self.n:
            raise ValueError(f"need {self.m * self.n} (a, b) pairs, got {len(coeffs)}")
        if len(set(coeffs)) != len(coeffs):
            raise ValueError("(a, b) pairs must be distinct")
        if any(a % self.p == 0 for a, _ in coeffs):
            raise ValueError("a must be non-zero mod p")
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "_a", np.array([a for a, _ in coeffs], dtype=np.int64))
        object.__setattr__(self, "_b", np.array([b for _, b in coeffs], dtype=np.int64))

    @classmethod
    def create(cls, m: int = 3, n: int = 6, rng_seed: int = 7, p: int = MERSENNE_31) -> LshParams:
        rng = random.Random(rng_seed)
        pairs: list[tuple[int, int]] = []
        seen: set[tuple[int, int]] = set()
        while len(pairs) < m * n:
            pair = (rng.randrange(1, p), rng.randrange(0, p))
            if pair not in seen:
                seen.add(pair)
                pairs.append(pair)
        return cls(m, n, p, rng_seed, tuple(pairs))

    def to_dict(self) -> dict[str, Any]:
        return {
            "m": self.m,
            "n": self.n,
            "p": self.p,
            "rng_seed": self.rng_seed,
            "coefficients": [list(c) for c in self.coefficients],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> LshParams:
        return cls(data["m"], data["n"], data["p"], data["rng_seed"], tuple(tuple(c) for c in data["coefficients"]))


def token_id(token: str, p: int = MERSENNE_31) -> int:
    """Stable integer for a word, independent of corpus order."""
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % p


def word_set(doc: Document, schema: SchemaConfig, p: int = MERSENNE_31) -> frozenset[int]:
    """Integer ids of the lowercased words in the non-referential values."""
    words: set[str] = set()
    for name, values in doc.attrs.items():
        if schema.spec(doc.doc_type, name).is_referential:
            continue
        for value in values:
            words.update(value.lower().split())
    return frozenset(token_id(w, p) for w in words)


def minhash_signature(tokens: Iterable[int], params: LshParams) -> np.ndarray:
    """Row k is ``min((a_k * x + b_k) mod p)`` over the tokens."""
    x = np.fromiter(tokens, dtype=np.int64)
    if x.size == 0:
        raise ValueError("cannot minhash an empty token set")
    hashed = (params._a[:, None] * x[None, :] + params._b[:, None]) % params.p
    return hashed.min(axis=1)


def bucket_ids(sig: np.ndarray, params: LshParams) -> list[str]:
    """One id per band: ``"<band>:" + "-".join(its m minhashes)``."""
    if len(sig) != params.m * params.n:
        raise ValueError(f"signature length {len(sig)} != m*n = {params.m * params.n}")
    m = params.m
    return [f"{j}:" + "-".join(str(int(v)) for v in sig[j * m:(j + 1) * m]) for j in range(params.n)]


def document_bucket_ids(doc: Document, schema: SchemaConfig, params: LshParams) -> list[str]:
    """Bucket ids of ``doc``; a document with no words gets a private bucket."""
    tokens = word_set(doc, schema, params.p)
    if not tokens:
        return [f"solo:{doc.id}"]
    return bucket_ids(minhash_signature(tokens, params), params)


class LshIndex:
    """Bucket id -> ids hashed or dragged (via traversal sets) into it."""

    def __init__(self):
        self.buckets: dict[str, set[str]] = {}

    def add(self, bucket_id: str, ids: Iterable[str]) -> None:
        self.buckets.setdefault(bucket_id, set()).update(ids)

    def get(self, bucket_id: str) -> frozenset[str]:
        return frozenset(self.buckets.get(bucket_id, ()))

    def __contains__(self, bucket_id: object) -> bool:
        return bucket_id in self.buckets

    def __len__(self) -> int:
        return len(self.buckets)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, LshIndex) and self.buckets == other.buckets

    def members(self) -> set[str]:
        out: set[str] = set()
        for ids in self.buckets.values():
            out |= ids
        return out


def assign_buckets(
    docs: Iterable[Document],
    traversal: Mapping[str, Iterable[str]],
    schema: SchemaConfig,
    params: LshParams,
    index: LshIndex | None = None,
) -> tuple[LshIndex, dict[str, list[str]]]:
    """Hash every document and put it, with its traversal set, in its buckets.

    Returns the index and the bucket ids chosen for each document.
    """
    index = index if index is not None else LshIndex()
    chosen: dict[str, list[str]] = {}
    for doc in docs:
        ids = document_bucket_ids(doc, schema, params)
        chosen[doc.id] = ids
        group = {doc.id, *traversal.get(doc.id, ())}
        for bid in ids:
            index.add(bid, group)
    return index, chosen
