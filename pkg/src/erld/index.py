"""Primary-key store and the inverted index over referential content."""

from __future__ import annotations

import re
from collections.abc import Iterable, Iterator
from functools import lru_cache

from erld.model import REF_EXPLICIT, REF_IMPLICIT, Document, SchemaConfig

DEFAULT_DELIMITERS = ".,:;()\"'"


@lru_cache(maxsize=32)
def _splitter(delimiters: str) -> re.Pattern:
    return re.compile(r"[\s" + re.escape(delimiters) + r"]+")


def tokenize_referential(value: str, role: str, delimiters: str = DEFAULT_DELIMITERS) -> set[str]:
    """Tokens a referential value contributes to the inverted index.

    An explicit reference is the whole trimmed value. An implicit one is split
    on whitespace and the delimiter characters, so ``"ID:DL77"`` yields
    ``DL77``. Case is preserved; matching is exact.
    """
    value = value.strip()
    if not value:
        return set()
    if role == REF_EXPLICIT:
        return {value}
    if role != REF_IMPLICIT:
        raise ValueError(f"not a referential role: {role!r}")
    return {tok for tok in _splitter(delimiters).split(value) if tok}


class PrimaryKeyStore:
    """Document id -> document."""

    def __init__(self, docs: Iterable[Document] = ()):
        self._docs: dict[str, Document] = {}
        for doc in docs:
            self.add(doc)

    def add(self, doc: Document) -> None:
        if doc.id in self._docs:
            raise ValueError(f"duplicate document id {doc.id!r}")
        self._docs[doc.id] = doc

    def get(self, doc_id: str) -> Document | None:
        return self._docs.get(doc_id)

    def __getitem__(self, doc_id: str) -> Document:
        return self._docs[doc_id]

    def __contains__(self, doc_id: object) -> bool:
        return doc_id in self._docs

    def __len__(self) -> int:
        return len(self._docs)

    def __iter__(self) -> Iterator[str]:
        return iter(self._docs)

    def documents(self) -> Iterator[Document]:
        return iter(self._docs.values())

    def __eq__(self, other: object) -> bool:
        return isinstance(other, PrimaryKeyStore) and self._docs == other._docs


class InvertedIndex:
    """Token -> posting set of document ids.

    Tokens come from explicit and implicit referential values, plus each
    document's own primary key so upstream traversal can find referrers by key.
    """

    def __init__(self, delimiters: str = DEFAULT_DELIMITERS):
        self.delimiters = delimiters
        self.postings: dict[str, set[str]] = {}

    def document_tokens(self, doc: Document, schema: SchemaConfig) -> set[str]:
        tokens = {doc.id}
        for value, role in schema.referential_values(doc):
            tokens |= tokenize_referential(value, role, self.delimiters)
        return tokens

    def add(self, doc: Document, schema: SchemaConfig) -> None:
        for token in self.document_tokens(doc, schema):
            self.postings.setdefault(token, set()).add(doc.id)

    def search(self, token: str) -> frozenset[str]:
        return frozenset(self.postings.get(token, ()))

    def __len__(self) -> int:
        return len(self.postings)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, InvertedIndex) and self.postings == other.postings


def build_indexes(docs: Iterable[Document], schema: SchemaConfig) -> tuple[PrimaryKeyStore, InvertedIndex]:
    pk = PrimaryKeyStore()
    inv = InvertedIndex(schema.implicit_delimiters)
    for doc in docs:
        pk.add(doc)
        inv.add(doc, schema)
    return pk, inv


def search_referential(token: str, index: InvertedIndex) -> frozenset[str]:
    return index.search(token)
