"""Documents, attribute roles, entities, merging and corpus parsing."""

from __future__ import annotations

import hashlib
import json
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

SOFT = "soft"
HARD = "hard"
UNIQUE = "unique"
REF_EXPLICIT = "referential-explicit"
REF_IMPLICIT = "referential-implicit"

MATCH_ROLES = frozenset({SOFT, HARD, UNIQUE})
REF_ROLES = frozenset({REF_EXPLICIT, REF_IMPLICIT})
ALL_ROLES = MATCH_ROLES | REF_ROLES


class SchemaError(ValueError):
    """Invalid schema or rule configuration."""


class CorpusError(ValueError):
    """A record or the corpus as a whole violates the document contract."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


@dataclass(frozen=True)
class AttributeSpec:
    """Schema role(s) of one attribute.

    ``roles`` holds at most one of soft/hard/unique plus at most one
    referential role, so a phone number can be both hard and an explicit
    reference to a phone-connection document.
    """

    name: str
    roles: frozenset[str]
    domain: str | None = None

    def __post_init__(self):
        roles = frozenset(self.roles)
        object.__setattr__(self, "roles", roles)
        if not roles:
            raise SchemaError(f"attribute {self.name!r} has no role")
        unknown = roles - ALL_ROLES
        if unknown:
            raise SchemaError(f"attribute {self.name!r}: unknown role(s) {sorted(unknown)}")
        if len(roles & MATCH_ROLES) > 1:
            raise SchemaError(f"attribute {self.name!r}: at most one of soft/hard/unique")
        if len(roles & REF_ROLES) > 1:
            raise SchemaError(f"attribute {self.name!r}: at most one referential role")

    @property
    def match_role(self) -> str | None:
        found = self.roles & MATCH_ROLES
        return next(iter(found)) if found else None

    @property
    def ref_role(self) -> str | None:
        found = self.roles & REF_ROLES
        return next(iter(found)) if found else None

    @property
    def is_hard(self) -> bool:
        # unique values are compared exactly as well
        return bool(self.roles & {HARD, UNIQUE})

    @property
    def is_unique(self) -> bool:
        return UNIQUE in self.roles

    @property
    def is_referential(self) -> bool:
        return bool(self.roles & REF_ROLES)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"name": self.name, "roles": sorted(self.roles)}
        if self.domain is not None:
            out["domain"] = self.domain
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> AttributeSpec:
        roles = data.get("roles", data.get("role"))
        if roles is None:
            raise SchemaError(f"attribute {data.get('name')!r} has no role")
        if isinstance(roles, str):
            roles = [roles]
        return cls(name=data["name"], roles=frozenset(roles), domain=data.get("domain"))


_DEFAULT_SOFT = AttributeSpec("*", frozenset({SOFT}))


@dataclass(frozen=True)
class SchemaConfig:
    """Attribute roles per document type and the primary-key rule.

    ``primary_keys`` maps a document type to the unique attribute whose value,
    prefixed with the type tag, forms the document id (``DL`` + ``77``).
    Attributes the schema does not mention are treated as soft.
    """

    attributes: tuple[AttributeSpec, ...]
    document_types: tuple[str, ...]
    primary_keys: Mapping[str, str]
    implicit_delimiters: str = ".,:;()\"'"
    _lookup: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(self.attributes))
        object.__setattr__(self, "document_types", tuple(self.document_types))
        object.__setattr__(self, "primary_keys", dict(self.primary_keys))
        lookup: dict[tuple[str | None, str], AttributeSpec] = {}
        for spec in self.attributes:
            key = (spec.domain, spec.name)
            if key in lookup:
                raise SchemaError(f"attribute {spec.name!r} declared twice for domain {spec.domain!r}")
            if spec.domain is not None and spec.domain not in self.document_types:
                raise SchemaError(f"attribute {spec.name!r} scoped to unknown type {spec.domain!r}")
            lookup[key] = spec
        object.__setattr__(self, "_lookup", lookup)
        for doc_type in self.document_types:
            if doc_type not in self.primary_keys:
                raise SchemaError(f"no primary-key rule for document type {doc_type!r}")
        for doc_type, attr in self.primary_keys.items():
            if doc_type not in self.document_types:
                raise SchemaError(f"primary-key rule for unknown type {doc_type!r}")
            if not self.spec(doc_type, attr).is_unique:
                raise SchemaError(f"primary key {attr!r} of {doc_type!r} is not a unique attribute")

    def spec(self, doc_type: str, name: str) -> AttributeSpec:
        found = self._lookup.get((doc_type, name)) or self._lookup.get((None, name))
        if found is None:
            return AttributeSpec(name, _DEFAULT_SOFT.roles)
        return found

    def referential_values(self, doc: Document) -> Iterator[tuple[str, str]]:
        """Yield ``(value, role)`` for every referential value of ``doc``."""
        for name, values in doc.attrs.items():
            role = self.spec(doc.doc_type, name).ref_role
            if role is None:
                continue
            for value in values:
                yield value, role

    def explicit_references(self, doc: Document) -> set[str]:
        return {v for v, role in self.referential_values(doc) if role == REF_EXPLICIT}

    def to_dict(self) -> dict[str, Any]:
        return {
            "attributes": [a.to_dict() for a in self.attributes],
            "document_types": list(self.document_types),
            "primary_keys": dict(sorted(self.primary_keys.items())),
            "implicit_delimiters": self.implicit_delimiters,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> SchemaConfig:
        try:
            attributes = [AttributeSpec.from_dict(a) for a in data["attributes"]]
            return cls(
                attributes=tuple(attributes),
                document_types=tuple(data["document_types"]),
                primary_keys=dict(data["primary_keys"]),
                implicit_delimiters=data.get("implicit_delimiters", cls.implicit_delimiters),
            )
        except KeyError as exc:
            raise SchemaError(f"schema config missing key {exc}") from None

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True)
class Document:
    """A multi-valued attribute record. Values are sets; order never matters."""

    id: str
    doc_type: str
    attrs: Mapping[str, frozenset[str]]

    def __post_init__(self):
        attrs = {k: frozenset(v) for k, v in self.attrs.items() if v}
        object.__setattr__(self, "attrs", attrs)

    def values(self, name: str) -> frozenset[str]:
        return self.attrs.get(name, frozenset())


@dataclass(frozen=True)
class Entity:
    id: str
    merged: Document
    members: frozenset[str]


def merge(docs: Iterable[Document], doc_id: str | None = None) -> Document:
    """Attribute-wise union of ``docs``.

    The result gets a fresh id (``merge(a+b+...)`` over the sorted input ids
    unless ``doc_id`` is given) and the union of the type tags, joined by
    ``|``.
    """
    docs = list(docs)
    if not docs:
        raise ValueError("merge needs at least one document")
    attrs: dict[str, set[str]] = {}
    types: set[str] = set()
    for doc in docs:
        types.update(doc.doc_type.split("|"))
        for name, values in doc.attrs.items():
            attrs.setdefault(name, set()).update(values)
    if doc_id is None:
        doc_id = "merge(" + "+".join(sorted(d.id for d in docs)) + ")"
    return Document(doc_id, "|".join(sorted(types)), attrs)


def _as_values(raw: Any) -> list[str]:
    if raw is None:
        return []
    if isinstance(raw, (list, tuple, set, frozenset)):
        return [str(v) for v in raw]
    return [str(raw)]


def parse_record(record: Mapping[str, Any], schema: SchemaConfig, line: int | None = None) -> Document:
    doc_type = record.get("type")
    if doc_type not in schema.primary_keys:
        raise CorpusError(f"unknown document type {doc_type!r}", line)
    raw_attrs = record.get("attrs") or {}
    if not isinstance(raw_attrs, Mapping):
        raise CorpusError("'attrs' must be an object", line)
    attrs: dict[str, set[str]] = {}
    for name, raw in raw_attrs.items():
        values = {v.strip() for v in _as_values(raw)}
        values.discard("")
        if not values:
            continue
        if schema.spec(doc_type, name).is_unique and len(values) > 1:
            raise CorpusError(f"unique attribute {name!r} has {len(values)} values", line)
        attrs[name] = values
    key_attr = schema.primary_keys[doc_type]
    key = attrs.get(key_attr)
    if not key:
        raise CorpusError(f"missing primary key attribute {key_attr!r}", line)
    return Document(doc_type + next(iter(key)), doc_type, attrs)


def parse_corpus(records: Iterable[Mapping[str, Any]], schema: SchemaConfig) -> list[Document]:
    """Build documents from raw records; record numbering starts at 1."""
    docs: list[Document] = []
    seen: dict[str, int] = {}
    for line, record in enumerate(records, start=1):
        doc = parse_record(record, schema, line)
        if doc.id in seen:
            raise CorpusError(f"duplicate document id {doc.id!r} (lines {seen[doc.id]} and {line})")
        seen[doc.id] = line
        docs.append(doc)
    return docs


def document_to_record(doc: Document) -> dict[str, Any]:
    return {"type": doc.doc_type, "attrs": {k: sorted(v) for k, v in sorted(doc.attrs.items())}}


def read_jsonl(path: str | Path) -> Iterator[dict[str, Any]]:
    with open(path, encoding="utf-8") as fh:
        for line, text in enumerate(fh, start=1):
            if not text.strip():
                continue
            try:
                yield json.loads(text)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"invalid JSON: {exc.msg}", line) from None


def read_corpus(path: str | Path, schema: SchemaConfig) -> list[Document]:
    return parse_corpus(read_jsonl(path), schema)


def write_corpus(docs: Iterable[Document], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(document_to_record(doc), sort_keys=True) + "\n")


def load_json(path: str | Path) -> Any:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def load_schema(path: str | Path) -> SchemaConfig:
    return SchemaConfig.from_dict(load_json(path))
