"""Consolidation of partial entities via connected components."""

from __future__ import annotations

from collections.abc import Hashable, Iterable

from erld.index import PrimaryKeyStore
from erld.model import Entity, merge


class DisjointSets:
    """Union-find with path compression and union by size."""

    def __init__(self, items: Iterable[Hashable] = ()):
        self._parent: dict = {}
        self._size: dict = {}
        for item in items:
            self.add(item)

    def add(self, item: Hashable) -> None:
        if item not in self._parent:
            self._parent[item] = item
            self._size[item] = 1

    def __contains__(self, item: object) -> bool:
        return item in self._parent

    def __len__(self) -> int:
        return len(self._parent)

    def find(self, item: Hashable) -> Hashable:
        parent = self._parent
        root = item
        while parent[root] != root:
            root = parent[root]
        while parent[item] != root:
            parent[item], item = root, parent[item]
        return root

    def union(self, a: Hashable, b: Hashable) -> Hashable:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self._size[ra] < self._size[rb]:
            ra, rb = rb, ra
        self._parent[rb] = ra
        self._size[ra] += self._size[rb]
        return ra

    def groups(self) -> list[frozenset]:
        out: dict = {}
        for item in self._parent:
            out.setdefault(self.find(item), set()).add(item)
        return sorted((frozenset(g) for g in out.values()), key=min)


def edges_from_partial_entity(members: Iterable[str]) -> list[tuple[str, str]]:
    """Star edges from the smallest member to every other member."""
    ordered = sorted(members)
    if not ordered:
        raise ValueError("partial entity has no members")
    centre = ordered[0]
    return [(centre, other) for other in ordered[1:]]


def connected_components(edges: Iterable[tuple[str, str]], nodes: Iterable[str]) -> list[frozenset[str]]:
    sets = DisjointSets(nodes)
    for a, b in edges:
        if a not in sets or b not in sets:
            missing = a if a not in sets else b
            raise KeyError(f"edge endpoint {missing!r} is not a known node")
        sets.union(a, b)
    return sets.groups()


def entity_id_for(members: Iterable[str]) -> str:
    return "E:" + min(members)


def consolidate(partition: Iterable[Iterable[str]], pk: PrimaryKeyStore) -> list[Entity]:
    """One merged entity per class, id ``E:<smallest member id>``."""
    entities = []
    for group in partition:
        members = frozenset(group)
        eid = entity_id_for(members)
        merged = merge((pk[d] for d in sorted(members)), doc_id=eid)
        entities.append(Entity(eid, merged, members))
    return sorted(entities, key=lambda e: e.id)
