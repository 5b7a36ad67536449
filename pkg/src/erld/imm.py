"""R-Swoosh iterative match-merge over the items of one bucket."""

from __future__ import annotations

from collections import deque
from collections.abc import Callable, Iterable
from dataclasses import dataclass

from erld.matching import MatchItem
from erld.model import Document, merge


@dataclass(frozen=True)
class PartialEntity:
    """Result of resolving one bucket. ``origin_entities`` lists previously
    resolved entities absorbed in incremental mode."""

    merged: Document
    members: frozenset[str]
    origin_entities: frozenset[str] = frozenset()


def merge_items(a: MatchItem, b: MatchItem) -> MatchItem:
    members = a.members | b.members
    return MatchItem(
        merge([a.doc, b.doc], doc_id="merge(" + "+".join(sorted(members)) + ")"),
        members=members,
        reach=a.reach | b.reach,
        origins=a.origins | b.origins,
    )


def rswoosh(
    items: Iterable[MatchItem],
    match: Callable[[MatchItem, MatchItem], bool],
    merge_fn: Callable[[MatchItem, MatchItem], MatchItem] = merge_items,
) -> list[PartialEntity]:
    """Resolve ``items`` in the given order.

    ``pending`` plays I and ``resolved`` plays I': each popped item is compared
    with every resolved one; on the first match the partner leaves
    ``resolved`` and the merge re-enters ``pending``.
    """
    pending = deque(items)
    keys = [it.key for it in pending]
    if len(set(keys)) != len(keys):
        raise ValueError("bucket items must be distinct")
    resolved: list[MatchItem] = []
    while pending:
        current = pending.popleft()
        for i, other in enumerate(resolved):
            if match(current, other):
                del resolved[i]
                pending.append(merge_fn(current, other))
                break
        else:
            resolved.append(current)
    return [PartialEntity(it.doc, it.members, it.origins) for it in resolved]
