"""Diffusion series and collections.

A node is one user acting on the topic in one slot. Its parents are the
nodes, one slot earlier, of the user's friends. A parentless node opens a
series; a node whose parents belong to several series merges them, so the
series of a collection are the weakly connected components of the node DAG.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

from .errors import ConfigurationError
from .events import topic_actors
from .graph import SocialGraph
from .schema import UserId

log = logging.getLogger(__name__)

NodeKey = tuple  # (user, slot)


@dataclass(frozen=True)
class DiffusionNode:
    user: UserId
    slot: int
    parents: frozenset = frozenset()
    action_times: tuple = ()

    @property
    def key(self) -> NodeKey:
        return (self.user, self.slot)


class DiffusionSeries:
    """One weakly connected DAG of nodes spread over consecutive slots."""

    __slots__ = ("nodes", "_children")

    def __init__(self, nodes: Iterable[DiffusionNode]):
        self.nodes: dict = {n.key: n for n in sorted(nodes, key=lambda n: (n.slot, n.user))}
        children = {k: set() for k in self.nodes}
        for n in self.nodes.values():
            for p in n.parents:
                children[p].add(n.key)
        self._children = {k: frozenset(v) for k, v in children.items()}

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self) -> Iterator[DiffusionNode]:
        return iter(self.nodes.values())

    def slots(self) -> list[int]:
        return sorted({n.slot for n in self.nodes.values()})

    def nodes_at(self, slot: int) -> list[DiffusionNode]:
        return [n for n in self.nodes.values() if n.slot == slot]

    def children(self, key: NodeKey) -> frozenset:
        return self._children[key]

    def edges(self) -> list[tuple[NodeKey, NodeKey]]:
        return [(p, n.key) for n in self.nodes.values() for p in sorted(n.parents, key=_key_order)]

    def seeds(self) -> list[DiffusionNode]:
        return [n for n in self.nodes.values() if not n.parents]

    def users(self) -> set:
        return {n.user for n in self.nodes.values()}

    def first_key(self) -> NodeKey:
        return next(iter(self.nodes))


def _key_order(key: NodeKey):
    return (key[1], key[0])


@dataclass
class DiffusionCollection:
    topic: str
    horizon: int
    series: tuple = field(default_factory=tuple)

    def nodes(self) -> Iterator[DiffusionNode]:
        for s in self.series:
            yield from s

    @property
    def n_nodes(self) -> int:
        return sum(len(s) for s in self.series)

    def users(self) -> set:
        out = set()
        for s in self.series:
            out |= s.users()
        return out

    def nodes_at(self, slot: int) -> list[DiffusionNode]:
        return [n for s in self.series for n in s.nodes_at(slot)]

    def slot_counts(self, horizon: int | None = None) -> list[int]:
        """Node count per slot ``1..horizon``."""
        horizon = self.horizon if horizon is None else horizon
        counts = [0] * horizon
        for n in self.nodes():
            if 1 <= n.slot <= horizon:
                counts[n.slot - 1] += 1
        return counts

    def is_empty(self) -> bool:
        return not self.series

    def signature(self) -> tuple:
        """Hashable canonical form, used for equality checks."""
        return tuple(
            tuple((n.user, n.slot, tuple(sorted(n.parents, key=_key_order))) for n in s) for s in self.series
        )


class _UnionFind:
    def __init__(self):
        self.parent: dict = {}

    def add(self, x):
        self.parent.setdefault(x, x)

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        # keep the earliest key as representative so the result is order-free
        keep, drop = (ra, rb) if _key_order(ra) <= _key_order(rb) else (rb, ra)
        self.parent[drop] = keep
        return keep


class CollectionBuilder:
    """Incremental slot-by-slot construction of a diffusion collection."""

    def __init__(self, graph: SocialGraph, topic: str):
        self.graph = graph
        self.topic = topic
        self._nodes: dict = {}
        self._by_slot: dict[int, dict] = {}
        self._uf = _UnionFind()
        self.last_slot = 0

    @classmethod
    def from_collection(cls, graph: SocialGraph, collection: DiffusionCollection) -> "CollectionBuilder":
        b = cls(graph, collection.topic)
        for s in collection.series:
            first = None
            for n in s:
                b._nodes[n.key] = n
                b._by_slot.setdefault(n.slot, {})[n.user] = n
                b._uf.add(n.key)
                if first is None:
                    first = n.key
                else:
                    b._uf.union(first, n.key)
        b.last_slot = collection.horizon
        return b

    def add_slot(self, slot: int, actors: Mapping[UserId, tuple]) -> None:
        """Add nodes for ``actors`` (``{user: action times}``) at ``slot``."""
        if slot <= self.last_slot and slot in self._by_slot:
            raise ConfigurationError(f"slot {slot} already built")
        prev = self._by_slot.get(slot - 1, {})
        here = {}
        for user in sorted(actors):
            if user not in self.graph:
                continue
            parents = frozenset((v, slot - 1) for v in self.graph.neighbors(user) if v in prev)
            node = DiffusionNode(user, slot, parents, tuple(sorted(actors[user])))
            self._nodes[node.key] = node
            here[user] = node
            self._uf.add(node.key)
            for p in parents:
                self._uf.union(p, node.key)
        if here:
            self._by_slot[slot] = here
        self.last_slot = max(self.last_slot, slot)

    def collection(self, horizon: int | None = None) -> DiffusionCollection:
        groups: dict = {}
        for key, node in self._nodes.items():
            groups.setdefault(self._uf.find(key), []).append(node)
        series = [DiffusionSeries(nodes) for nodes in groups.values()]
        series.sort(key=lambda s: _key_order(s.first_key()))
        return DiffusionCollection(self.topic, self.last_slot if horizon is None else horizon, tuple(series))


def build_collection(graph: SocialGraph, slotted_events: Mapping[int, Mapping], topic: str, horizon: int) -> DiffusionCollection:
    """Diffusion collection of ``topic`` over slots ``1..horizon``.

    ``slotted_events`` is the output of :func:`events.slice_events`; events
    not carrying ``topic`` and users outside ``graph`` are ignored.
    """
    if horizon < 1:
        raise ConfigurationError(f"horizon must be >= 1, got {horizon}")
    available = max(slotted_events) if slotted_events else 0
    if horizon > available:
        log.warning("horizon %d exceeds the %d available slot(s); later slots are empty", horizon, available)
    b = CollectionBuilder(graph, topic)
    for m in range(1, horizon + 1):
        b.add_slot(m, topic_actors(slotted_events, topic, m))
    b.last_slot = horizon
    return b.collection(horizon)


def topic_active_users(graph: SocialGraph, slotted_events: Mapping[int, Mapping], topic: str, first: int, last: int) -> set:
    """Users of ``graph`` posting on ``topic`` in slots ``first..last``."""
    out = set()
    for m in range(first, last + 1):
        out |= {u for u in topic_actors(slotted_events, topic, m) if u in graph}
    return out


def _fmt_key(key: NodeKey) -> str:
    return f"{key[0]}@{key[1]}"


def collection_report(collection: DiffusionCollection) -> str:
    """Delimited text listing every node: series id, slot, user, parents."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["topic", "series", "slot", "user", "parents"])
    for i, s in enumerate(collection.series):
        for n in s:
            parents = ";".join(_fmt_key(p) for p in sorted(n.parents, key=_key_order))
            w.writerow([collection.topic, i, n.slot, n.user, parents])
    return buf.getvalue()
