"""Friend graph storage, file ingestion and attribute-filtered subgraphs."""

from __future__ import annotations

import csv
import json
import logging
from collections import Counter
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import ConfigurationError, ParseError, ValidationError
from .schema import ATTRIBUTES, UserId, UserRecord, parse_attribute_value

log = logging.getLogger(__name__)

_EDGE_HEADERS = {("src", "dst"), ("source", "target"), ("u", "v"), ("user", "friend")}


class SocialGraph:
    """Undirected friend graph with per-user attribute records.

    Immutable after construction; safe to share between workers.
    """

    __slots__ = ("_users", "_adj", "_n_edges", "_n_components")

    def __init__(self, users: Mapping[UserId, UserRecord], adjacency: Mapping[UserId, frozenset]):
        self._users = dict(users)
        self._adj = {u: frozenset(adjacency.get(u, ())) for u in self._users}
        self._n_edges = sum(len(v) for v in self._adj.values()) // 2
        self._n_components = None

    @property
    def users(self) -> Mapping[UserId, UserRecord]:
        return self._users

    @property
    def edges(self) -> set:
        out = set()
        for u, nbrs in self._adj.items():
            for v in nbrs:
                if u < v:
                    out.add((u, v))
        return out

    def neighbors(self, user: UserId) -> frozenset:
        return self._adj[user]

    def degree(self, user: UserId) -> int:
        return len(self._adj[user])

    def has_edge(self, u: UserId, v: UserId) -> bool:
        return u in self._adj and v in self._adj[u]

    def __contains__(self, user) -> bool:
        return user in self._users

    def __len__(self) -> int:
        return len(self._users)

    @property
    def n_edges(self) -> int:
        return self._n_edges

    def sorted_users(self) -> list:
        return sorted(self._users)

    def with_records(self, records: Iterable[UserRecord]) -> "SocialGraph":
        """Copy of the graph with some user records replaced (same ids, same edges)."""
        users = dict(self._users)
        for rec in records:
            if rec.id not in users:
                raise ValidationError(f"unknown user {rec.id!r}")
            users[rec.id] = rec
        return SocialGraph(users, self._adj)

    def __repr__(self) -> str:
        return f"SocialGraph(n_users={len(self)}, n_edges={self.n_edges})"


def load_graph(
    edge_records: Iterable[Sequence[UserId]],
    user_records: Iterable[UserRecord],
    *,
    require_reciprocal: bool = False,
) -> SocialGraph:
    """Build a :class:`SocialGraph` from friend pairs and user records.

    By default every edge record is one friendship. With
    ``require_reciprocal=True`` the records are read as directed follow
    edges and only mutual pairs are kept; the rest are dropped with a warning.
    """
    users: dict = {}
    for rec in user_records:
        if rec.id is None or rec.id == "":
            raise ValidationError("user record with empty id")
        if rec.id in users:
            raise ValidationError(f"duplicate user id {rec.id!r}")
        users[rec.id] = rec

    directed = set()
    for i, pair in enumerate(edge_records, start=1):
        if len(pair) != 2:
            raise ValidationError(f"edge record {i} has {len(pair)} fields, expected 2")
        u, v = pair
        for x in (u, v):
            if x not in users:
                raise ValidationError(f"edge record {i} references unknown user {x!r}")
        if u == v:
            raise ValidationError(f"edge record {i} is a self-loop on {u!r}")
        directed.add((u, v))

    adj: dict = {u: set() for u in users}
    dropped = 0
    for u, v in directed:
        if require_reciprocal and (v, u) not in directed:
            dropped += 1
            continue
        adj[u].add(v)
        adj[v].add(u)
    if dropped:
        log.warning("dropped %d one-directional edge(s) without a reverse edge", dropped)
    return SocialGraph(users, {u: frozenset(n) for u, n in adj.items()})


def attribute_values(g: SocialGraph, attribute: str) -> list:
    """Distinct defined values of ``attribute`` in ``g``, sorted."""
    _check_attribute(attribute)
    vals = {rec.attribute(attribute) for rec in g.users.values()}
    vals.discard(None)
    return sorted(vals, key=_value_key)


def attribute_subgraph(g: SocialGraph, attribute: str, value) -> SocialGraph:
    """Induced subgraph on users whose ``attribute`` equals ``value``.

    Users with the attribute undefined never appear in any subgraph of it.
    """
    _check_attribute(attribute)
    try:
        value = parse_attribute_value(attribute, value)
    except ValueError as exc:
        raise ConfigurationError(f"invalid value {value!r} for attribute {attribute!r}") from exc
    keep = {u: rec for u, rec in g.users.items() if value is not None and rec.attribute(attribute) == value}
    adj = {u: g.neighbors(u) & keep.keys() for u in keep}
    return SocialGraph(keep, adj)


def connected_component_count(g: SocialGraph) -> int:
    # graphs are immutable, so the count is computed once per instance
    if g._n_components is not None:
        return g._n_components
    n = len(g)
    if n == 0:
        return 0
    index = {u: i for i, u in enumerate(g.users)}
    rows, cols = [], []
    for u, v in g.edges:
        rows.append(index[u])
        cols.append(index[v])
    mat = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    count, _ = connected_components(mat, directed=False)
    g._n_components = int(count)
    return g._n_components


def _check_attribute(attribute: str) -> None:
    if attribute not in ATTRIBUTES:
        raise ConfigurationError(f"unknown attribute {attribute!r}; expected one of {', '.join(ATTRIBUTES)}")


def _value_key(v):
    return (str(type(v)), v.value if hasattr(v, "value") else v)


# -- file ingestion ---------------------------------------------------------


def _sniff_delimiter(line: str) -> str:
    return "\t" if "\t" in line else ","


def read_edge_list(path) -> list[tuple[str, str]]:
    """Read a two-column delimited friend list (header optional)."""
    path = Path(path)
    pairs = []
    with path.open(encoding="utf-8", newline="") as fh:
        first = fh.readline()
        if not first:
            return pairs
        delim = _sniff_delimiter(first)
        fh.seek(0)
        for lineno, row in enumerate(csv.reader(fh, delimiter=delim), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ParseError(f"expected 2 columns, got {len(row)}", path=path, line=lineno)
            u, v = row[0].strip(), row[1].strip()
            if lineno == 1 and (u.lower(), v.lower()) in _EDGE_HEADERS:
                continue
            if not u or not v:
                raise ParseError("empty user id", path=path, line=lineno)
            pairs.append((u, v))
    return pairs


def _record_from_mapping(row: Mapping, path, lineno) -> UserRecord:
    uid = row.get("id")
    if uid is None or str(uid).strip() == "":
        raise ParseError("missing id", path=path, line=lineno)
    fields = {"id": str(uid).strip()}
    tz = row.get("timezone")
    fields["timezone"] = None if tz in (None, "") else str(tz)
    for attr in ATTRIBUTES:
        try:
            fields[attr] = parse_attribute_value(attr, row.get(attr))
        except (ValueError, TypeError) as exc:
            raise ParseError(f"bad {attr} value {row.get(attr)!r}", path=path, line=lineno) from exc
    return UserRecord(**fields)


def read_user_records(path) -> list[UserRecord]:
    """Read user records from a delimited file with a header, or from JSON lines.

    Columns: ``id,timezone`` plus any of the precomputed attribute columns.
    """
    path = Path(path)
    records = []
    with path.open(encoding="utf-8", newline="") as fh:
        if path.suffix in (".jsonl", ".ndjson", ".json"):
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ParseError(str(exc), path=path, line=lineno) from exc
                if not isinstance(row, dict):
                    raise ParseError("expected a JSON object", path=path, line=lineno)
                records.append(_record_from_mapping(row, path, lineno))
            return records
        first = fh.readline()
        if not first:
            return records
        delim = _sniff_delimiter(first)
        fh.seek(0)
        reader = csv.DictReader(fh, delimiter=delim)
        if reader.fieldnames is None or "id" not in [f.strip() for f in reader.fieldnames]:
            raise ParseError("header must contain an 'id' column", path=path, line=1)
        reader.fieldnames = [f.strip() for f in reader.fieldnames]
        for row in reader:
            if None in row:
                raise ParseError("too many columns", path=path, line=reader.line_num)
            records.append(_record_from_mapping(row, path, reader.line_num))
    return records


def write_edge_list(g: SocialGraph, path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["src", "dst"])
        for u, v in sorted(g.edges):
            w.writerow([u, v])


def write_user_records(g: SocialGraph, path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "timezone", *ATTRIBUTES])
        for uid in g.sorted_users():
            rec = g.users[uid]
            row = [uid, rec.timezone or ""]
            for attr in ATTRIBUTES:
                val = rec.attribute(attr)
                row.append("" if val is None else getattr(val, "value", val))
            w.writerow(row)


def load_graph_files(edge_path, user_path, *, require_reciprocal: bool = False) -> SocialGraph:
    users = read_user_records(user_path)
    counts = Counter(r.id for r in users)
    dupes = [u for u, c in counts.items() if c > 1]
    if dupes:
        raise ValidationError(f"duplicate user ids in {user_path}: {dupes[:5]}")
    return load_graph(read_edge_list(edge_path), users, require_reciprocal=require_reciprocal)
