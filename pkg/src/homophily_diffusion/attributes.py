"""Derivation of the four homophily attributes.

Location comes from a timezone table, information role from the ratio of
responses received to posts created, content role from the share of
informational posts (URL or retweet), and activity behaviour from a
k-medoids grouping of hour-of-day posting profiles under symmetrised KL.
"""

from __future__ import annotations

import csv
import logging
from collections import Counter, defaultdict
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError, ParseError, UndefinedRoleError
from .schema import ActionEvent, Continent, ContentRole, Role, UserId

log = logging.getLogger(__name__)

SMOOTHING_EPS = 1e-6
HOURS = 24


# -- location ----------------------------------------------------------------


def load_timezone_table(override_path=None) -> dict[str, Continent]:
    """Shipped timezone -> continent table, updated by an optional override file."""
    table = {}
    text = resources.files(__package__).joinpath("data/timezones.csv").read_text(encoding="utf-8")
    for row in csv.DictReader(text.splitlines()):
        table[row["timezone"]] = Continent(row["continent"])
    if override_path is not None:
        path = Path(override_path)
        with path.open(encoding="utf-8", newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if not row:
                    continue
                if len(row) != 2:
                    raise ParseError(f"expected 2 columns, got {len(row)}", path=path, line=lineno)
                tz, cont = row[0].strip(), row[1].strip()
                if lineno == 1 and tz.lower() == "timezone":
                    continue
                try:
                    table[tz] = Continent(cont)
                except ValueError as exc:
                    raise ParseError(f"unknown continent {cont!r}", path=path, line=lineno) from exc
    return table


_DEFAULT_TABLE: dict[str, Continent] | None = None


def derive_location(tz: str | None, mapping_table: Mapping[str, Continent] | None = None) -> Continent:
    global _DEFAULT_TABLE
    if mapping_table is None:
        if _DEFAULT_TABLE is None:
            _DEFAULT_TABLE = load_timezone_table()
        mapping_table = _DEFAULT_TABLE
    if not tz:
        return Continent.Other
    tz = tz.strip()
    return mapping_table.get(tz, Continent.Other)


# -- information and content roles --------------------------------------------


def derive_info_role(posts_created: int, responses_received: int, thresholds: tuple[float, float]) -> Role:
    low, high = thresholds
    if low > high:
        raise ConfigurationError(f"role thresholds out of order: {thresholds}")
    if posts_created < 1:
        raise UndefinedRoleError("information role undefined for a user with no posts")
    ratio = responses_received / posts_created
    if ratio < low:
        return Role.Generator
    if ratio > high:
        return Role.Receptor
    return Role.Mediator


def tercile_thresholds(ratios: Sequence[float]) -> tuple[float, float]:
    """Population terciles of the response/post ratio."""
    if len(ratios) == 0:
        raise UndefinedRoleError("no ratios to derive thresholds from")
    arr = np.asarray(ratios, dtype=float)
    return float(np.quantile(arr, 1 / 3)), float(np.quantile(arr, 2 / 3))


def derive_content_role(posts_total: int, posts_informational: int, threshold: float = 0.5) -> ContentRole:
    if not 0.0 <= threshold <= 1.0:
        raise ConfigurationError(f"content threshold must be in [0, 1], got {threshold}")
    if posts_total < 1:
        raise UndefinedRoleError("content role undefined for a user with no posts")
    if posts_informational / posts_total >= threshold:
        return ContentRole.Informer
    return ContentRole.Meformer


# -- activity behaviour ------------------------------------------------------


def utc_hour(timestamp: float) -> int:
    return datetime.fromtimestamp(timestamp, tz=timezone.utc).hour


def activity_distribution(events: Iterable[ActionEvent | float], eps: float = SMOOTHING_EPS) -> np.ndarray:
    """Smoothed 24-bin hour-of-day posting distribution of one user.

    Accepts events or bare epoch timestamps.
    """
    counts = np.zeros(HOURS)
    n = 0
    for ev in events:
        ts = ev.timestamp if isinstance(ev, ActionEvent) else float(ev)
        counts[utc_hour(ts)] += 1
        n += 1
    if n == 0:
        raise UndefinedRoleError("activity distribution undefined for a user with no posts")
    counts += eps
    return counts / counts.sum()


def _check_positive(p: np.ndarray, name: str) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0) or not np.all(np.isfinite(p)):
        raise DomainError(f"{name} must be strictly positive and finite")
    return p


def kl_divergence(p, q) -> float:
    p = _check_positive(p, "p")
    q = _check_positive(q, "q")
    if p.shape != q.shape:
        raise DomainError(f"shape mismatch {p.shape} vs {q.shape}")
    return float(np.sum(p * np.log(p / q)))


def kl_symmetric(p, q) -> float:
    return kl_divergence(p, q) + kl_divergence(q, p)


def symmetric_kl_matrix(dists: np.ndarray) -> np.ndarray:
    """Pairwise symmetrised KL between the rows of ``dists``."""
    dists = _check_positive(dists, "distributions")
    logp = np.log(dists)
    # KL(p,q)+KL(q,p) = sum (p - q)(log p - log q)
    diff = dists[:, None, :] - dists[None, :, :]
    ldiff = logp[:, None, :] - logp[None, :, :]
    d = np.einsum("ijk,ijk->ij", diff, ldiff)
    np.fill_diagonal(d, 0.0)
    return np.maximum(d, 0.0)


def k_medoids(dist: np.ndarray, k: int, seed: int = 0, max_iter: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Alternating k-medoids on a precomputed distance matrix.

    Seeding is k-medoids++ from ``seed``. Ties in assignment go to the medoid
    with the lowest index; a medoid always belongs to its own cluster.
    Returns ``(medoid_indices, labels)`` with clusters numbered by medoid index.
    """
    n = dist.shape[0]
    if k < 1 or k > n:
        raise ConfigurationError(f"cannot form {k} clusters from {n} items")
    rng = np.random.default_rng(seed)
    medoids = [int(rng.integers(n))]
    for _ in range(1, k):
        d_near = dist[:, medoids].min(axis=1)
        d_near[medoids] = 0.0
        total = d_near.sum()
        if total <= 0:
            rest = [i for i in range(n) if i not in medoids]
            medoids.append(rest[0])
            continue
        medoids.append(int(rng.choice(n, p=d_near / total)))

    medoids = np.array(sorted(medoids))
    labels = _assign(dist, medoids)
    for _ in range(max_iter):
        new = medoids.copy()
        for c in range(k):
            members = np.flatnonzero(labels == c)
            if members.size == 0:
                continue
            cost = dist[np.ix_(members, members)].sum(axis=1)
            new[c] = members[int(np.argmin(cost))]
        new = np.array(sorted(new))
        if np.array_equal(new, medoids):
            break
        medoids = new
        labels = _assign(dist, medoids)
    return medoids, labels


def _assign(dist, medoids):
    labels = np.argmin(dist[:, medoids], axis=1)
    labels[medoids] = np.arange(len(medoids))
    return labels


def cluster_activity(distributions: Mapping[UserId, np.ndarray], k: int = 3, seed: int = 0) -> dict:
    """Group users by posting-hour profile; returns ``{user: cluster id}``."""
    if k < 1:
        raise ConfigurationError("k must be at least 1")
    users = sorted(distributions)
    if len(users) < k:
        raise ConfigurationError(f"{len(users)} users is fewer than k={k}")
    mat = np.vstack([np.asarray(distributions[u], dtype=float) for u in users])
    _, labels = k_medoids(symmetric_kl_matrix(mat), k, seed=seed)
    return {u: int(c) for u, c in zip(users, labels)}


# -- whole-graph derivation --------------------------------------------------


def derive_attributes(
    graph,
    events: Iterable[ActionEvent],
    *,
    mapping_table: Mapping[str, Continent] | None = None,
    role_thresholds: tuple[float, float] | None = None,
    content_threshold: float = 0.5,
    activity_k: int = 3,
    seed: int = 0,
    overwrite: bool = False,
):
    """Fill missing attributes of every user in ``graph`` from its action log.

    Users with no posts keep the post-derived attributes undefined. Returns a
    new graph; existing values are kept unless ``overwrite``.
    """
    by_user = defaultdict(list)
    responses = Counter()
    for ev in events:
        if ev.user in graph:
            by_user[ev.user].append(ev)
        for m in ev.mentions:
            if m != ev.user:
                responses[m] += 1

    posters = sorted(by_user)
    ratios = {u: responses[u] / len(by_user[u]) for u in posters}
    if role_thresholds is None and posters:
        role_thresholds = tercile_thresholds([ratios[u] for u in posters])

    clusters = {}
    if posters:
        k = min(activity_k, len(posters))
        if k < activity_k:
            log.warning("only %d posting users; using k=%d activity clusters", len(posters), k)
        clusters = cluster_activity({u: activity_distribution(by_user[u]) for u in posters}, k=k, seed=seed)

    updated = []
    for uid in graph.sorted_users():
        rec = graph.users[uid]
        vals = {}
        # no timezone field at all leaves location undefined
        if (overwrite or rec.location is None) and rec.timezone is not None:
            vals["location"] = derive_location(rec.timezone, mapping_table)
        if uid in by_user:
            posts = by_user[uid]
            if overwrite or rec.info_role is None:
                vals["info_role"] = derive_info_role(len(posts), responses[uid], role_thresholds)
            if overwrite or rec.content_role is None:
                vals["content_role"] = derive_content_role(
                    len(posts), sum(ev.informational for ev in posts), content_threshold
                )
            if overwrite or rec.activity_cluster is None:
                vals["activity_cluster"] = clusters[uid]
        if vals:
            updated.append(rec.with_attributes(**vals))
    return graph.with_records(updated)
