"""Per-user activity counts, environmental features and state labels."""

from __future__ import annotations

from dataclasses import astuple, dataclass
from typing import Mapping

import numpy as np
from scipy import sparse

from ..graph import SocialGraph
from ..schema import UserId

VULNERABLE = 1
INDIFFERENT = 0


@dataclass(frozen=True)
class EnvFeatures:
    own_activity: float
    friends_activity: float
    topic_popularity: float

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)


def _ratio(num, den):
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    out = np.zeros(np.broadcast(num, den).shape)
    np.divide(num, den, out=out, where=den > 0)
    return out


class ActivityIndex:
    """Post counts per user and slot for one topic over one graph.

    ``total[i, m-1]`` is the number of posts of user ``users[i]`` in slot ``m``
    and ``topical[i, m-1]`` the number of those carrying the topic.
    """

    def __init__(self, graph: SocialGraph, slotted: Mapping[int, Mapping], topic: str, n_slots: int):
        self.graph = graph
        self.topic = topic
        self.n_slots = n_slots
        self.users = graph.sorted_users()
        self.pos = {u: i for i, u in enumerate(self.users)}
        n = len(self.users)
        self.total = np.zeros((n, n_slots))
        self.topical = np.zeros((n, n_slots))
        for m, per_user in slotted.items():
            if not 1 <= m <= n_slots:
                continue
            for u, evs in per_user.items():
                i = self.pos.get(u)
                if i is None:
                    continue
                self.total[i, m - 1] += len(evs)
                self.topical[i, m - 1] += sum(1 for ev in evs if topic in ev.topics)
        self.acted = (self.topical > 0).astype(np.int8)
        rows, cols = [], []
        for u, v in graph.edges:
            rows += [self.pos[u], self.pos[v]]
            cols += [self.pos[v], self.pos[u]]
        self.adj = sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
        self.degree = np.asarray(self.adj.sum(axis=1)).ravel()

    def features(self, slot: int) -> np.ndarray:
        """Feature matrix (n_users x 3) over the window ``1..slot``."""
        own_t = self.topical[:, :slot].sum(axis=1)
        own_all = self.total[:, :slot].sum(axis=1)
        f1 = _ratio(own_t, own_all)
        f2 = _ratio(self.adj @ own_t, self.adj @ own_all)
        f3 = _ratio(self.topical[:, slot - 1].sum(), self.total[:, slot - 1].sum())
        return np.column_stack([f1, f2, np.full(len(self.users), float(f3))])

    def states(self, slot: int) -> np.ndarray:
        """Friend-activity state labels for all users at ``slot``."""
        if slot <= 1:
            return np.zeros(len(self.users), dtype=np.int8)
        active_friends = self.adj @ self.acted[:, slot - 2]
        return (active_friends > 0).astype(np.int8)

    def active_friend_fraction(self, slot: int) -> np.ndarray:
        return _ratio(self.adj @ self.acted[:, slot - 1], self.degree)

    def observations(self, user: UserId, last: int) -> np.ndarray:
        return self.acted[self.pos[user], :last].astype(np.int64)


def extract_env_features(user: UserId, window: tuple[int, int], index: ActivityIndex) -> EnvFeatures:
    """Features of ``user`` over slots ``window[0]..window[1]``.

    Own and friends' topical share of posts, and the topic's share of all
    posts in the last slot of the window.
    """
    first, last = window
    i = index.pos[user]
    sl = slice(first - 1, last)
    own_t = index.topical[i, sl].sum()
    own_all = index.total[i, sl].sum()
    nbrs = index.adj[i].indices
    fr_t = index.topical[nbrs, sl].sum()
    fr_all = index.total[nbrs, sl].sum()
    pop = _ratio(index.topical[:, last - 1].sum(), index.total[:, last - 1].sum())
    return EnvFeatures(float(_ratio(own_t, own_all)), float(_ratio(fr_t, fr_all)), float(pop))


def label_states(user: UserId, window: tuple[int, int], index: ActivityIndex) -> list[int]:
    """Vulnerable (1) at slot m iff a friend acted on the topic at m-1."""
    i = index.pos[user]
    nbrs = index.adj[i].indices
    out = []
    for m in range(window[0], window[1] + 1):
        if m <= 1 or nbrs.size == 0:
            out.append(INDIFFERENT)
        else:
            out.append(VULNERABLE if index.acted[nbrs, m - 2].any() else INDIFFERENT)
    return out
