"""Synthetic attributed graphs and topic cascades with planted homophily.

Users are split into equal groups on the planted attribute and wired by a
stochastic block model. A topic then spreads by independent cascade:
every user posting on the topic in a slot gets one chance per friend to
activate that friend in the next slot, with a higher probability when
both share the planted attribute value. Other attributes are drawn
uniformly at random and carry no signal.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .distortion import write_trend_csv
from .errors import ConfigurationError, GenerationError
from .events import write_action_log
from .graph import SocialGraph, load_graph, write_edge_list, write_user_records
from .schema import ATTRIBUTES, ActionEvent, Continent, ContentRole, Role, UserRecord

DEFAULT_ORIGIN = 1254355200.0  # 2009-10-01T00:00:00Z


def _default_attributes():
    return {"location": 4, "info_role": 3, "content_role": 2, "activity_cluster": 3}


@dataclass
class SynthConfig:
    n_users: int = 200
    attributes: dict = field(default_factory=_default_attributes)
    planted_attribute: str = "location"
    within_group_edge_prob: float = 0.1
    cross_group_edge_prob: float = 0.01
    propagation_prob_homophilous: float = 0.4
    propagation_prob_other: float = 0.05
    n_slots: int = 8
    n_seeds: int = 4
    rng_seed: int = 0
    # extensions beyond the cascade itself
    repost_prob: float = 0.0
    background_rate: float = 1.0
    topic: str = "topic0"
    origin: float = DEFAULT_ORIGIN
    slice_duration: float = 86400.0
    max_retries: int = 10

    def validate(self) -> None:
        probs = {
            "within_group_edge_prob": self.within_group_edge_prob,
            "cross_group_edge_prob": self.cross_group_edge_prob,
            "propagation_prob_homophilous": self.propagation_prob_homophilous,
            "propagation_prob_other": self.propagation_prob_other,
            "repost_prob": self.repost_prob,
        }
        for name, p in probs.items():
            if not 0.0 <= p <= 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1], got {p}")
        if self.within_group_edge_prob < self.cross_group_edge_prob:
            raise ConfigurationError("within-group edge probability must be >= cross-group")
        if self.propagation_prob_homophilous < self.propagation_prob_other:
            raise ConfigurationError("homophilous propagation probability must be >= the other one")
        if self.n_users < 1 or self.n_slots < 1:
            raise ConfigurationError("need at least one user and one slot")
        if not 0 <= self.n_seeds <= self.n_users:
            raise ConfigurationError("n_seeds must lie in [0, n_users]")
        if self.planted_attribute not in self.attributes:
            raise ConfigurationError(f"planted attribute {self.planted_attribute!r} has no cardinality")
        for attr, k in self.attributes.items():
            if attr not in ATTRIBUTES:
                raise ConfigurationError(f"unknown attribute {attr!r}")
            if len(attribute_levels(attr, k)) != k:
                raise ConfigurationError(f"attribute {attr!r} supports at most {len(attribute_levels(attr, 99))} values")
        if self.background_rate < 0:
            raise ConfigurationError("background_rate must be non-negative")


def attribute_levels(attribute: str, k: int) -> list:
    if attribute == "location":
        return list(Continent)[:k]
    if attribute == "info_role":
        return list(Role)[:k]
    if attribute == "content_role":
        return list(ContentRole)[:k]
    return list(range(k))


def _peak_hours(k: int) -> np.ndarray:
    return (10 + np.arange(k) * (24 / max(k, 1))) % 24


def _post_time(rng, origin, slice_duration, slot, peak) -> float:
    start = origin + (slot - 1) * slice_duration
    if peak is None:
        frac = rng.random()
    else:
        hour = (peak + rng.normal(0.0, 2.0)) % 24
        frac = hour / 24.0
    # whole seconds keep written logs exact
    sec = min(int(frac * slice_duration), int(slice_duration) - 1)
    return float(start + sec)


def _sbm_edges(rng, groups: np.ndarray, within: float, cross: float) -> list[tuple[int, int]]:
    n = len(groups)
    iu, ju = np.triu_indices(n, k=1)
    probs = np.where(groups[iu] == groups[ju], within, cross)
    keep = rng.random(iu.size) < probs
    return list(zip(iu[keep].tolist(), ju[keep].tolist()))


def generate(config: SynthConfig | None = None):
    """Return ``(graph, events, labels)``; ``labels`` maps attribute -> {user: value}."""
    cfg = config or SynthConfig()
    cfg.validate()
    rng = np.random.default_rng(cfg.rng_seed)
    n = cfg.n_users
    width = max(3, len(str(n - 1)))
    ids = [f"u{i:0{width}d}" for i in range(n)]

    labels: dict = {}
    codes: dict = {}
    for attr in ATTRIBUTES:
        if attr not in cfg.attributes:
            continue
        k = cfg.attributes[attr]
        levels = attribute_levels(attr, k)
        if attr == cfg.planted_attribute:
            c = rng.permutation(np.arange(n) % k)
        else:
            c = rng.integers(0, k, size=n)
        codes[attr] = c
        labels[attr] = {ids[i]: levels[c[i]] for i in range(n)}
    groups = codes[cfg.planted_attribute]

    for attempt in range(cfg.max_retries):
        edges = _sbm_edges(rng, groups, cfg.within_group_edge_prob, cfg.cross_group_edge_prob)
        if edges or n < 2:
            break
    else:
        raise GenerationError(f"empty graph after {cfg.max_retries} attempts")

    records = [
        UserRecord(ids[i], None, **{a: labels[a][ids[i]] for a in labels}) for i in range(n)
    ]
    graph = load_graph([(ids[i], ids[j]) for i, j in edges], records)
    nbrs = [[] for _ in range(n)]
    for i, j in edges:
        nbrs[i].append(j)
        nbrs[j].append(i)

    peaks = None
    if "activity_cluster" in codes:
        hours = _peak_hours(cfg.attributes["activity_cluster"])
        peaks = hours[codes["activity_cluster"]]
    informer = None
    if "content_role" in labels:
        informer = np.array([labels["content_role"][u] == ContentRole.Informer for u in ids])

    events: list[ActionEvent] = []

    def emit(i, slot, topical, activator=None):
        ts = _post_time(rng, cfg.origin, cfg.slice_duration, slot, None if peaks is None else peaks[i])
        p_url = 0.5 if informer is None else (0.7 if informer[i] else 0.15)
        has_url = bool(rng.random() < p_url)
        if topical:
            retweet = activator is not None and bool(rng.random() < 0.5)
            mentions = frozenset({ids[activator]}) if retweet else frozenset()
            events.append(ActionEvent(ids[i], ts, frozenset({cfg.topic}), has_url, retweet, mentions))
        else:
            events.append(ActionEvent(ids[i], ts, frozenset(), has_url, False, frozenset()))

    # stratified seeding: round-robin over planted groups
    seeds = []
    if cfg.n_seeds:
        order = rng.permutation(n)
        by_group = {g: [i for i in order if groups[i] == g] for g in sorted(set(groups.tolist()))}
        keys = sorted(by_group)
        g = 0
        while len(seeds) < cfg.n_seeds:
            pool = by_group[keys[g % len(keys)]]
            if pool:
                seeds.append(pool.pop(0))
            g += 1

    active = np.zeros(n, dtype=bool)
    posters = {i: None for i in sorted(seeds)}
    active[list(posters)] = True
    for slot in range(1, cfg.n_slots + 1):
        for i in sorted(posters):
            emit(i, slot, True, posters[i])
        if cfg.background_rate > 0:
            counts = rng.poisson(cfg.background_rate, size=n)
            for i in np.flatnonzero(counts):
                for _ in range(counts[i]):
                    emit(int(i), slot, False)
        if slot == cfg.n_slots:
            break
        nxt: dict = {}
        for i in sorted(posters):
            for j in nbrs[i]:
                if active[j] or j in nxt:
                    continue
                p = cfg.propagation_prob_homophilous if groups[i] == groups[j] else cfg.propagation_prob_other
                if rng.random() < p:
                    nxt[j] = i
        if cfg.repost_prob > 0:
            for i in np.flatnonzero(active):
                if int(i) not in nxt and rng.random() < cfg.repost_prob:
                    nxt[int(i)] = None
        active[list(nxt)] = True
        posters = nxt

    events.sort(key=lambda e: (e.timestamp, e.user, sorted(e.topics)))
    return graph, events, labels


def synthetic_trends(events, cfg: SynthConfig, seed: int | None = None) -> dict:
    """Noisy search and news volume series tracking the topic's daily post counts."""
    rng = np.random.default_rng(cfg.rng_seed + 7919 if seed is None else seed)
    counts = np.zeros(cfg.n_slots)
    for ev in events:
        if cfg.topic in ev.topics:
            m = int(math.floor((ev.timestamp - cfg.origin) / cfg.slice_duration))
            if 0 <= m < cfg.n_slots:
                counts[m] += 1
    search = np.round(counts * rng.lognormal(0.0, 0.3, cfg.n_slots) * 10 + 1)
    # news coverage lags the conversation by one slot
    news = np.round(np.concatenate([[1.0], counts[:-1]]) * rng.lognormal(0.0, 0.3, cfg.n_slots) * 3 + 1)
    return {"search": search.tolist(), "news": news.tolist()}


def write_synthetic(outdir, config: SynthConfig | None = None) -> dict:
    """Generate and write edges.csv, users.csv, actions.jsonl, trend files and config.json."""
    cfg = config or SynthConfig()
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    graph, events, _ = generate(cfg)
    write_edge_list(graph, out / "edges.csv")
    write_user_records(graph, out / "users.csv")
    write_action_log(events, out / "actions.jsonl")
    paths = {"edges": str(out / "edges.csv"), "users": str(out / "users.csv"), "actions": str(out / "actions.jsonl")}
    for kind, values in synthetic_trends(events, cfg).items():
        p = out / f"trend_{cfg.topic}_{kind}.csv"
        write_trend_csv(values, p, cfg.origin, cfg.slice_duration)
        paths[f"trend_{kind}"] = str(p)
    cfg_dict = asdict(cfg)
    (out / "config.json").write_text(json.dumps(cfg_dict, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return paths


def within_group_fraction(graph: SocialGraph, collection, attribute: str) -> float:
    """Share of diffusion edges whose endpoints share ``attribute``."""
    total = within = 0
    for s in collection.series:
        for parent, child in s.edges():
            total += 1
            a = graph.users[parent[0]].attribute(attribute)
            b = graph.users[child[0]].attribute(attribute)
            within += a == b
    return within / total if total else float("nan")
