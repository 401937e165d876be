"""Batch train/predict/score protocol over topics, graphs, methods and horizons.

For every horizon N the models see slots ``1..N`` only, predict the
participants of slot ``N+1``, and the predicted collection is scored
against the actual one (saturation) and against external trends (utility).
Attribute graphs are scored per attribute value and averaged.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .attributes import derive_attributes, load_timezone_table
from .diffusion import build_collection, topic_active_users
from .distortion import TrendSeries, mean_score, read_trend_csv, saturation, utility
from .errors import ConfigurationError, DegenerateSeriesError, ModelError, ValidationError
from .events import DAY, all_topics, default_origin, read_action_log, slice_events
from .graph import SocialGraph, attribute_subgraph, attribute_values, load_graph_files
from .metrics import assemble_feature_vector
from .predictor import METHODS, ActivityIndex, DBNPredictor, PredictorParams, extend_collection, predict_probabilities
from .schema import ATTRIBUTES
from .synth import SynthConfig, generate, synthetic_trends

log = logging.getLogger(__name__)

BASELINE = "baseline"
REFERENCES = ("baseline", "same-graph")


@dataclass
class ExperimentConfig:
    edges: str | None = None
    users: str | None = None
    actions: str | None = None
    trends: dict = field(default_factory=dict)  # topic -> {"search": path, "news": path}
    timezone_table: str | None = None
    topics: list | None = None
    attributes: list = field(default_factory=lambda: list(ATTRIBUTES))
    methods: list = field(default_factory=lambda: list(METHODS))
    slice_duration: float = DAY
    origin: float | None = None
    base_window: int = 3
    step: int = 1
    max_horizon: int | None = None
    n_bins: int = 5
    prior: float = 1.0
    tau: float = 0.5
    phi: float = 0.1
    max_iter: int = 200
    tol: float = 1e-6
    rate_time_unit: float = DAY
    rng_seed: int = 0
    require_reciprocal: bool = False
    activity_k: int = 3
    saturation_reference: str = "baseline"
    workers: int = 1

    def validate(self) -> None:
        if self.base_window < 1 or self.step < 1:
            raise ConfigurationError("base_window and step must be >= 1")
        if self.max_horizon is not None and self.max_horizon < self.base_window:
            raise ConfigurationError("max_horizon must be >= base_window (windows must increase)")
        for a in self.attributes:
            if a not in ATTRIBUTES:
                raise ConfigurationError(f"unknown attribute {a!r}")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigurationError(f"unknown method {m!r}")
        if self.saturation_reference not in REFERENCES:
            raise ConfigurationError(f"saturation_reference must be one of {REFERENCES}")
        if not 0 <= self.tau <= 1 or not 0 <= self.phi <= 1:
            raise ConfigurationError("tau and phi must lie in [0, 1]")
        if not self.slice_duration > 0 or not self.rate_time_unit > 0:
            raise ConfigurationError("slice_duration and rate_time_unit must be positive")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")

    def predictor_params(self) -> PredictorParams:
        return PredictorParams(self.n_bins, self.prior, self.tau, self.phi, self.max_iter, self.tol, self.rng_seed)

    @classmethod
    def from_mapping(cls, data: Mapping) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**dict(data))

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        if path.suffix in (".yaml", ".yml"):
            import yaml

            data = yaml.safe_load(text) or {}
        else:
            data = json.loads(text)
        cfg = cls.from_mapping(data)
        base = path.parent
        for name in ("edges", "users", "actions", "timezone_table"):
            val = getattr(cfg, name)
            if val is not None and not Path(val).is_absolute():
                setattr(cfg, name, str(base / val))
        cfg.trends = {
            t: {k: (p if Path(p).is_absolute() else str(base / p)) for k, p in kinds.items()}
            for t, kinds in cfg.trends.items()
        }
        return cfg


@dataclass
class ExperimentData:
    graph: SocialGraph
    events: list
    trends: dict = field(default_factory=dict)  # topic -> {kind: TrendSeries}


def load_inputs(cfg: ExperimentConfig) -> ExperimentData:
    """Read graph, users and log from ``cfg`` paths and fill missing attributes."""
    for name in ("edges", "users", "actions"):
        p = getattr(cfg, name)
        if p is None or not Path(p).exists():
            raise ConfigurationError(f"{name} path missing or not found: {p!r}")
    graph = load_graph_files(cfg.edges, cfg.users, require_reciprocal=cfg.require_reciprocal)
    events = read_action_log(cfg.actions)
    unknown = {ev.user for ev in events} - set(graph.users)
    if unknown:
        log.warning("%d user(s) in the action log are not in the graph; their posts are ignored", len(unknown))
    table = load_timezone_table(cfg.timezone_table)
    graph = derive_attributes(graph, events, mapping_table=table, activity_k=cfg.activity_k, seed=cfg.rng_seed)
    return ExperimentData(graph, events, {})


def load_trends(cfg: ExperimentConfig, origin: float, n_slots: int) -> dict:
    out: dict = {}
    for topic, kinds in sorted(cfg.trends.items()):
        for kind, path in sorted(kinds.items()):
            if not Path(path).exists():
                log.warning("trend file %s not found; %s utility omitted for %s", path, kind, topic)
                continue
            out.setdefault(topic, {})[kind] = read_trend_csv(path, topic, kind, origin, cfg.slice_duration, n_slots)
    return out


def cell_seed(base: int, *key) -> int:
    """Stable per-cell seed (independent of Python's hash randomisation)."""
    return (base * 1_000_003 + zlib.crc32("|".join(map(str, key)).encode())) % (2**32)


def _graph_cells(graph: SocialGraph, attributes: Sequence[str]):
    yield BASELINE, [(None, graph)]
    for attr in attributes:
        yield attr, [(v, attribute_subgraph(graph, attr, v)) for v in attribute_values(graph, attr)]


def _value_label(v):
    return None if v is None else str(getattr(v, "value", v))


def run_experiment(cfg: ExperimentConfig, data: ExperimentData | None = None) -> list[dict]:
    """Score every (topic, graph, method, horizon) cell; rows are sorted by cell key."""
    cfg.validate()
    if data is None:
        data = load_inputs(cfg)
    graph, events = data.graph, data.events
    if not events:
        raise ValidationError("empty action log")
    origin = cfg.origin if cfg.origin is not None else default_origin(events, cfg.slice_duration)
    slotted = slice_events(events, origin, cfg.slice_duration)
    last_slot = max(slotted) if slotted else 0
    trends = dict(data.trends)
    for topic, kinds in load_trends(cfg, origin, last_slot).items():
        trends.setdefault(topic, {}).update(kinds)

    top = last_slot - 1 if cfg.max_horizon is None else min(cfg.max_horizon, last_slot - 1)
    horizons = list(range(cfg.base_window, top + 1, cfg.step))
    if not horizons:
        raise ConfigurationError(f"no horizon fits: base window {cfg.base_window}, {last_slot} slot(s) of data")
    topics = cfg.topics if cfg.topics is not None else all_topics(events)
    params = cfg.predictor_params()
    cells = list(_graph_cells(graph, cfg.attributes))

    for topic in sorted(topics):
        if cfg.trends and topic not in trends:
            log.warning("no trend series for topic %s; utility omitted", topic)
    tasks = [
        (cfg, params, graph, slotted, topic, n, cells, trends.get(topic, {}), origin)
        for topic in sorted(topics)
        for n in horizons
    ]
    rows = []
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            for part in pool.map(_score_task, tasks):
                rows.extend(part)
    else:
        for task in tasks:
            rows.extend(_score_task(task))
    rows.sort(key=lambda r: (r["topic"], r["graph"], r["method"], r["horizon"]))
    return rows


def _actual_vector(sub, slotted, topic, n, cfg):
    coll = build_collection(sub, slotted, topic, n + 1)
    eta = len(topic_active_users(sub, slotted, topic, 1, n + 1))
    return assemble_feature_vector(coll, sub, eta, cfg.rate_time_unit)


def _score_task(task):
    return _score_horizon(*task)


def _dbn_probabilities(method, index, n, params, shared, key):
    """DBN and GenModel share one fitted model; they differ only at inference."""
    if "model" not in shared:
        try:
            mp = replace(params, seed=cell_seed(params.seed, *key, "DBN"))
            shared["model"] = DBNPredictor(mp).fit(index, n)
        except ModelError as exc:
            shared["model"] = exc
    model = shared["model"]
    if isinstance(model, ModelError):
        raise model
    return model.predict(index, n, use_features=method == "DBN")


def _score_horizon(cfg, params, graph, slotted, topic, n, cells, topic_trends, origin):
    baseline_actual = _actual_vector(graph, slotted, topic, n, cfg)
    rows = []
    for graph_name, values in cells:
        per_method: dict = {m: {"saturation": [], **{k: [] for k in topic_trends}} for m in cfg.methods}
        skipped = 0
        for value, sub in values:
            coll = build_collection(sub, slotted, topic, n)
            if coll.is_empty():
                log.info("skip %s/%s=%s at N=%d: empty collection", topic, graph_name, _value_label(value), n)
                skipped += 1
                continue
            reference = baseline_actual if cfg.saturation_reference == "baseline" else _actual_vector(sub, slotted, topic, n, cfg)
            index = ActivityIndex(sub, slotted, topic, n)
            shared: dict = {}
            for method in cfg.methods:
                mp = replace(params, seed=cell_seed(params.seed, topic, graph_name, _value_label(value), n, method))
                try:
                    if method in ("DBN", "GenModel"):
                        probs = _dbn_probabilities(method, index, n, params, shared, (topic, graph_name, _value_label(value), n))
                    else:
                        probs = predict_probabilities(method, index, n, mp)
                except ModelError as exc:
                    log.warning("%s on %s/%s=%s at N=%d: %s; predicting no participants",
                                method, topic, graph_name, _value_label(value), n, exc)
                    probs = {}
                pred = extend_collection(coll, probs, params.tau, sub, origin=origin, slice_duration=cfg.slice_duration)
                vec = assemble_feature_vector(pred, sub, len(pred.users()), cfg.rate_time_unit)
                per_method[method]["saturation"].append(saturation(vec, reference))
                for kind, trend in topic_trends.items():
                    try:
                        per_method[method][kind].append(utility(pred, trend))
                    except DegenerateSeriesError:
                        pass
        for method in cfg.methods:
            scores = per_method[method]
            row = {
                "topic": topic,
                "graph": graph_name,
                "method": method,
                "horizon": n,
                "saturation": mean_score(scores["saturation"]),
                "values_scored": len(scores["saturation"]),
                "values_skipped": skipped,
            }
            for kind in sorted(topic_trends):
                row[f"{kind}_utility"] = mean_score(scores[kind])
            rows.append(row)
    return rows


def _json_float(x):
    if isinstance(x, float) and math.isnan(x):
        return None
    return x


def write_report(rows: Sequence[dict], path_or_buf) -> None:
    """Line-delimited JSON, one record per cell, keys sorted."""
    text = "".join(json.dumps({k: _json_float(v) for k, v in r.items()}, sort_keys=True) + "\n" for r in rows)
    if hasattr(path_or_buf, "write"):
        path_or_buf.write(text)
    else:
        Path(path_or_buf).write_text(text, encoding="utf-8")


def read_report(path) -> list[dict]:
    rows = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rows.append({k: (float("nan") if v is None else v) for k, v in json.loads(line).items()})
    return rows


SCORE_COLUMNS = ("saturation", "search_utility", "news_utility")


def summarize(rows: Sequence[dict]) -> list[dict]:
    """Mean scores over topics and horizons, one row per (graph, method)."""
    if not rows:
        raise ValidationError("empty report")
    groups: dict = {}
    for r in rows:
        groups.setdefault((r["graph"], r["method"]), []).append(r)
    out = []
    for (graph_name, method), rs in groups.items():
        row = {"graph": graph_name, "method": method, "cells": len(rs)}
        for col in SCORE_COLUMNS:
            vals = [r[col] for r in rs if col in r and r[col] is not None and not math.isnan(r[col])]
            row[col] = float(np.mean(vals)) if vals else float("nan")
        out.append(row)
    graph_order = {BASELINE: 0}
    out.sort(key=lambda r: (graph_order.get(r["graph"], 1), r["graph"], METHODS.index(r["method"]) if r["method"] in METHODS else 99, r["method"]))
    return out


def summary_table(summary: Sequence[dict]) -> str:
    """Delimited table: one row per (score, graph), one column per method."""
    methods = [m for m in METHODS if any(r["method"] == m for r in summary)]
    methods += sorted({r["method"] for r in summary} - set(methods))
    graphs = []
    for r in summary:
        if r["graph"] not in graphs:
            graphs.append(r["graph"])
    lookup = {(r["graph"], r["method"]): r for r in summary}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["score", "graph", *methods])
    for col in SCORE_COLUMNS:
        if not any(col in r and not math.isnan(r[col]) for r in summary):
            continue
        for g in graphs:
            cells = []
            for m in methods:
                v = lookup.get((g, m), {}).get(col, float("nan"))
                cells.append("" if math.isnan(v) else f"{v:.4f}")
            w.writerow([col, g, *cells])
    return buf.getvalue()


def synthetic_sweep(seeds: Sequence[int], synth: SynthConfig | None = None, cfg: ExperimentConfig | None = None) -> list[dict]:
    """Run the experiment on one generated data set per seed.

    Every row gains a ``seed`` key. Trends come from :func:`synthetic_trends`
    and the slot calendar from the generator config, so only model and
    schedule settings of ``cfg`` matter.
    """
    synth = synth or SynthConfig()
    cfg = cfg or ExperimentConfig()
    rows = []
    for seed in seeds:
        sc = replace(synth, rng_seed=int(seed))
        graph, events, _ = generate(sc)
        trends = {sc.topic: {k: TrendSeries(sc.topic, k, v) for k, v in synthetic_trends(events, sc).items()}}
        ec = replace(
            cfg,
            topics=[sc.topic],
            origin=sc.origin,
            slice_duration=sc.slice_duration,
            attributes=[a for a in cfg.attributes if a in sc.attributes],
            trends={},
        )
        for row in run_experiment(ec, ExperimentData(graph, events, trends)):
            rows.append({**row, "seed": int(seed)})
    return rows
