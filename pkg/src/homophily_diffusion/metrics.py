"""The eight diffusion characteristics of a collection.

Order of the feature vector: volume, participation, dissemination, reach,
spread, cascade instances, collection size, rate.
"""

from __future__ import annotations

import csv
import io
from dataclasses import astuple, dataclass

import numpy as np

from .diffusion import DiffusionCollection
from .errors import ConfigurationError, ConsistencyError, DataError
from .events import DAY
from .graph import SocialGraph, connected_component_count

FEATURE_NAMES = (
    "volume",
    "participation",
    "dissemination",
    "reach",
    "spread",
    "cascade_instances",
    "collection_size",
    "rate",
)


@dataclass(frozen=True)
class DiffusionFeatureVector:
    volume: float
    participation: float
    dissemination: float
    reach: float
    spread: float
    cascade_instances: float
    collection_size: float
    rate: float

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)

    def as_tuple(self) -> tuple:
        return astuple(self)

    @classmethod
    def from_sequence(cls, values) -> "DiffusionFeatureVector":
        values = [float(v) for v in values]
        if len(values) != len(FEATURE_NAMES):
            raise ValueError(f"expected {len(FEATURE_NAMES)} values, got {len(values)}")
        return cls(*values)


def total_slots(collection: DiffusionCollection) -> int:
    return sum(len(s.slots()) for s in collection.series)


def compute_user_metrics(collection: DiffusionCollection, eta: int) -> tuple[float, float, float]:
    """Volume, participation and dissemination against ``eta`` topic-active users."""
    if eta < 0:
        raise ConfigurationError("eta must be non-negative")
    if collection.is_empty():
        return 0.0, 0.0, 0.0
    if eta == 0:
        raise ConsistencyError("non-empty collection with zero topic-active users")
    n_users = len(collection.users())
    non_leaf = 0
    seeds = 0
    for s in collection.series:
        for node in s:
            if s.children(node.key):
                non_leaf += 1
            if not node.parents:
                seeds += 1
    return n_users / eta, non_leaf / eta, seeds / eta


def compute_topology_metrics(collection: DiffusionCollection, graph: SocialGraph) -> tuple[float, float, float, float]:
    """Reach, spread, cascade instances and collection size."""
    if collection.is_empty():
        return 0.0, 0.0, 0.0, 0.0
    components = connected_component_count(graph)
    if components == 0:
        raise ConsistencyError("non-empty collection over a graph with no components")

    lengths = []
    widest = 0
    increases = 0
    for s in collection.series:
        slots = s.slots()
        lengths.append(len(slots))
        seen: set = set()
        prev_new = None
        for m in slots:
            at = s.nodes_at(m)
            widest = max(widest, len(at))
            users = {n.user for n in at}
            new = len(users - seen)
            if prev_new is not None and new > prev_new:
                increases += 1
            seen |= users
            prev_new = new
    total = sum(lengths)
    reach = float(np.mean(lengths)) / total
    spread = widest / len(collection.users())
    cascades = increases / total
    size = len(collection.series) / components
    return reach, spread, cascades, size


def compute_rate(collection: DiffusionCollection, time_unit: float = DAY) -> float:
    """``1 / (1 + mean gap)`` between median action times of consecutive slots.

    Gaps are summed over every series, expressed in ``time_unit`` seconds and
    divided by the total slot count. An empty collection has rate 1.
    """
    if not time_unit > 0:
        raise ConfigurationError("time_unit must be positive")
    if collection.is_empty():
        return 1.0
    gap_sum = 0.0
    for s in collection.series:
        prev = None
        for m in s.slots():
            times = [t for n in s.nodes_at(m) for t in n.action_times]
            if not times:
                raise DataError(f"node without action times at slot {m}")
            med = float(np.median(times))
            if prev is not None:
                gap = med - prev
                if gap < 0:
                    raise DataError(f"negative median gap {gap} at slot {m}")
                gap_sum += gap
            prev = med
    avg = gap_sum / time_unit / total_slots(collection)
    return 1.0 / (1.0 + avg)


def assemble_feature_vector(
    collection: DiffusionCollection,
    graph: SocialGraph,
    eta: int,
    time_unit: float = DAY,
) -> DiffusionFeatureVector:
    v, p, d = compute_user_metrics(collection, eta)
    r, s, c, a = compute_topology_metrics(collection, graph)
    g = compute_rate(collection, time_unit)
    return DiffusionFeatureVector(v, p, d, r, s, c, a, g)


def feature_report(rows) -> str:
    """Delimited feature report.

    ``rows`` yields ``(topic, graph, value, horizon, DiffusionFeatureVector)``.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["topic", "graph", "value", "horizon", *FEATURE_NAMES])
    for topic, graph_name, value, horizon, vec in rows:
        w.writerow([topic, graph_name, "" if value is None else value, horizon, *(repr(x) for x in vec.as_tuple())])
    return buf.getvalue()
