"""Attaching predicted participants to a collection as its next slot."""

from __future__ import annotations

from typing import Mapping

import numpy as np

from ..diffusion import CollectionBuilder, DiffusionCollection
from ..errors import ConfigurationError
from ..events import DAY
from ..graph import SocialGraph


def extend_collection(
    collection: DiffusionCollection,
    probabilities: Mapping,
    tau: float,
    graph: SocialGraph,
    *,
    origin: float = 0.0,
    slice_duration: float = DAY,
) -> DiffusionCollection:
    """Collection at ``horizon + 1`` with every user whose probability is >= tau (and > 0).

    Predicted users link to all their friends' nodes at the last slot,
    merging series as the builder does. A predicted node gets the median
    action time of its parents shifted by one slice, or the middle of the
    new slot when it has no parents.
    """
    if not 0.0 <= tau <= 1.0:
        raise ConfigurationError(f"tau must lie in [0, 1], got {tau}")
    n = collection.horizon
    slot = n + 1
    last = {node.user: node for node in collection.nodes_at(n)}
    midpoint = origin + n * slice_duration + slice_duration / 2
    actors = {}
    for user in sorted(probabilities):
        p = probabilities[user]
        if p <= 0 or p < tau or user not in graph:
            continue
        parent_times = [t for v in graph.neighbors(user) if v in last for t in last[v].action_times]
        actors[user] = (float(np.median(parent_times)) + slice_duration,) if parent_times else (midpoint,)
    builder = CollectionBuilder.from_collection(graph, collection)
    builder.add_slot(slot, actors)
    return builder.collection(slot)
