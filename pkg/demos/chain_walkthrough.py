"""
A four-user chain, by hand
==========================

Four friends in a line post about one topic over four days. We rebuild the
diffusion series, score them, and compare their timing with a flat trend.
"""

from homophily_diffusion.diffusion import build_collection, collection_report
from homophily_diffusion.distortion import trend_cdf, utility
from homophily_diffusion.events import DAY, slice_events
from homophily_diffusion.graph import load_graph
from homophily_diffusion.metrics import FEATURE_NAMES, assemble_feature_vector
from homophily_diffusion.schema import ActionEvent, UserRecord

origin = 1_254_355_200.0  # 2009-10-01 00:00 UTC

# A - B - C - D, friendships are undirected
graph = load_graph([("A", "B"), ("B", "C"), ("C", "D")], [UserRecord(u) for u in "ABCD"])

# one post per (user, day); B posts twice, on days 2 and 3
posts = [("A", 1), ("B", 2), ("B", 3), ("C", 3), ("D", 4)]
events = [ActionEvent(u, origin + (day - 1) * DAY, frozenset({"t"})) for u, day in posts]
slotted = slice_events(events, origin)

collection = build_collection(graph, slotted, "t", horizon=4)
print(collection_report(collection))

# B's second post has no active friend the day before (A went quiet), so it
# opens a series of its own. Two series in a one-component graph gives a
# collection size of 2.
vec = assemble_feature_vector(collection, graph, eta=4)
for name, value in zip(FEATURE_NAMES, vec.as_tuple()):
    print(f"{name:>18s}  {value:.4f}")

# Cumulative node counts per day are (1, 1, 2, 1) -> (0.2, 0.4, 0.8, 1.0)
print("diffusion CDF:", trend_cdf(collection.slot_counts()))
print("flat trend CDF:", trend_cdf([2, 2, 2, 2]))
print("utility:", utility(collection, [2, 2, 2, 2]))
