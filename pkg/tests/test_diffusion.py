import logging
import random

import pytest

from homophily_diffusion.diffusion import CollectionBuilder, build_collection, collection_report, topic_active_users
from homophily_diffusion.errors import ConfigurationError, ParseError
from homophily_diffusion.events import (
    DAY,
    all_topics,
    default_origin,
    read_action_log,
    slice_events,
    slot_of,
    topic_actors,
    write_action_log,
)
from homophily_diffusion.graph import load_graph
from homophily_diffusion.schema import ActionEvent, UserRecord

from conftest import ORIGIN, chain4_events, chain4_graph
from oracles import brute_series


def ev(user, slot, topic="t", offset=0.0):
    return ActionEvent(user, ORIGIN + (slot - 1) * DAY + offset, frozenset({topic}) if topic else frozenset())


# -- slicing ------------------------------------------------------------------


def test_slot_boundaries():
    assert slot_of(ORIGIN, ORIGIN, DAY) == 1
    assert slot_of(ORIGIN + DAY - 1e-6, ORIGIN, DAY) == 1
    assert slot_of(ORIGIN + DAY, ORIGIN, DAY) == 2


def test_three_events_three_days():
    events = [ev("a", 1, offset=5), ev("b", 2, offset=3600), ev("c", 3, offset=DAY - 1)]
    slotted = slice_events(events, ORIGIN, DAY)
    assert sorted(slotted) == [1, 2, 3]
    assert [list(slotted[m]) for m in (1, 2, 3)] == [["a"], ["b"], ["c"]]


def test_events_before_origin_are_dropped(caplog):
    with caplog.at_level(logging.WARNING):
        slotted = slice_events([ActionEvent("a", ORIGIN - 1, frozenset({"t"})), ev("b", 1)], ORIGIN, DAY)
    assert list(slotted) == [1]
    assert "dropped 1 event" in caplog.text


@pytest.mark.parametrize("bad", [0, -5])
def test_non_positive_slice_is_configuration_error(bad):
    with pytest.raises(ConfigurationError):
        slice_events([ev("a", 1)], ORIGIN, bad)


def test_topic_filter_and_actors():
    events = [ev("a", 1, "x"), ev("a", 1, "y", 10), ev("b", 1, None)]
    assert list(slice_events(events, ORIGIN, DAY, topic="x")[1]) == ["a"]
    slotted = slice_events(events, ORIGIN, DAY)
    assert topic_actors(slotted, "y", 1) == {"a": (ORIGIN + 10,)}
    assert all_topics(events) == ["x", "y"]


def test_default_origin_floors_to_slice():
    assert default_origin([ev("a", 3, offset=500), ev("b", 2, offset=7)]) == ORIGIN + DAY


def test_action_log_round_trip(tmp_path):
    events = [ActionEvent("a", ORIGIN + 1, frozenset({"x"}), True, False, frozenset({"b"})), ev("b", 2)]
    write_action_log(events, tmp_path / "log.jsonl")
    assert sorted(read_action_log(tmp_path / "log.jsonl"), key=lambda e: e.timestamp) == events


def test_action_log_iso_timestamps(tmp_path):
    p = tmp_path / "log.jsonl"
    p.write_text('{"user": "a", "timestamp": "2009-10-01T00:00:00Z", "topics": ["t"]}\n')
    assert read_action_log(p)[0].timestamp == ORIGIN


@pytest.mark.parametrize(
    "line",
    [
        '{"timestamp": 5}',
        '{"user": "a"}',
        '{"user": "a", "timestamp": -3}',
        '{"user": "a", "timestamp": 5, "topics": "t"}',
        "[1, 2]",
        "{nope",
    ],
)
def test_malformed_log_line(tmp_path, line):
    p = tmp_path / "log.jsonl"
    p.write_text('{"user": "z", "timestamp": 10}\n\n' + line + "\n")
    with pytest.raises(ParseError) as info:
        read_action_log(p)
    assert info.value.line == 3


# -- building -----------------------------------------------------------------


def test_single_actor_is_a_seed():
    g = load_graph([], [UserRecord("a")])
    coll = build_collection(g, slice_events([ev("a", 1)], ORIGIN), "t", 1)
    assert len(coll.series) == 1
    (node,) = coll.series[0].seeds()
    assert node.key == ("a", 1) and node.parents == frozenset()


def test_chain4_collection(chain4):
    g, _, slotted = chain4
    coll = build_collection(g, slotted, "t", 4)
    s1, s2 = coll.series
    assert [n.key for n in s1] == [("A", 1), ("B", 2), ("C", 3), ("D", 4)]
    assert s1.nodes[("B", 2)].parents == {("A", 1)}
    assert s1.nodes[("C", 3)].parents == {("B", 2)}
    assert s1.nodes[("D", 4)].parents == {("C", 3)}
    assert [n.key for n in s2] == [("B", 3)]
    assert [n.key for n in s1.seeds()] == [("A", 1)]
    assert [n.key for n in s2.seeds()] == [("B", 3)]
    assert collection_report(coll) == (
        "topic,series,slot,user,parents\n"
        "t,0,1,A,\n"
        "t,0,2,B,A@1\n"
        "t,0,3,C,B@2\n"
        "t,0,4,D,C@3\n"
        "t,1,3,B,\n"
    )


def test_two_seeds_merge_through_common_child():
    users = [UserRecord(u) for u in "abc"]
    g = load_graph([("a", "c"), ("b", "c")], users)
    slotted = slice_events([ev("a", 1), ev("b", 1), ev("c", 2)], ORIGIN)
    coll = build_collection(g, slotted, "t", 2)
    assert len(coll.series) == 1
    assert coll.series[0].nodes[("c", 2)].parents == {("a", 1), ("b", 1)}
    assert len(coll.series[0].seeds()) == 2


def test_horizon_cuts_later_slots(chain4):
    g, _, slotted = chain4
    coll = build_collection(g, slotted, "t", 2)
    assert coll.horizon == 2
    assert {n.key for n in coll.nodes()} == {("A", 1), ("B", 2)}


def test_horizon_beyond_data_warns(chain4, caplog):
    g, _, slotted = chain4
    with caplog.at_level(logging.WARNING):
        coll = build_collection(g, slotted, "t", 6)
    assert coll.horizon == 6 and coll.n_nodes == 5
    assert "exceeds" in caplog.text
    with pytest.raises(ConfigurationError):
        build_collection(g, slotted, "t", 0)


def test_multiple_posts_collapse_into_one_node():
    g = load_graph([], [UserRecord("a")])
    slotted = slice_events([ev("a", 1, offset=9), ev("a", 1, offset=3)], ORIGIN)
    (node,) = build_collection(g, slotted, "t", 1).nodes()
    assert node.action_times == (ORIGIN + 3, ORIGIN + 9)


def test_users_outside_graph_are_ignored(chain4):
    g, events, _ = chain4
    slotted = slice_events(events + [ev("stranger", 2)], ORIGIN)
    assert "stranger" not in build_collection(g, slotted, "t", 4).users()
    assert topic_active_users(g, slotted, "t", 1, 4) == set("ABCD")
    assert topic_active_users(g, slotted, "t", 2, 3) == set("BC")


def test_builder_refuses_to_rebuild_a_slot(chain4):
    g, _, _ = chain4
    b = CollectionBuilder(g, "t")
    b.add_slot(1, {"A": (ORIGIN,)})
    with pytest.raises(ConfigurationError):
        b.add_slot(1, {"B": (ORIGIN,)})


def _random_instance(rng):
    n_users = rng.randint(1, 10)
    users = [f"u{i}" for i in range(n_users)]
    edges = [(a, b) for i, a in enumerate(users) for b in users[i + 1 :] if rng.random() < 0.35]
    events = []
    for m in range(1, rng.randint(1, 6) + 1):
        for u in users:
            if rng.random() < 0.4:
                events.append(ev(u, m, offset=rng.randint(0, 86399)))
    return users, edges, events


def test_series_match_weak_components_on_random_instances():
    rng = random.Random(7)
    for _ in range(100):
        users, edges, events = _random_instance(rng)
        if not events:
            continue
        g = load_graph(edges, [UserRecord(u) for u in users])
        slotted = slice_events(events, ORIGIN)
        horizon = max(slotted)
        coll = build_collection(g, slotted, "t", horizon)
        actions = {m: {u: [e.timestamp for e in es] for u, es in slotted[m].items()} for m in slotted}
        comps, parents, _ = brute_series(edges, actions)
        assert sorted(sorted(s.nodes) for s in coll.series) == sorted(sorted(c) for c in comps)
        for node in coll.nodes():
            assert node.parents == parents[node.key]


def test_rebuild_is_order_independent(chain4):
    g, events, _ = chain4
    shuffled = list(events)
    random.Random(3).shuffle(shuffled)
    a = build_collection(g, slice_events(events, ORIGIN), "t", 4)
    b = build_collection(g, slice_events(shuffled, ORIGIN), "t", 4)
    assert collection_report(a) == collection_report(b)
    assert a.signature() == b.signature()


def test_slot_counts_and_empty(chain4):
    g, _, slotted = chain4
    coll = build_collection(g, slotted, "t", 4)
    assert coll.slot_counts() == [1, 1, 2, 1]
    assert not coll.is_empty()
    assert build_collection(g, slotted, "other", 4).is_empty()


def test_chain4_events_fixture_is_what_it_claims():
    assert [(e.user, slot_of(e.timestamp, ORIGIN, DAY)) for e in chain4_events()] == [
        ("A", 1), ("B", 2), ("B", 3), ("C", 3), ("D", 4)
    ]
    assert chain4_graph().n_edges == 3
