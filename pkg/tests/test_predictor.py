import itertools
import logging

import numpy as np
import pytest

from homophily_diffusion.diffusion import build_collection, collection_report
from homophily_diffusion.errors import ConfigurationError, ModelError
from homophily_diffusion.events import slice_events
from homophily_diffusion.graph import load_graph
from homophily_diffusion.predictor import (
    HMM,
    ActivityIndex,
    DBNPredictor,
    EmissionModel,
    LinRegressPredictor,
    PredictorParams,
    TransitionModel,
    baum_welch,
    cascade_predict,
    degact_predict,
    extend_collection,
    extract_env_features,
    fit_emission_hmms,
    fit_transition_arrays,
    fit_transition_model,
    label_states,
    predict_action,
    predict_probabilities,
    random_predict,
)
from homophily_diffusion.predictor.hmm import canonical_order
from homophily_diffusion.schema import ActionEvent, UserRecord
from homophily_diffusion.synth import SynthConfig, generate

from conftest import ORIGIN
from oracles import best_path, brute_predict, forward_loglik, path_likelihood

DAY = 86400.0


# -- features and states ------------------------------------------------------


def test_chain4_features_of_c(chain4):
    g, _, slotted = chain4
    index = ActivityIndex(g, slotted, "t", 4)
    assert extract_env_features("C", (1, 3), index).as_array().tolist() == [1.0, 1.0, 1.0]
    np.testing.assert_array_equal(index.features(3)[index.pos["C"]], [1.0, 1.0, 1.0])


def test_silent_user_has_zero_own_activity(chain4):
    g, _, slotted = chain4
    index = ActivityIndex(g, slotted, "t", 4)
    f = extract_env_features("D", (1, 2), index)
    assert f.own_activity == 0.0
    assert f.friends_activity == 0.0  # C is silent on days 1-2
    assert f.topic_popularity == 1.0


def test_off_topic_posts_dilute_the_ratios():
    g = load_graph([("a", "b")], [UserRecord("a"), UserRecord("b")])
    events = [
        ActionEvent("a", ORIGIN, frozenset({"t"})),
        ActionEvent("a", ORIGIN + 10, frozenset()),
        ActionEvent("a", ORIGIN + 20, frozenset()),
        ActionEvent("b", ORIGIN + 30, frozenset({"x"})),
    ]
    index = ActivityIndex(g, slice_events(events, ORIGIN), "t", 1)
    fa = extract_env_features("a", (1, 1), index)
    fb = extract_env_features("b", (1, 1), index)
    assert fa.own_activity == pytest.approx(1 / 3)
    assert fa.friends_activity == 0.0
    assert fb.friends_activity == pytest.approx(1 / 3)
    assert fa.topic_popularity == fb.topic_popularity == pytest.approx(1 / 4)


def test_chain4_states_of_b(chain4):
    g, _, slotted = chain4
    index = ActivityIndex(g, slotted, "t", 4)
    assert label_states("B", (1, 4), index) == [0, 1, 0, 1]
    stacked = np.column_stack([index.states(m) for m in range(1, 5)])
    assert stacked[index.pos["B"]].tolist() == [0, 1, 0, 1]
    for u in "ABCD":
        assert stacked[index.pos[u]].tolist() == label_states(u, (1, 4), index)


def test_friendless_user_is_always_indifferent():
    g = load_graph([], [UserRecord("a")])
    slotted = slice_events([ActionEvent("a", ORIGIN + m * DAY, frozenset({"t"})) for m in range(3)], ORIGIN)
    assert label_states("a", (1, 3), ActivityIndex(g, slotted, "t", 3)) == [0, 0, 0]


def test_always_active_friends_make_vulnerable_from_slot_two():
    g = load_graph([("a", "b"), ("a", "c")], [UserRecord(u) for u in "abc"])
    events = [ActionEvent(u, ORIGIN + m * DAY, frozenset({"t"})) for m in range(5) for u in "bc"]
    index = ActivityIndex(g, slice_events(events, ORIGIN), "t", 5)
    assert label_states("a", (1, 5), index) == [0, 1, 1, 1, 1]


# -- transition model ---------------------------------------------------------


def _sample_transitions(trans, n, rng):
    src = rng.integers(0, 2, size=n)
    dst = (rng.random(n) < trans[src, 1]).astype(np.int64)
    return src, dst


def run_transition_recovery(seed=5, n=10_000):
    truth = np.array([[0.8, 0.2], [0.3, 0.7]])
    rng = np.random.default_rng(seed)
    src, dst = _sample_transitions(truth, n, rng)
    model = fit_transition_arrays(src, rng.random((n, 3)), dst, n_bins=5, prior=1.0)
    return float(np.max(np.abs(model.trans - truth)))


def test_transition_matrix_recovered_from_10k_samples():
    assert run_transition_recovery() <= 0.02


def test_dirichlet_smoothing_formula():
    # 4 transitions 0->0, 1 transition 0->1, none from state 1
    src = np.array([0, 0, 0, 0, 0])
    dst = np.array([0, 0, 0, 0, 1])
    m = fit_transition_arrays(src, np.zeros((5, 3)), dst, prior=1.0)
    np.testing.assert_allclose(m.trans, [[5 / 7, 2 / 7], [0.5, 0.5]], atol=1e-15)
    m2 = fit_transition_arrays(src, np.zeros((5, 3)), dst, prior=0.5)
    np.testing.assert_allclose(m2.trans[0], [4.5 / 6, 1.5 / 6], atol=1e-15)


def test_huge_prior_gives_uniform_rows():
    rng = np.random.default_rng(0)
    src, dst = _sample_transitions(np.array([[0.95, 0.05], [0.1, 0.9]]), 500, rng)
    m = fit_transition_arrays(src, rng.random((500, 3)), dst, prior=1e9)
    np.testing.assert_allclose(m.trans, 0.5, atol=1e-6)


def test_feature_bins_are_laplace_smoothed():
    feats = np.array([[0.0, 0.0, 0.0]] * 3 + [[1.0, 1.0, 1.0]])
    m = fit_transition_arrays(np.zeros(4, int), feats, np.array([1, 1, 1, 1]), n_bins=2)
    assert m.feature_emission.shape == (2, 8)
    # nothing ever moved into state 0: uniform over the 8 joint bins
    np.testing.assert_allclose(m.feature_emission[0], 1 / 8)
    assert np.all(m.feature_emission > 0)
    np.testing.assert_allclose(m.feature_emission.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(m.trans.sum(axis=1), 1.0, atol=1e-12)


def test_sequence_interface_matches_array_interface():
    seqs = [[(0, (0.1, 0.2, 0.3)), (1, (0.5, 0.5, 0.5)), (1, (0.9, 0.1, 0.0))], [(1, (0.0, 0.0, 1.0)), (0, (1, 1, 1))]]
    a = fit_transition_model(seqs, n_bins=3)
    b = fit_transition_arrays(
        np.array([0, 1, 1]), np.array([(0.1, 0.2, 0.3), (0.5, 0.5, 0.5), (0.0, 0.0, 1.0)]), np.array([1, 1, 0]), n_bins=3
    )
    np.testing.assert_array_equal(a.trans, b.trans)
    np.testing.assert_array_equal(a.feature_emission, b.feature_emission)


def test_transition_errors():
    with pytest.raises(ModelError):
        fit_transition_model([[(0, (0, 0, 0))]])
    with pytest.raises(ConfigurationError):
        fit_transition_arrays(np.array([0]), np.zeros((1, 3)), np.array([1]), n_bins=1)
    with pytest.raises(ConfigurationError):
        fit_transition_arrays(np.array([0]), np.zeros((1, 3)), np.array([1]), prior=0.0)


# -- HMMs ---------------------------------------------------------------------

TRUTH = HMM(np.array([1.0, 0.0]), np.array([[0.9, 0.1], [0.2, 0.8]]), np.array([[0.8, 0.2], [0.3, 0.7]]))


def run_baum_welch_recovery(seed=11):
    rng = np.random.default_rng(seed)
    train = TRUTH.sample(500, 20, rng)
    held = TRUTH.sample(500, 20, rng)
    fitted = baum_welch(list(train), 2, 2, seed=seed)
    truth_ll = sum(TRUTH.log_likelihood(s) for s in held)
    fit_ll = sum(fitted.log_likelihood(s) for s in held)
    return fitted, abs(fit_ll - truth_ll) / abs(truth_ll)


def test_baum_welch_recovers_held_out_likelihood():
    fitted, rel = run_baum_welch_recovery()
    assert rel <= 0.02
    assert np.all(np.diff(fitted.history) >= -1e-9)


def test_forward_matches_log_space_recursion():
    rng = np.random.default_rng(2)
    for _ in range(20):
        hmm = HMM(rng.dirichlet([1, 1]), rng.dirichlet([1, 1], 2), rng.dirichlet([1, 1], 2))
        seq = rng.integers(0, 2, size=rng.integers(1, 9))
        assert hmm.log_likelihood(seq) == pytest.approx(forward_loglik(hmm.start, hmm.trans, hmm.emit, seq), abs=1e-10)
        if len(seq) <= 6:
            assert np.exp(hmm.log_likelihood(seq)) == pytest.approx(
                path_likelihood(hmm.start, hmm.trans, hmm.emit, seq), rel=1e-10
            )


@pytest.mark.parametrize("seed", range(6))
def test_baum_welch_history_never_decreases(seed):
    rng = np.random.default_rng(seed)
    seqs = [rng.integers(0, 2, size=rng.integers(2, 12)) for _ in range(40)]
    hmm = baum_welch(seqs, 2, 2, seed=seed, max_iter=60, tol=0.0)
    assert len(hmm.history) >= 2
    assert np.all(np.diff(hmm.history) >= -1e-9)
    # last entry is the returned model's likelihood
    assert hmm.history[-1] == pytest.approx(hmm.total_log_likelihood(seqs), abs=1e-8)


def test_weights_equal_repetition():
    rng = np.random.default_rng(9)
    seqs = [tuple(rng.integers(0, 2, size=6)) for _ in range(10)]
    a = baum_welch(seqs * 3, seed=1, max_iter=30)
    b = baum_welch(seqs, seed=1, max_iter=30, weights=[3.0] * 10)
    np.testing.assert_allclose(a.emit, b.emit, atol=1e-12)
    np.testing.assert_allclose(a.trans, b.trans, atol=1e-12)


def test_all_ones_sequences_give_acting_state():
    model = fit_emission_hmms([(1, 1, 1, 1)] * 20 + [(0, 1, 0, 0)] * 5, [1] * 20 + [0] * 5)
    assert model.hmms[1].emit[1, 1] >= 0.99
    for hmm in model.hmms.values():
        np.testing.assert_allclose(hmm.trans.sum(axis=1), 1.0, atol=1e-12)
        assert hmm.emit[1, 1] >= hmm.emit[0, 1]


def test_emission_training_errors():
    with pytest.raises(ModelError, match="acts"):
        fit_emission_hmms([(0, 1), (1, 0)], [0, 0])
    with pytest.raises(ModelError):
        fit_emission_hmms([(0,), (1, 0)], [0, 1])
    with pytest.raises(ModelError):
        baum_welch([])
    with pytest.raises(ModelError):
        baum_welch([(0, 2)], 2, 2)


def test_emission_training_is_deterministic():
    seqs = [(0, 1, 1), (1, 1, 0), (0, 0, 0), (1, 0, 1)]
    a = fit_emission_hmms(seqs, [1, 0, 0, 1], seed=4)
    b = fit_emission_hmms(seqs, [1, 0, 0, 1], seed=4)
    assert a.to_dict() == b.to_dict()


def test_viterbi_agrees_with_path_search():
    rng = np.random.default_rng(13)
    for _ in range(30):
        hmm = HMM(rng.dirichlet([1, 1]), rng.dirichlet([1, 1], 2), rng.dirichlet([1, 1], 2))
        seq = tuple(rng.integers(0, 2, size=rng.integers(1, 7)))
        path, lp = hmm.viterbi(seq)
        want, p = best_path(hmm.start, hmm.trans, hmm.emit, seq)
        assert tuple(path) == want
        assert lp == pytest.approx(np.log(p), abs=1e-10)


def test_canonical_order_puts_acting_state_last():
    hmm = HMM(np.array([0.3, 0.7]), np.array([[0.6, 0.4], [0.1, 0.9]]), np.array([[0.2, 0.8], [0.9, 0.1]]))
    c = canonical_order(hmm)
    np.testing.assert_array_equal(c.emit, [[0.9, 0.1], [0.2, 0.8]])
    np.testing.assert_array_equal(c.trans, [[0.9, 0.1], [0.4, 0.6]])
    assert c.log_likelihood((1, 0, 1)) == pytest.approx(hmm.log_likelihood((1, 0, 1)), abs=1e-14)


# -- predict_action against path enumeration ----------------------------------


def _random_models(rng, n_bins=2):
    hmms = {cls: HMM(rng.dirichlet([1, 1]), rng.dirichlet([1, 1], 2), rng.dirichlet([1, 1], 2)) for cls in (0, 1)}
    emission = EmissionModel(hmms)
    fe = rng.dirichlet(np.ones(n_bins**3), 2)
    transition = TransitionModel(rng.dirichlet([1, 1], 2), fe, np.full((3, n_bins - 1), 0.5), n_bins)
    return transition, emission


def run_enumeration_check(n_models=12, seed=3):
    """Worst gap between predict_action and the path-sum oracle over all histories up to length 6."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_models):
        transition, emission = _random_models(rng)
        feats = rng.random(3)
        fbin = int(transition.bin_index(feats)[0])
        hmms = {c: (h.start, h.trans, h.emit) for c, h in emission.hmms.items()}
        for length in range(1, 7):
            for hist in itertools.product((0, 1), repeat=length):
                for use in (True, False):
                    got = predict_action(transition, emission, hist, feats, use_features=use)
                    term = transition.feature_emission[:, fbin] if use else None
                    want = brute_predict(hmms, transition.trans, term, hist)
                    worst = max(worst, abs(got - want))
    return worst


def test_predict_action_matches_path_enumeration():
    assert run_enumeration_check() <= 1e-12


def test_equal_emission_rows_give_that_rate():
    rng = np.random.default_rng(1)
    transition, _ = _random_models(rng)
    hmm = HMM(np.array([0.5, 0.5]), np.array([[0.7, 0.3], [0.2, 0.8]]), np.array([[0.65, 0.35], [0.65, 0.35]]))
    em = EmissionModel({0: hmm, 1: hmm})
    for hist in [(0,), (1, 1, 0), (0, 0, 0, 1)]:
        assert predict_action(transition, em, hist, rng.random(3)) == pytest.approx(0.35, abs=1e-15)


def test_sure_move_to_acting_state_gives_one():
    hmm = HMM(np.array([0.5, 0.5]), np.array([[0.5, 0.5], [0.5, 0.5]]), np.array([[0.5, 0.5], [0.0, 1.0]]))
    fe = np.full((2, 8), 1 / 8)
    transition = TransitionModel(np.array([[0.0, 1.0], [0.0, 1.0]]), fe, np.full((3, 1), 0.5), 2)
    assert predict_action(transition, EmissionModel({1: hmm}), (0, 1, 1), (0.2, 0.2, 0.2)) == 1.0


def test_degenerate_next_state_falls_back_to_uniform(caplog):
    hmm = HMM(np.array([0.5, 0.5]), np.full((2, 2), 0.5), np.array([[0.9, 0.1], [0.3, 0.7]]))
    fe = np.zeros((2, 8))
    transition = TransitionModel(np.full((2, 2), 0.5), fe, np.full((3, 1), 0.5), 2)
    with caplog.at_level(logging.WARNING):
        value = predict_action(transition, EmissionModel({0: hmm}), (1,), (0, 0, 0))
    assert value == pytest.approx(0.4)
    assert "uniform" in caplog.text


def test_empty_history_is_model_error():
    transition, emission = _random_models(np.random.default_rng(0))
    with pytest.raises(ModelError):
        predict_action(transition, emission, (), (0, 0, 0))


# -- fitted predictors on generated data --------------------------------------


@pytest.fixture(scope="module")
def synth_index():
    cfg = SynthConfig(n_users=80, rng_seed=2, repost_prob=0.5, n_slots=8)
    graph, events, _ = generate(cfg)
    slotted = slice_events(events, cfg.origin)
    return graph, slotted, ActivityIndex(graph, slotted, cfg.topic, 8)


def test_uniform_feature_term_makes_full_and_context_free_agree(synth_index):
    _, _, index = synth_index
    model = DBNPredictor(PredictorParams(max_iter=50)).fit(index, 6)
    model.transition.feature_emission[:] = 1.0 / model.transition.feature_emission.shape[1]
    full = model.predict(index, 6, use_features=True)
    free = model.predict(index, 6, use_features=False)
    assert full.keys() == free.keys()
    assert max(abs(full[u] - free[u]) for u in full) <= 1e-12


def test_dbn_outputs_are_probabilities(synth_index):
    _, _, index = synth_index
    for method in ("DBN", "GenModel", "LinRegress", "DegAct", "Random", "Cascade"):
        probs = predict_probabilities(method, index, 6, PredictorParams(max_iter=50))
        assert set(probs) == set(index.users)
        assert all(0.0 <= p <= 1.0 for p in probs.values())


def test_model_json_round_trip(synth_index):
    _, _, index = synth_index
    model = DBNPredictor(PredictorParams(max_iter=50, seed=3)).fit(index, 6)
    back = DBNPredictor.from_json(model.to_json())
    assert back.to_json() == model.to_json()
    assert back.predict(index, 6) == model.predict(index, 6)


def test_dbn_needs_three_slots(synth_index):
    _, _, index = synth_index
    with pytest.raises(ModelError):
        DBNPredictor().fit(index, 2)
    with pytest.raises(ModelError):
        DBNPredictor().predict(index, 4)


def test_unknown_method_is_configuration_error(synth_index):
    with pytest.raises(ConfigurationError):
        predict_probabilities("Oracle", synth_index[2], 4)


# -- baselines ----------------------------------------------------------------


def _star(active):
    users = ["hub", "a", "b", "c", "d", "lonely"]
    g = load_graph([("hub", u) for u in "abcd"], [UserRecord(u) for u in users])
    events = [ActionEvent(u, ORIGIN + 5, frozenset({"t"})) for u in active]
    return ActivityIndex(g, slice_events(events, ORIGIN), "t", 1)


def test_cascade_boundary_is_inclusive():
    index = _star("ab")
    assert cascade_predict(index, 1, phi=0.5)["hub"] == 1.0
    assert cascade_predict(index, 1, phi=0.51)["hub"] == 0.0
    assert cascade_predict(index, 1, phi=0.0)["lonely"] == 0.0


def test_cascade_is_monotone_in_active_fraction():
    outs = [cascade_predict(_star("abcd"[:k]), 1, phi=0.3)["hub"] for k in range(5)]
    assert outs == sorted(outs)
    for phi in (-0.1, 1.1):
        with pytest.raises(ConfigurationError):
            cascade_predict(_star("a"), 1, phi=phi)


def test_random_baseline_is_seeded():
    users = [f"u{i}" for i in range(50)]
    assert random_predict(users, seed=4) == random_predict(list(reversed(users)), seed=4)
    assert random_predict(users, seed=4) != random_predict(users, seed=5)
    assert all(0 <= p < 1 for p in random_predict(users).values())


def test_degact_normalises_by_busiest_user():
    g = load_graph([], [UserRecord(u) for u in "abc"])
    events = [ActionEvent("a", ORIGIN + i, frozenset()) for i in range(4)] + [ActionEvent("b", ORIGIN + 9, frozenset({"t"}))]
    index = ActivityIndex(g, slice_events(events, ORIGIN), "t", 1)
    assert degact_predict(index, 1) == {"a": 1.0, "b": 0.25, "c": 0.0}


def run_linregress_recovery(seed=8, n=10_000):
    rng = np.random.default_rng(seed)
    f = rng.random((n, 3))
    y = np.clip(0.2 + 0.6 * f[:, 1], 0, 1) + rng.normal(0, 0.1, n)
    return LinRegressPredictor().fit_arrays(f, y).coef


def test_linregress_recovers_friend_coefficient():
    coef = run_linregress_recovery()
    assert abs(coef[1] - 0.6) <= 0.1
    assert abs(coef[3] - 0.2) <= 0.1
    pred = LinRegressPredictor()
    pred.coef = np.array([2.0, 0.0, 0.0, -0.5])
    np.testing.assert_array_equal(pred.predict_arrays(np.array([[0, 0, 0], [1, 0, 0]])), [0.0, 1.0])


# -- extending collections ----------------------------------------------------


def test_extension_links_predicted_user_to_active_friend(chain4):
    g, _, slotted = chain4
    coll = build_collection(g, slotted, "t", 2)
    ext = extend_collection(coll, {"C": 0.9, "A": 0.2, "D": 0.0}, 0.5, g, origin=ORIGIN)
    assert ext.horizon == 3
    (series,) = ext.series
    assert series.nodes[("C", 3)].parents == {("B", 2)}
    assert series.nodes[("C", 3)].action_times == (ORIGIN + 2 * DAY,)


def test_extension_with_nobody_above_threshold(chain4):
    g, _, slotted = chain4
    coll = build_collection(g, slotted, "t", 2)
    ext = extend_collection(coll, {"C": 0.4}, 0.5, g)
    assert ext.horizon == 3
    assert collection_report(ext) == collection_report(coll)


def test_zero_threshold_takes_every_positive_user(chain4):
    g, _, slotted = chain4
    coll = build_collection(g, slotted, "t", 2)
    ext = extend_collection(coll, {"A": 0.01, "C": 1e-9, "D": 0.0}, 0.0, g, origin=ORIGIN)
    assert {n.key for n in ext.nodes_at(3)} == {("A", 3), ("C", 3)}
    # D's only friend C was not active at slot 2: parentless, new series at the slot midpoint
    ext2 = extend_collection(coll, {"D": 0.8}, 0.5, g, origin=ORIGIN)
    (node,) = ext2.nodes_at(3)
    assert node.parents == frozenset() and node.action_times == (ORIGIN + 2.5 * DAY,)
    assert len(ext2.series) == 2
    with pytest.raises(ConfigurationError):
        extend_collection(coll, {}, 1.5, g)


def test_extension_merges_series_through_new_node():
    users = [UserRecord(u) for u in "abc"]
    g = load_graph([("a", "c"), ("b", "c")], users)
    slotted = slice_events([ActionEvent(u, ORIGIN, frozenset({"t"})) for u in "ab"], ORIGIN)
    coll = build_collection(g, slotted, "t", 1)
    assert len(coll.series) == 2
    ext = extend_collection(coll, {"c": 1.0}, 0.5, g, origin=ORIGIN)
    assert len(ext.series) == 1
    assert ext.series[0].nodes[("c", 2)].parents == {("a", 1), ("b", 1)}
