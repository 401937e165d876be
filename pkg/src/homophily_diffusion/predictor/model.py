"""State-transition model, class-conditional emission HMMs and action prediction.

The expected action of a user at the next slot is

    sum over next states s' of P(act | s') * P(s' | current state, features)

where ``P(act | s')`` is the emission row of an HMM trained on action
histories and ``P(s' | s, F)`` is proportional to ``P(F | s') * P(s' | s)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import ConfigurationError, ModelError
from .features import EnvFeatures
from .hmm import HMM, baum_welch, canonical_order

log = logging.getLogger(__name__)

N_FEATURES = 3
ACTS, NOT_ACTS = 1, 0
CLASS_NAMES = {ACTS: "acts", NOT_ACTS: "not-acts"}


def _as_feature_matrix(features) -> np.ndarray:
    if isinstance(features, EnvFeatures):
        return features.as_array()[None, :]
    arr = np.asarray([f.as_array() if isinstance(f, EnvFeatures) else f for f in features], dtype=float)
    return arr.reshape(-1, N_FEATURES)


@dataclass
class TransitionModel:
    """``P(s' | s)`` plus a smoothed multinomial ``P(feature bin | s')``."""

    trans: np.ndarray  # (2, 2)
    feature_emission: np.ndarray  # (2, n_bins ** 3)
    boundaries: np.ndarray  # (3, n_bins - 1)
    n_bins: int
    prior: float = 1.0

    def bin_index(self, features) -> np.ndarray:
        x = _as_feature_matrix(features)
        idx = np.zeros(len(x), dtype=np.int64)
        for d in range(N_FEATURES):
            b = np.searchsorted(self.boundaries[d], x[:, d], side="right")
            idx = idx * self.n_bins + np.minimum(b, self.n_bins - 1)
        return idx

    def next_state_distribution(self, state: int, features, use_features: bool = True) -> np.ndarray:
        """Normalised ``P(s' | state, features)`` over ``s'``.

        Without features this is the plain transition row.
        """
        row = self.trans[state].copy()
        if use_features:
            row = row * self.feature_emission[:, self.bin_index(features)[0]]
        total = row.sum()
        if total <= 1e-300:
            log.warning("degenerate next-state distribution; falling back to uniform")
            return np.full(row.shape, 1.0 / row.size)
        return row / total

    def to_dict(self) -> dict:
        return {
            "trans": self.trans.tolist(),
            "feature_emission": self.feature_emission.tolist(),
            "boundaries": self.boundaries.tolist(),
            "n_bins": self.n_bins,
            "prior": self.prior,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TransitionModel":
        return cls(
            np.array(d["trans"]),
            np.array(d["feature_emission"]),
            np.array(d["boundaries"]).reshape(N_FEATURES, -1),
            int(d["n_bins"]),
            float(d["prior"]),
        )


def quantile_boundaries(x: np.ndarray, n_bins: int) -> np.ndarray:
    qs = np.arange(1, n_bins) / n_bins
    return np.vstack([np.quantile(x[:, d], qs) for d in range(x.shape[1])])


def fit_transition_model(
    sequences: Sequence[Sequence[tuple[int, object]]],
    n_bins: int = 5,
    prior: float = 1.0,
) -> TransitionModel:
    """Fit from per-user sequences of ``(state, features)`` ordered in time.

    Each consecutive pair ``(s_m, F_m) -> (s_{m+1}, .)`` contributes one
    transition count and one feature-bin count for the next state
    ``s_{m+1}``. Transitions use Dirichlet smoothing
    ``(count + prior) / (total + 2 prior)``; feature bins use add-one
    smoothing over all ``n_bins ** 3`` joint bins.
    """
    if n_bins < 2:
        raise ConfigurationError("need at least 2 bins")
    if not prior > 0:
        raise ConfigurationError("prior must be positive")
    src, dst, feats = [], [], []
    for seq in sequences:
        for (s, f), (s_next, _) in zip(seq[:-1], seq[1:]):
            src.append(int(s))
            dst.append(int(s_next))
            feats.append(f)
    return fit_transition_arrays(np.array(src), _as_feature_matrix(feats) if feats else np.empty((0, 3)), np.array(dst), n_bins, prior)


def fit_transition_arrays(
    states: np.ndarray, features: np.ndarray, next_states: np.ndarray, n_bins: int = 5, prior: float = 1.0
) -> TransitionModel:
    """Array form of :func:`fit_transition_model` (one row per transition)."""
    if len(states) == 0:
        raise ModelError("no transitions to fit")
    if n_bins < 2:
        raise ConfigurationError("need at least 2 bins")
    if not prior > 0:
        raise ConfigurationError("prior must be positive")
    states = np.asarray(states, dtype=np.int64)
    next_states = np.asarray(next_states, dtype=np.int64)
    counts = np.zeros((2, 2))
    np.add.at(counts, (states, next_states), 1.0)
    trans = (counts + prior) / (counts.sum(axis=1, keepdims=True) + 2 * prior)

    bounds = quantile_boundaries(np.asarray(features, dtype=float), n_bins)
    model = TransitionModel(trans, np.zeros((2, n_bins**N_FEATURES)), bounds, n_bins, prior)
    bins = model.bin_index(features)
    fcounts = np.zeros((2, n_bins**N_FEATURES))
    np.add.at(fcounts, (next_states, bins), 1.0)
    model.feature_emission = (fcounts + 1.0) / (fcounts.sum(axis=1, keepdims=True) + fcounts.shape[1])
    return model


@dataclass
class EmissionModel:
    """One HMM per class: histories followed by an action, and by none."""

    hmms: dict = field(default_factory=dict)  # class -> HMM

    def select(self, history) -> tuple[int, HMM]:
        """Class whose HMM gives ``history`` the higher likelihood (ties: not-acts)."""
        best, best_ll = None, -np.inf
        for cls in sorted(self.hmms):
            ll = self.hmms[cls].log_likelihood(history)
            if best is None or ll > best_ll:
                best, best_ll = cls, ll
        return best, self.hmms[best]

    def to_dict(self) -> dict:
        return {CLASS_NAMES[c]: h.to_dict() for c, h in sorted(self.hmms.items())}

    @classmethod
    def from_dict(cls, d: dict) -> "EmissionModel":
        names = {v: k for k, v in CLASS_NAMES.items()}
        return cls({names[k]: HMM.from_dict(v) for k, v in d.items()})


def fit_emission_hmms(
    sequences: Sequence,
    labels: Sequence[int],
    *,
    weights: Sequence[float] | None = None,
    max_iter: int = 200,
    tol: float = 1e-6,
    seed: int = 0,
    require_both: bool = True,
) -> EmissionModel:
    """Train one two-state binary HMM per class label with Baum-Welch.

    States of each trained HMM are reordered so that state 1 is the one more
    likely to emit an action.
    """
    weights = [1.0] * len(sequences) if weights is None else list(weights)
    model = EmissionModel()
    for cls in (NOT_ACTS, ACTS):
        idx = [i for i, y in enumerate(labels) if int(y) == cls]
        if not idx:
            if require_both:
                raise ModelError(f"no training sequences for class '{CLASS_NAMES[cls]}'")
            log.warning("no training sequences for class '%s'; using the other class only", CLASS_NAMES[cls])
            continue
        seqs = [sequences[i] for i in idx]
        if min(len(s) for s in seqs) < 2:
            raise ModelError("training sequences must have length >= 2")
        hmm = baum_welch(seqs, 2, 2, weights=[weights[i] for i in idx], max_iter=max_iter, tol=tol, seed=seed + cls)
        model.hmms[cls] = canonical_order(hmm)
    if not model.hmms:
        raise ModelError("no training sequences for either class")
    return model


def predict_action(
    transition: TransitionModel,
    emission: EmissionModel,
    history,
    features,
    use_features: bool = True,
) -> float:
    """Expected action at the next slot given the action ``history`` so far."""
    history = np.asarray(history, dtype=np.int64)
    if history.size < 1:
        raise ModelError("empty history")
    _, hmm = emission.select(history)
    path, _ = hmm.viterbi(history)
    current = path[-1]
    nxt = transition.next_state_distribution(current, features, use_features)
    value = float(np.dot(hmm.emit[:, 1], nxt))
    return min(1.0, max(0.0, value))
