"""Prediction methods: the DBN model and the five comparison baselines.

All methods train on slots ``1..N`` of an :class:`ActivityIndex` and return
``{user: probability of acting at N+1}``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ConfigurationError, ModelError
from .features import ActivityIndex
from .model import EmissionModel, TransitionModel, fit_emission_hmms, fit_transition_arrays, predict_action

log = logging.getLogger(__name__)

METHODS = ("DBN", "GenModel", "Cascade", "LinRegress", "DegAct", "Random")


@dataclass
class PredictorParams:
    n_bins: int = 5
    prior: float = 1.0
    tau: float = 0.5
    phi: float = 0.1
    max_iter: int = 200
    tol: float = 1e-6
    seed: int = 0


def transition_training_data(index: ActivityIndex, horizon: int):
    """Rows ``(state at m, features over 1..m, state at m+1)`` for m < horizon."""
    src, feats, dst = [], [], []
    for m in range(1, horizon):
        src.append(index.states(m))
        feats.append(index.features(m))
        dst.append(index.states(m + 1))
    if not src:
        return np.empty(0, dtype=np.int64), np.empty((0, 3)), np.empty(0, dtype=np.int64)
    return np.concatenate(src), np.vstack(feats), np.concatenate(dst)


def emission_training_data(index: ActivityIndex, horizon: int):
    """Action-history prefixes of length >= 2 labelled by the following slot."""
    seqs, labels = [], []
    for m in range(2, horizon):
        for row, y in zip(index.acted[:, :m], index.acted[:, m]):
            seqs.append(tuple(int(o) for o in row))
            labels.append(int(y))
    return seqs, labels


class DBNPredictor:
    """Feature-conditioned state transitions with HMM action emissions.

    ``use_features=False`` drops the feature term and gives the
    context-free generative baseline.
    """

    def __init__(self, params: PredictorParams | None = None, use_features: bool = True):
        self.params = params or PredictorParams()
        self.use_features = use_features
        self.transition: TransitionModel | None = None
        self.emission: EmissionModel | None = None

    def fit(self, index: ActivityIndex, horizon: int) -> "DBNPredictor":
        if horizon < 3:
            raise ModelError(f"need a training window of at least 3 slots, got {horizon}")
        p = self.params
        src, feats, dst = transition_training_data(index, horizon)
        self.transition = fit_transition_arrays(src, feats, dst, p.n_bins, p.prior)
        seqs, labels = emission_training_data(index, horizon)
        self.emission = fit_emission_hmms(
            seqs, labels, max_iter=p.max_iter, tol=p.tol, seed=p.seed, require_both=False
        )
        return self

    def predict(self, index: ActivityIndex, horizon: int, use_features: bool | None = None) -> dict:
        """Per-user probabilities; ``use_features`` overrides the constructor flag.

        The flag only changes inference, so one fitted model can serve both
        the full DBN and the context-free variant.
        """
        if self.transition is None:
            raise ModelError("predictor is not fitted")
        use_features = self.use_features if use_features is None else use_features
        feats = index.features(horizon)
        bins = self.transition.bin_index(feats)
        cache: dict = {}
        out = {}
        for i, u in enumerate(index.users):
            hist = tuple(int(o) for o in index.acted[i, :horizon])
            key = (hist, int(bins[i]))
            if key not in cache:
                cache[key] = predict_action(self.transition, self.emission, hist, feats[i], use_features)
            out[u] = cache[key]
        return out

    def to_json(self) -> str:
        return json.dumps(
            {
                "use_features": self.use_features,
                "params": asdict(self.params),
                "transition": self.transition.to_dict(),
                "emission": self.emission.to_dict(),
            },
            sort_keys=True,
            indent=1,
        )

    @classmethod
    def from_json(cls, text: str) -> "DBNPredictor":
        d = json.loads(text)
        obj = cls(PredictorParams(**d["params"]), d["use_features"])
        obj.transition = TransitionModel.from_dict(d["transition"])
        obj.emission = EmissionModel.from_dict(d["emission"])
        return obj


def cascade_predict(index: ActivityIndex, horizon: int, phi: float = 0.1) -> dict:
    """1 when the active fraction of friends at ``horizon`` reaches ``phi``."""
    if not 0.0 <= phi <= 1.0:
        raise ConfigurationError(f"cascade threshold must lie in [0, 1], got {phi}")
    frac = index.active_friend_fraction(horizon)
    hit = (frac >= phi) & (index.degree > 0)
    return {u: float(h) for u, h in zip(index.users, hit)}


class LinRegressPredictor:
    """Least-squares fit of the next action on ``(f1, f2, f3, 1)``."""

    def __init__(self):
        self.coef: np.ndarray | None = None

    def fit_arrays(self, features: np.ndarray, targets: np.ndarray) -> "LinRegressPredictor":
        x = np.column_stack([features, np.ones(len(features))])
        self.coef, *_ = np.linalg.lstsq(x, np.asarray(targets, dtype=float), rcond=None)
        return self

    def fit(self, index: ActivityIndex, horizon: int) -> "LinRegressPredictor":
        if horizon < 2:
            raise ModelError("need at least 2 slots to fit the regression")
        feats = np.vstack([index.features(m) for m in range(1, horizon)])
        y = np.concatenate([index.acted[:, m] for m in range(1, horizon)])
        return self.fit_arrays(feats, y)

    def predict_arrays(self, features: np.ndarray) -> np.ndarray:
        x = np.column_stack([features, np.ones(len(features))])
        return np.clip(x @ self.coef, 0.0, 1.0)

    def predict(self, index: ActivityIndex, horizon: int) -> dict:
        return dict(zip(index.users, self.predict_arrays(index.features(horizon)).tolist()))


def degact_predict(index: ActivityIndex, horizon: int) -> dict:
    """Post count at ``horizon`` relative to the busiest user."""
    counts = index.total[:, horizon - 1]
    top = counts.max() if counts.size else 0.0
    vals = counts / top if top > 0 else np.zeros_like(counts)
    return dict(zip(index.users, vals.tolist()))


def random_predict(users, seed: int = 0) -> dict:
    users = sorted(users)
    draws = np.random.default_rng(seed).random(len(users))
    return dict(zip(users, draws.tolist()))


def baseline_predict(method: str, index: ActivityIndex, horizon: int, params: PredictorParams | None = None) -> dict:
    params = params or PredictorParams()
    if method == "GenModel":
        return DBNPredictor(params, use_features=False).fit(index, horizon).predict(index, horizon)
    if method == "Cascade":
        return cascade_predict(index, horizon, params.phi)
    if method == "LinRegress":
        return LinRegressPredictor().fit(index, horizon).predict(index, horizon)
    if method == "DegAct":
        return degact_predict(index, horizon)
    if method == "Random":
        return random_predict(index.users, params.seed)
    raise ConfigurationError(f"unknown baseline {method!r}")


def predict_probabilities(method: str, index: ActivityIndex, horizon: int, params: PredictorParams | None = None) -> dict:
    """Probabilities of acting at ``horizon + 1`` for every user of the index."""
    params = params or PredictorParams()
    if method == "DBN":
        return DBNPredictor(params).fit(index, horizon).predict(index, horizon)
    if method not in METHODS:
        raise ConfigurationError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
    return baseline_predict(method, index, horizon, params)
