"""Discrete hidden Markov models: forward, Viterbi and Baum-Welch.

Baum-Welch works on many sequences at once: identical sequences are
collapsed into weights, the rest are right-padded with a symbol every state
emits with probability one, and a single scaled forward-backward pass runs
over the whole batch.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import ModelError


@dataclass
class HMM:
    start: np.ndarray  # (S,)
    trans: np.ndarray  # (S, S), trans[i, j] = P(j | i)
    emit: np.ndarray  # (S, K), emit[s, o] = P(o | s)
    history: list = field(default_factory=list)

    @property
    def n_states(self) -> int:
        return self.start.shape[0]

    def log_likelihood(self, seq) -> float:
        seq = np.asarray(seq, dtype=np.int64)
        return float(_forward_group(self, seq[None, :])[1][0])

    def total_log_likelihood(self, sequences) -> float:
        return sum(self.log_likelihood(s) for s in sequences)

    def viterbi(self, seq) -> tuple[list[int], float]:
        """Most likely state path and its log joint probability."""
        seq = np.asarray(seq, dtype=np.int64)
        with np.errstate(divide="ignore"):
            ls, lt, le = np.log(self.start), np.log(self.trans), np.log(self.emit)
        delta = ls + le[:, seq[0]]
        back = []
        for o in seq[1:]:
            cand = delta[:, None] + lt
            arg = np.argmax(cand, axis=0)
            back.append(arg)
            delta = cand[arg, np.arange(self.n_states)] + le[:, o]
        last = int(np.argmax(delta))
        path = [last]
        for arg in reversed(back):
            path.append(int(arg[path[-1]]))
        return path[::-1], float(delta[last])

    def sample(self, n: int, length: int, rng: np.random.Generator) -> np.ndarray:
        out = np.empty((n, length), dtype=np.int64)
        s = np.array([rng.choice(self.n_states, p=self.start) for _ in range(n)])
        for t in range(length):
            u = rng.random(n)
            out[:, t] = (u[:, None] > np.cumsum(self.emit[s], axis=1)).sum(axis=1)
            if t + 1 < length:
                u = rng.random(n)
                s = (u[:, None] > np.cumsum(self.trans[s], axis=1)).sum(axis=1)
        return out

    def permuted(self, order) -> "HMM":
        order = np.asarray(order)
        return HMM(self.start[order], self.trans[np.ix_(order, order)], self.emit[order], list(self.history))

    def to_dict(self) -> dict:
        return {
            "start": self.start.tolist(),
            "trans": self.trans.tolist(),
            "emit": self.emit.tolist(),
            "history": list(self.history),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HMM":
        return cls(np.array(d["start"]), np.array(d["trans"]), np.array(d["emit"]), list(d.get("history", [])))


def _emission_table(hmm: HMM) -> np.ndarray:
    """Emission matrix with an extra all-ones column for the padding symbol."""
    return np.hstack([hmm.emit, np.ones((hmm.n_states, 1))])


def _forward_group(hmm: HMM, obs: np.ndarray, table: np.ndarray | None = None):
    """Scaled forward pass over ``obs`` (n, T). Returns (alpha_hat, loglik, scales).

    A symbol equal to ``n_symbols`` marks padding and is emitted with
    probability one by every state, so trailing padding leaves the
    likelihood unchanged.
    """
    n, T = obs.shape
    table = _emission_table(hmm) if table is None else table
    alpha = np.empty((n, T, hmm.n_states))
    scale = np.empty((n, T))
    a = hmm.start[None, :] * table[:, obs[:, 0]].T
    for t in range(T):
        if t > 0:
            a = (alpha[:, t - 1, :] @ hmm.trans) * table[:, obs[:, t]].T
        c = a.sum(axis=1)
        scale[:, t] = c
        alpha[:, t, :] = a / np.where(c > 0, c, 1.0)[:, None]
    with np.errstate(divide="ignore"):
        loglik = np.log(scale).sum(axis=1)
    return alpha, loglik, scale


def _backward_group(hmm: HMM, obs: np.ndarray, scale: np.ndarray, table: np.ndarray) -> np.ndarray:
    n, T = obs.shape
    beta = np.empty((n, T, hmm.n_states))
    beta[:, T - 1, :] = 1.0
    safe = np.where(scale > 0, scale, 1.0)
    for t in range(T - 2, -1, -1):
        b = (table[:, obs[:, t + 1]].T * beta[:, t + 1, :]) @ hmm.trans.T
        beta[:, t, :] = b / safe[:, t + 1, None]
    return beta


def _group(sequences, weights, pad: int):
    """Collapse identical sequences and right-pad them to a common length with ``pad``."""
    counts: Counter = Counter()
    for seq, w in zip(sequences, weights):
        counts[tuple(int(o) for o in seq)] += w
    seqs = sorted(counts)
    T = max(len(s) for s in seqs)
    obs = np.full((len(seqs), T), pad, dtype=np.int64)
    for i, seq in enumerate(seqs):
        obs[i, : len(seq)] = seq
    lengths = np.array([len(s) for s in seqs])
    return obs, np.array([counts[s] for s in seqs], dtype=float), lengths


def initial_hmm(n_states: int, n_symbols: int, seed: int, spread: float = 0.25) -> HMM:
    """Uniform parameters perturbed by seeded noise of relative size ``spread``."""
    rng = np.random.default_rng(seed)

    def rows(shape):
        m = 1.0 + rng.uniform(-spread, spread, size=shape)
        return m / m.sum(axis=-1, keepdims=True)

    return HMM(rows((n_states,)), rows((n_states, n_states)), rows((n_states, n_symbols)))


def baum_welch(
    sequences: Sequence,
    n_states: int = 2,
    n_symbols: int = 2,
    *,
    weights: Sequence[float] | None = None,
    max_iter: int = 200,
    tol: float = 1e-6,
    seed: int = 0,
    init: HMM | None = None,
) -> HMM:
    """Maximum-likelihood HMM by expectation-maximisation.

    Stops when the total log-likelihood improves by less than ``tol`` or after
    ``max_iter`` iterations. ``hmm.history`` holds the log-likelihood of the
    training data under the parameters of each iteration, ending with the
    returned model's.
    """
    if len(sequences) == 0:
        raise ModelError("no training sequences")
    weights = [1.0] * len(sequences) if weights is None else list(weights)
    if any(len(seq) == 0 for seq in sequences):
        raise ModelError("empty training sequence")
    obs, w, lengths = _group(sequences, weights, pad=n_symbols)
    real = np.arange(obs.shape[1])[None, :] < lengths[:, None]
    if obs[real].min() < 0 or obs[real].max() >= n_symbols:
        raise ModelError(f"observation symbols must lie in [0, {n_symbols})")
    onehot = obs[:, :, None] == np.arange(n_symbols)
    # a transition t -> t+1 counts only when both positions are real
    pair_w = w[:, None] * real[:, 1:]

    hmm = init if init is not None else initial_hmm(n_states, n_symbols, seed)
    hmm = HMM(hmm.start.copy(), hmm.trans.copy(), hmm.emit.copy())
    history: list[float] = []
    for _ in range(max_iter):
        table = _emission_table(hmm)
        alpha, loglik, scale = _forward_group(hmm, obs, table)
        beta = _backward_group(hmm, obs, scale, table)
        history.append(float(np.dot(w, loglik)))
        if len(history) > 1 and history[-1] - history[-2] < tol:
            break
        gamma = alpha * beta
        gamma /= np.maximum(gamma.sum(axis=2, keepdims=True), 1e-300)
        start_acc = w @ gamma[:, 0, :]
        emit_acc = np.einsum("n,nts,ntk->sk", w, gamma, onehot)
        trans_acc = np.zeros((n_states, n_states))
        if obs.shape[1] > 1:
            e_next = np.transpose(table[:, obs[:, 1:]], (1, 2, 0)) * beta[:, 1:, :]
            e_next /= np.maximum(scale[:, 1:, None], 1e-300)
            trans_acc = hmm.trans * np.einsum("nt,nti,ntj->ij", pair_w, alpha[:, :-1, :], e_next)
        hmm = HMM(
            _normalize(start_acc, hmm.start),
            _normalize(trans_acc, hmm.trans),
            _normalize(emit_acc, hmm.emit),
        )
    else:
        history.append(float(np.dot(w, _forward_group(hmm, obs)[1])))
    hmm.history = history
    return hmm


def _normalize(acc: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    s = acc.sum(axis=-1, keepdims=True)
    return np.where(s > 0, acc / np.where(s > 0, s, 1.0), fallback)


def canonical_order(hmm: HMM, symbol: int = 1) -> HMM:
    """Reorder states by increasing probability of emitting ``symbol``."""
    order = np.argsort(hmm.emit[:, symbol], kind="stable")
    return hmm.permuted(order)
