"""
Training the action HMMs
========================

Draw binary action histories from a known two-state HMM, fit a fresh model
with Baum-Welch and compare the two on held-out data. Then plug two fitted
HMMs and a transition model into the next-slot predictor.
"""

import numpy as np

from homophily_diffusion.predictor import HMM, EmissionModel, baum_welch, fit_transition_arrays, predict_action
from homophily_diffusion.predictor.hmm import canonical_order

rng = np.random.default_rng(0)

truth = HMM(
    start=np.array([1.0, 0.0]),
    trans=np.array([[0.9, 0.1], [0.2, 0.8]]),
    emit=np.array([[0.8, 0.2], [0.3, 0.7]]),
)
train = truth.sample(500, 20, rng)
held_out = truth.sample(500, 20, rng)

fitted = canonical_order(baum_welch(list(train), n_states=2, n_symbols=2, seed=1))
print("iterations:", len(fitted.history) - 1)
print("first and last training log-likelihood:", round(fitted.history[0], 2), round(fitted.history[-1], 2))
print("fitted emission rows:\n", fitted.emit.round(3))

ll_truth = sum(truth.log_likelihood(s) for s in held_out)
ll_fit = sum(fitted.log_likelihood(s) for s in held_out)
print(f"held-out log-likelihood  truth {ll_truth:.1f}  fitted {ll_fit:.1f}  gap {abs(ll_fit / ll_truth - 1):.3%}")

# A transition model from 2000 labelled steps with random features
src = rng.integers(0, 2, 2000)
dst = (rng.random(2000) < np.where(src == 1, 0.7, 0.2)).astype(int)
transition = fit_transition_arrays(src, rng.random((2000, 3)), dst)
print("transition rows:\n", transition.trans.round(3))

# Use the same HMM for both classes here; in the experiment one is trained
# on histories followed by an action and one on histories followed by none.
emission = EmissionModel({0: fitted, 1: fitted})
for history in [(0, 0, 0, 0), (0, 1, 1, 1), (1, 1, 1, 1)]:
    p = predict_action(transition, emission, history, features=(0.5, 0.5, 0.5))
    print(history, "->", round(p, 4))
