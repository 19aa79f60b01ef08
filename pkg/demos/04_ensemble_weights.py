#!/usr/bin/env python3
"""How validation confusions become ensemble weights, using the published
per-member test confusions of the public benchmark's subject A.

Each member's weight is its share of total true predictions,
W_k = (TP_k + TN_k) / sum_i (TP_i + TN_i), so members that misfire on
their subset contribute proportionally less to the flash score.
"""

import numpy as np

from p3speller import ensemble, metrics
from p3speller.metrics import ConfusionMatrix

members = [
    ConfusionMatrix(tp=1053, tn=9081, fn=1947, fp=5919),
    ConfusionMatrix(tp=374, tn=12906, fn=2626, fp=2094),
    ConfusionMatrix(tp=840, tn=10489, fn=2160, fp=4511),
    ConfusionMatrix(tp=2327, tn=3118, fn=673, fp=11882),
    ConfusionMatrix(tp=259, tn=13624, fn=2741, fp=1376),
]

weights = ensemble.compute_weights(members)

print("member   TP     TN     FN     FP      T=TP+TN   weight   acc    f1")
for i, (c, w) in enumerate(zip(members, weights)):
    m = metrics.prf1(c)
    print(f"  {i}    {c.tp:5d}  {c.tn:5d}  {c.fn:5d}  {c.fp:5d}   "
          f"{c.true_predictions:6d}   {w:.5f}  {m['accuracy']:.3f}  "
          f"{m['f1']:.3f}")
print(f"                                      total "
      f"{sum(c.true_predictions for c in members):6d}   "
      f"{weights.sum():.5f}")

print("\nweighted scores are convex combinations of member probabilities:")
probs = np.array([0.9, 0.2, 0.6, 0.1, 0.8])
print(f"  member probabilities: {probs}")
print(f"  ensemble score:       {float(weights @ probs):.5f}")
print(f"  bounds:               [{probs.min()}, {probs.max()}]")

print("\nweight sensitivity: doubling every count leaves weights unchanged")
doubled = [ConfusionMatrix(c.tp * 2, c.tn * 2, c.fp * 2, c.fn * 2)
           for c in members]
print(f"  max |difference| = "
      f"{np.abs(ensemble.compute_weights(doubled) - weights).max():.2e}")
