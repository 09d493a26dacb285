"""
Hashing, buckets and a first prediction
=======================================

A tiny walk through the learner on a hand-made stream.
"""

import numpy as np

from enhash import EnhashConfig, EnhashModel, hash_code

# three estimators with a coarse grid so buckets are easy to inspect
model = EnhashModel(2, EnhashConfig(num_estimators=3, bin_width=0.5, seed=1))
for est in model.estimators:
    print("weights", np.round(est.weights, 3), "bias", round(est.bias, 3))

###############################################################################
# Feed a few labelled points. ``update`` advances the step counter by one.

points = [([0.1, 0.1], 0), ([0.15, 0.12], 0), ([0.9, 0.8], 1), ([0.85, 0.9], 1)]
for x, y in points:
    model.update(np.array(x), y)

print("codes of (0.1, 0.1):", [hash_code(e, np.array([0.1, 0.1])) for e in model.estimators])
bucket = model.buckets[0][hash_code(model.estimators[0], np.array([0.1, 0.1]))]
print("bucket counts", bucket.counts, "last seen", bucket.tstamp)

###############################################################################
# Predictions sum log(1 + decayed share / distance to the class mean)
# over every estimator and pick the heaviest class.

for q in ([0.12, 0.1], [0.88, 0.85], [0.5, 0.5]):
    pred = model.predict(np.array(q))
    print(q, "->", pred.label, {c: round(w, 3) for c, w in pred.class_weights.items()})

print(model.footprint())
