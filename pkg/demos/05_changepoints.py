"""
Detecting ruptures in topic-proportion series
=============================================

Each topic's proportion over time is fed to a Bayesian online change-point
detector. The posterior mass on run length 0 is the change probability.
"""

import numpy as np

from stream_etm.changepoint import OcpdPrior, changepoint_probabilities, detect, evaluate_roc

rng = np.random.default_rng(0)
series = {
    0: np.r_[rng.normal(0.5, 0.03, 6), rng.normal(0.2, 0.03, 5)],  # drops at step 7
    1: np.r_[rng.normal(0.3, 0.03, 9), rng.normal(0.6, 0.03, 2)],  # rises at step 10
    2: rng.normal(0.2, 0.03, 11),                                  # flat
}
prior = OcpdPrior(hazard_lambda=10)
for tid, xs in series.items():
    print(f"topic {tid}:", np.round(changepoint_probabilities(xs, prior), 2))

alerts = detect(series, prior, threshold=0.5)
print("alerts:", [(a.step, a.topic_id, round(float(a.probability), 2)) for a in alerts if a.step > 1])

# ROC against the true change steps, counting a hit within one step
truth = {7, 10}
points = evaluate_roc(truth, lambda thr: [a for a in detect(series, prior, thr) if a.step > 1],
                      np.linspace(0, 1, 11), range(2, 12))
for p in points[::2]:
    print(f"threshold {p['threshold']:.1f}: TPR {p['tpr']:.2f} FPR {p['fpr']:.2f}")
