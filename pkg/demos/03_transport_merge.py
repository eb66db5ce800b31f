"""
Matching topics across time with unbalanced optimal transport
=============================================================

New-batch topics are matched to previous ones through a transport plan
whose marginals are only softly enforced. A new topic that ships almost no
mass is a discovery. Distance thresholds are the baseline.
"""

import numpy as np

from stream_etm.stream import merge_alphas
from stream_etm.toys import fig1_toy, merge_benchmark
from stream_etm.transport import UotConfig, assign_from_plan, cost_matrix, match_by_distance, uot_solve

rng = np.random.default_rng(3)
prev = rng.normal(size=(10, 3))
new = np.column_stack([prev[:, 1] + 0.2 * rng.normal(size=10),
                       prev[:, 0] + 0.2 * rng.normal(size=10),
                       rng.normal(size=10)])  # the third one is unrelated

C = cost_matrix(new, prev, "cosine")
cfg = UotConfig(min_row_fraction=0.06)
plan = uot_solve(C, cfg=cfg)
np.set_printoptions(precision=3, suppress=True)
print("cost\n", C.C)
print("plan\n", plan.T)
print("row mass / source mass:", plan.T.sum(axis=1) / plan.a_tilde)
print("UOT assignment:", assign_from_plan(plan, cfg.mass_tol, cfg.min_row_fraction))
print("cosine threshold 0.5:", match_by_distance(C, 0.5))

merged, report = merge_alphas(new, prev, plan, omega=0.5, min_row_fraction=cfg.min_row_fraction)
print(f"merged embeddings: {merged.shape[1]} topics, matches {report.matches}, "
      f"discoveries {report.discoveries}")

###############################################################################
# Stability under a small perturbation: the 2-D toy

toy = fig1_toy()
print("\nUOT       before/after:", toy["before"]["uot"], toy["after"]["uot"])
print("Euclidean before/after:", toy["before"]["euclidean"], toy["after"]["euclidean"])

###############################################################################
# Merging and discovery accuracy over 50 synthetic trials

for row in merge_benchmark(trials=50, seed=0):
    print(f"{row['method']:<14} MA {row['MA_mean']:.2f}  DA {row['DA_mean']:.2f}  H {row['H']:.2f}")
