"""Synthetic experiments comparing transport-based merging with distance thresholds."""

import numpy as np

from .metrics import harmonic_mean, merge_discovery_accuracy
from .transport import (NEW, UotConfig, assign_from_plan, cost_matrix, match_by_distance,
                        uot_solve)

FIG1_POINT = (1.01, 0.45)
FIG1_MOVED = (1.02, 0.49)
# seed whose draw exhibits the crafted configuration: a source near the edge
# of the distance threshold of an already-claimed target
FIG1_SEED = 26


def fig1_toy(seed=FIG1_SEED, n_topics=5, spread=0.3, threshold=0.5, uot=None):
    """Two-dimensional perturbation toy.

    Previous topics are standard normal draws; new topics are the previous
    ones plus normal noise scaled by `spread`, with the first new topic
    pinned at (1.01, 0.45). Both matchers (UOT with Euclidean cost, and the
    nearest-neighbour baseline with `threshold`) are run before and after
    moving that point to (1.02, 0.49).
    """
    uot = uot or UotConfig(min_row_fraction=0.06)
    rng = np.random.default_rng(seed)
    prev = rng.normal(size=(2, n_topics))
    src = prev + spread * rng.normal(size=(2, n_topics))
    out = {"seed": seed, "threshold": threshold, "previous": prev.T.tolist()}
    for label, point in (("before", FIG1_POINT), ("after", FIG1_MOVED)):
        s = src.copy()
        s[:, 0] = point
        C = cost_matrix(s, prev, "euclidean")
        plan = uot_solve(C, cfg=uot)
        out[label] = {
            "sources": s.T.tolist(),
            "uot": assign_from_plan(plan, uot.mass_tol, uot.min_row_fraction),
            "euclidean": match_by_distance(C, threshold),
            "plan": plan.T.tolist(),
        }
    out["uot_stable"] = out["before"]["uot"] == out["after"]["uot"]
    out["euclidean_stable"] = out["before"]["euclidean"] == out["after"]["euclidean"]
    return out


def _trial(rng, n_proto, L, shared, noise_range):
    shift = rng.normal(size=L)
    protos = shared * shift[:, None] + rng.normal(size=(L, n_proto))
    perm = rng.permutation(n_proto)
    common, prev_only, novel = perm[:3], perm[3:5], perm[5:7]
    prev_ids = rng.permutation(np.concatenate([common, prev_only]))
    new_ids = np.concatenate([common, novel])
    scale = np.linalg.norm(protos, axis=0).mean() / np.sqrt(L)
    noise = rng.uniform(*noise_range) * scale
    prev = protos[:, prev_ids] + noise * rng.normal(size=(L, len(prev_ids)))
    new = protos[:, new_ids] + noise * rng.normal(size=(L, len(new_ids)))
    truth_common = {j: int(np.flatnonzero(prev_ids == new_ids[j])[0]) for j in range(3)}
    return prev, new, truth_common, [3, 4]


def merge_benchmark(trials=50, seed=0, L=50, n_proto=7, shared=1.0, noise_range=(0.4, 1.0),
                    cd_threshold=0.5, uot=None):
    """Merging/discovery accuracy of UOT (three costs) and the CD/ED threshold baselines.

    Each trial draws 7 prototypes sharing a common direction (so distinct
    topics are still correlated), keeps 3 of them in both steps, 2 only in
    the previous step and 2 only in the new one, and adds independent noise
    of a per-trial level to every embedding. The Euclidean threshold is the
    median norm of the previous embeddings, the distance at which two
    vectors of that norm have cosine distance 0.5.
    """
    uot = uot or UotConfig(min_row_fraction=0.06)
    rng = np.random.default_rng(seed)
    methods = ("UOT Cosine", "UOT Euclidean", "UOT Minkowski", "CD", "ED")
    scores = {m: ([], []) for m in methods}
    for _ in range(trials):
        prev, new, common, novel = _trial(rng, n_proto, L, shared, noise_range)
        ed_threshold = float(np.median(np.linalg.norm(prev, axis=0)))
        assignments = {}
        for name, metric, p in (("UOT Cosine", "cosine", None), ("UOT Euclidean", "euclidean", 2),
                                ("UOT Minkowski", "minkowski:3", 3)):
            C = cost_matrix(new, prev, metric)
            if p is not None:
                # a cost equal to the metric's threshold maps to the cosine threshold
                C.C = cd_threshold * C.C / np.median(np.linalg.norm(prev, ord=p, axis=0))
            plan = uot_solve(C, cfg=uot)
            assignments[name] = assign_from_plan(plan, uot.mass_tol, uot.min_row_fraction)
        assignments["CD"] = match_by_distance(cost_matrix(new, prev, "cosine"), cd_threshold)
        assignments["ED"] = match_by_distance(cost_matrix(new, prev, "euclidean"), ed_threshold)
        for name, a in assignments.items():
            ma, da = merge_discovery_accuracy(a, common, novel)
            scores[name][0].append(ma)
            scores[name][1].append(da)
    report = []
    for name in methods:
        ma, da = np.array(scores[name][0]), np.array(scores[name][1])
        report.append({
            "method": name,
            "MA_mean": float(ma.mean()), "MA_std": float(ma.std()),
            "DA_mean": float(da.mean()), "DA_std": float(da.std()),
            "H": harmonic_mean(float(ma.mean()), float(da.mean())),
        })
    return report


__all__ = ["fig1_toy", "merge_benchmark", "NEW"]


def synthetic_corpus(n_topics=3, V=200, L=20, docs_per_topic=300, doc_len=(40, 80),
                     purity=0.9, sharpness=4.0, seed=0):
    """Labelled bag-of-words documents drawn from known embedded topics.

    Returns (vocab, rho, pools, true_beta) where `pools` maps labels
    ``topic0..`` to BowDocuments and rho are random unit-scale embeddings.
    Each document puts `purity` of its mixture on its label's topic.
    """
    from .corpus import BowDocument, Vocabulary
    from .etm import compute_beta

    rng = np.random.default_rng(seed)
    rho = rng.normal(size=(L, V)) / np.sqrt(L)
    # orthogonal topic directions keep the true topics well separated
    alpha, _ = np.linalg.qr(rng.normal(size=(L, n_topics)))
    alpha *= sharpness * np.sqrt(L)
    beta = compute_beta(rho, alpha)
    vocab = Vocabulary([f"w{v:03d}" for v in range(V)])
    pools = {}
    for k in range(n_topics):
        docs = []
        for i in range(docs_per_topic):
            theta = np.full(n_topics, (1 - purity) / max(n_topics - 1, 1))
            theta[k] = purity if n_topics > 1 else 1.0
            n = int(rng.integers(doc_len[0], doc_len[1] + 1))
            words = rng.choice(V, size=n, p=beta @ theta)
            ids, counts = np.unique(words, return_counts=True)
            docs.append(BowDocument(f"t{k}_{i}", {int(a): int(b) for a, b in zip(ids, counts)}, f"topic{k}"))
        pools[f"topic{k}"] = docs
    return vocab, rho, pools, beta
