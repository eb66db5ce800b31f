"""The online loop: per-batch training, transport merge, frozen-alpha retraining.

Also holds the batch schedule generators used to simulate a stream from a
labelled corpus.
"""

import csv
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .corpus import Batch
from .errors import DimensionError, InvalidConfig, PoolError, ScheduleError
from .etm import TrainConfig, compute_beta, init_model, theta_mean, train, xavier_uniform
from .metrics import top_words
from .transport import NEW, TransportPlan, UotConfig, assign_from_plan, cost_matrix, uot_solve

log = logging.getLogger(__name__)


@dataclass
class MergeConfig:
    omega: float = 0.5
    uot: UotConfig = field(default_factory=lambda: UotConfig(min_row_fraction=0.06))
    metric: str = "cosine"

    def __post_init__(self):
        if not 0 <= self.omega <= 1:
            raise InvalidConfig("omega must be in [0, 1]")


@dataclass
class StreamConfig:
    n_topics: int = 3
    hidden: int = 800
    train: TrainConfig = field(default_factory=TrainConfig)
    merge: MergeConfig = field(default_factory=MergeConfig)
    seed: int = 0
    top_n: int = 5


@dataclass
class MergeReport:
    # matches: (j, k) pairs, j a new-topic column and k a previous column
    matches: list
    # discoveries: new-topic columns appended as fresh topics, in append order
    discoveries: list
    plan: object = None


@dataclass
class TopicRegistry:
    ids: list = field(default_factory=list)
    alpha: np.ndarray = None
    birth_step: dict = field(default_factory=dict)
    history: dict = field(default_factory=dict)
    next_id: int = 0

    @property
    def K(self):
        return len(self.ids)

    def add(self, column, step):
        new_id = self.next_id
        self.next_id += 1
        self.ids.append(new_id)
        self.birth_step[new_id] = step
        col = np.asarray(column, dtype=float)[:, None]
        self.alpha = col.copy() if self.alpha is None else np.hstack([self.alpha, col])
        return new_id


@dataclass
class Schedule:
    tau: np.ndarray
    kind: str = "custom"
    seed: int = None

    @property
    def inactive(self):
        return self.tau.sum(axis=1) == 0

    def to_json(self):
        return {"kind": self.kind, "tau": self.tau.tolist(), "seed": self.seed}


@dataclass
class StreamState:
    rho: np.ndarray
    vocab: object
    config: StreamConfig = field(default_factory=StreamConfig)
    registry: TopicRegistry = field(default_factory=TopicRegistry)
    model: object = None
    t: int = 0
    per_step: list = field(default_factory=list)
    models: list = field(default_factory=list)
    plans: list = field(default_factory=list)

    def result(self):
        return {"registry": {"ids": list(self.registry.ids),
                             "birth_step": {str(k): v for k, v in self.registry.birth_step.items()}},
                "steps": self.per_step}


def merge_alphas(alpha_new, alpha_prev, plan, omega=0.5, mass_tol=1e-8, min_row_fraction=0.0):
    """Merge new-batch topic embeddings into the previous ones along a transport plan.

    Returns the merged L x K' matrix (previous columns first, in order, then
    appended discoveries) and a MergeReport. A matched column becomes
    ``omega * new + (1 - omega) * prev``; when several new topics pick the same
    previous one, the one sending it the most mass keeps it and the others are
    appended as new topics.
    """
    alpha_new = np.asarray(alpha_new, dtype=float)
    alpha_prev = np.asarray(alpha_prev, dtype=float)
    T = plan.T if isinstance(plan, TransportPlan) else np.asarray(plan, dtype=float)
    J, K = alpha_new.shape[1], alpha_prev.shape[1]
    if alpha_new.shape[0] != alpha_prev.shape[0] or T.shape != (J, K):
        raise DimensionError(f"plan is {T.shape}, topics are {J} new and {K} previous")

    assignment = assign_from_plan(plan, mass_tol, min_row_fraction)
    owner = {}
    for j, k in enumerate(assignment):
        if k is not NEW and (k not in owner or T[j, k] > T[owner[k], k]):
            owner[k] = j
    merged = alpha_prev.copy()
    matches, discoveries = [], []
    appended = []
    for j, k in enumerate(assignment):
        if k is not NEW and owner[k] == j:
            merged[:, k] = omega * alpha_new[:, j] + (1.0 - omega) * alpha_prev[:, k]
            matches.append((j, k))
        else:
            appended.append(alpha_new[:, j])
            discoveries.append(j)
    if appended:
        merged = np.hstack([merged, np.stack(appended, axis=1)])
    return merged, MergeReport(matches, discoveries, plan)


def _seed(*parts):
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def _resize_heads(model, keep, K_new, seed):
    """Encoder with K_new head rows: rows ``keep`` copied, the rest Xavier-initialized."""
    rng = np.random.default_rng(seed)
    model = model.copy()
    H = model.H
    Wmu = xavier_uniform(rng, K_new, H)
    Wsig = xavier_uniform(rng, K_new, H)
    bmu = np.zeros(K_new)
    bsig = np.zeros(K_new)
    n = len(keep)
    Wmu[:n], Wsig[:n] = model.Wmu[keep], model.Wsig[keep]
    bmu[:n], bsig[:n] = model.bmu[keep], model.bsig[keep]
    model.Wmu, model.Wsig, model.bmu, model.bsig = Wmu, Wsig, bmu, bsig
    return model


def _record(state, batch, merge_info):
    registry = state.registry
    theta = theta_mean(state.model, batch)
    props = theta.mean(axis=0)
    proportions = {tid: float(p) for tid, p in zip(registry.ids, props)}
    registry.history[state.t] = proportions
    beta = compute_beta(state.rho, registry.alpha)
    words = top_words(beta, state.vocab, state.config.top_n)
    entry = {
        "step": state.t,
        "proportions": {str(k): v for k, v in proportions.items()},
        "top_words": {str(tid): [w for w, _ in words[i]] for i, tid in enumerate(registry.ids)},
        "merge": merge_info,
    }
    state.per_step.append(entry)


def stream_step(state, batch, keep_models=False):
    """Consume one batch and advance the stream by one time step (in place; returns the state)."""
    cfg = state.config
    registry = state.registry
    t = state.t + 1
    V = state.rho.shape[1]
    L = state.rho.shape[0]
    train_free = replace(cfg.train, seed=_seed(cfg.seed, t, 0))
    train_frozen = replace(cfg.train, seed=_seed(cfg.seed, t, 1))

    if state.model is None:
        model = init_model(V, cfg.n_topics, L, cfg.hidden, state.rho, seed=_seed(cfg.seed, 0), hyper=cfg.train)
        model, _ = train(model, batch, train_free)
        for k in range(model.K):
            registry.add(model.alpha[:, k], t)
        state.model = model
        state.t = t
        merge_info = None
    else:
        model = state.model.copy()
        model.alpha = registry.alpha.copy()
        model, _ = train(model, batch, train_free)
        alpha_tilde = model.alpha
        mcfg = cfg.merge
        C = cost_matrix(alpha_tilde, registry.alpha, mcfg.metric)
        plan = uot_solve(C, cfg=mcfg.uot)
        merged, report = merge_alphas(alpha_tilde, registry.alpha, plan, mcfg.omega,
                                      mcfg.uot.mass_tol, mcfg.uot.min_row_fraction)
        K_prev = registry.K
        registry.alpha = merged[:, :K_prev].copy()
        new_ids = [registry.add(merged[:, K_prev + i], t) for i in range(len(report.discoveries))]
        merge_info = {
            "matches": [[j, registry.ids[k]] for j, k in report.matches],
            "discoveries": new_ids,
            "discovered_from": list(report.discoveries),
        }
        model = _resize_heads(model, list(range(K_prev)), registry.K, _seed(cfg.seed, t, 2))
        model.alpha = registry.alpha.copy()
        model, _ = train(model, batch, train_frozen, freeze_alpha=True)
        state.model = model
        state.t = t
        state.plans.append((C, plan))
    _record(state, batch, merge_info)
    if keep_models:
        state.models.append(state.model.copy())
    return state


def run_stream(batches, rho, vocab, config=None, keep_models=False, on_step=None):
    state = StreamState(np.asarray(rho, dtype=float), vocab, config or StreamConfig())
    for batch in batches:
        stream_step(state, batch, keep_models=keep_models)
        log.info("step %d: %d topics", state.t, state.registry.K)
        if on_step is not None:
            on_step(state)
    return state


def proportions_rows(per_step):
    for entry in per_step:
        for tid, p in entry["proportions"].items():
            yield entry["step"], int(tid), p


def write_proportions_csv(path, per_step):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "topic_id", "proportion"])
        for step, tid, p in proportions_rows(per_step):
            w.writerow([step, tid, repr(p)])


def read_proportions_csv(path):
    """Per-topic series from a ``step,topic_id,proportion`` CSV: (steps, {topic_id: array})."""
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append((int(rec["step"]), int(rec["topic_id"]), float(rec["proportion"])))
    steps = sorted({s for s, _, _ in rows})
    pos = {s: i for i, s in enumerate(steps)}
    series = {}
    for s, tid, p in rows:
        series.setdefault(tid, np.zeros(len(steps)))[pos[s]] = p
    return steps, dict(sorted(series.items()))


def generate_dynamic_schedule(K_true, T_steps, p=0.7, dir_alpha=2.0, seed=0):
    """Random activity schedule: Bernoulli(p) on/off per topic times a Dirichlet draw, renormalized."""
    if not 0 < p <= 1:
        raise InvalidConfig("p must be in (0, 1]; p = 0 never activates a topic")
    if dir_alpha <= 1:
        raise InvalidConfig("dir_alpha must be > 1")
    rng = np.random.default_rng(seed)
    tau = np.zeros((T_steps, K_true))
    for i in range(T_steps):
        z = rng.random(K_true) < p
        while not z.any():
            z = rng.random(K_true) < p
        w = rng.dirichlet(np.full(K_true, dir_alpha))
        row = z * w
        tau[i] = row / row.sum()
    return Schedule(tau, "dynamic", seed)


def validate_tau(tau, tol=1e-6):
    tau = np.array(tau, dtype=float)
    if tau.ndim != 2:
        raise ScheduleError(0, "schedule must be a matrix")
    for i, row in enumerate(tau):
        if np.any(row < 0) or not np.all(np.isfinite(row)):
            raise ScheduleError(i, "negative or non-finite entry")
        s = row.sum()
        if s == 0:
            continue
        if abs(s - 1.0) > tol:
            raise ScheduleError(i, f"row sums to {s}")
        tau[i] = row / s
    return tau


def load_custom_schedule(path):
    return load_schedule(path)


def load_schedule(path):
    """Schedule from JSON: a bare matrix, ``{"kind": "custom", "tau": ...}`` or a dynamic spec."""
    obj = json.loads(Path(path).read_text())
    if isinstance(obj, list):
        return Schedule(validate_tau(obj), "custom")
    kind = obj.get("kind", "custom")
    if kind == "custom":
        return Schedule(validate_tau(obj["tau"]), "custom", obj.get("seed"))
    if kind == "dynamic":
        return generate_dynamic_schedule(obj["K"], obj["T"], obj.get("p", 0.7),
                                         obj.get("alpha", 2.0), obj.get("seed", 0))
    raise ScheduleError(0, f"unknown schedule kind {kind!r}")


def sample_batch(pools, tau_row, n_docs=500, seed=0, labels=None, step_index=0):
    """Draw `n_docs` documents with replacement; each document's topic is categorical(tau_row).

    `pools` maps a label to its documents; `labels` fixes which label each
    entry of `tau_row` refers to (sorted pool keys by default).
    """
    labels = list(labels) if labels is not None else sorted(pools)
    tau_row = np.asarray(tau_row, dtype=float)
    if len(labels) != len(tau_row):
        raise DimensionError("tau_row length does not match the number of labels")
    for lab, w in zip(labels, tau_row):
        if w > 0 and not pools.get(lab):
            raise PoolError(lab)
    if tau_row.sum() <= 0:
        raise ScheduleError(step_index, "inactive step has no topic to sample")
    rng = np.random.default_rng(seed)
    topics = rng.choice(len(labels), size=n_docs, p=tau_row / tau_row.sum())
    docs = []
    for k in topics:
        pool = pools[labels[k]]
        docs.append(pool[rng.integers(len(pool))])
    return Batch(docs, step_index)
