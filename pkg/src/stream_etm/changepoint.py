"""Online Bayesian change-point detection over topic-proportion series.

Each series is modelled as piecewise Gaussian with unknown mean and variance
under a Normal-Inverse-Gamma prior, and a constant hazard of a change at
every step. The run length r_t counts the observations of the current
segment preceding x_t, so r_t = 0 means x_t opened a new segment. The first
observation always opens one.
"""

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import InvalidConfig

LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class OcpdPrior:
    mu0: float = None  # None: use the first observation of the series
    kappa0: float = 1.0
    alpha0: float = 1.0
    beta0: float = 0.01
    hazard_lambda: float = 10.0

    def __post_init__(self):
        if self.kappa0 <= 0 or self.alpha0 <= 0 or self.beta0 <= 0:
            raise InvalidConfig("kappa0, alpha0 and beta0 must be positive")
        if self.hazard_lambda <= 1:
            raise InvalidConfig("hazard_lambda must exceed 1")

    @property
    def hazard(self):
        return 1.0 / self.hazard_lambda


@dataclass
class RunLengthState:
    """Posterior over run lengths 0..t-1 with per-run (count, mean, M2) statistics."""

    log_probs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    count: np.ndarray = field(default_factory=lambda: np.zeros(0))
    mean: np.ndarray = field(default_factory=lambda: np.zeros(0))
    m2: np.ndarray = field(default_factory=lambda: np.zeros(0))
    t: int = 0
    mu0: float = None

    @property
    def probs(self):
        return np.exp(self.log_probs)


@dataclass(frozen=True)
class ChangepointAlert:
    step: int
    topic_id: int
    probability: float

    def to_json(self):
        return {"step": self.step, "topic_id": self.topic_id, "probability": self.probability}


def _posterior_params(count, mean, m2, prior, mu0):
    kappa = prior.kappa0 + count
    mu = (prior.kappa0 * mu0 + count * mean) / kappa
    alpha = prior.alpha0 + 0.5 * count
    beta = prior.beta0 + 0.5 * m2 + prior.kappa0 * count * (mean - mu0) ** 2 / (2.0 * kappa)
    return kappa, mu, alpha, beta


def student_t_logpdf(x, count, mean, m2, prior, mu0):
    """Log predictive density of x given a run's sufficient statistics."""
    kappa, mu, alpha, beta = _posterior_params(count, mean, m2, prior, mu0)
    nu = 2.0 * alpha
    scale2 = beta * (kappa + 1.0) / (alpha * kappa)
    z = (x - mu) ** 2 / (nu * scale2)
    return (gammaln(0.5 * (nu + 1.0)) - gammaln(0.5 * nu)
            - 0.5 * np.log(nu * np.pi * scale2) - 0.5 * (nu + 1.0) * np.log1p(z))


def ocpd_update(state, x, prior=None, max_run=None):
    """Absorb one observation; returns the new state and P(change at this step)."""
    prior = prior or OcpdPrior()
    x = float(x)
    if not np.isfinite(x):
        raise ValueError("observation must be finite")
    mu0 = state.mu0
    if mu0 is None:
        mu0 = prior.mu0 if prior.mu0 is not None else x
    fresh = (np.zeros(1), np.zeros(1), np.zeros(1))
    if state.t == 0:
        log_probs = np.zeros(1)
        count, mean, m2 = fresh
    else:
        log_h = np.log(prior.hazard)
        log_1mh = np.log1p(-prior.hazard)
        log_pred = student_t_logpdf(x, state.count, state.mean, state.m2, prior, mu0)
        growth = state.log_probs + log_pred + log_1mh
        change = log_h + float(student_t_logpdf(x, 0.0, 0.0, 0.0, prior, mu0))
        log_probs = np.concatenate([[change], growth])
        log_probs -= logsumexp(log_probs)
        count = np.concatenate([fresh[0], state.count])
        mean = np.concatenate([fresh[1], state.mean])
        m2 = np.concatenate([fresh[2], state.m2])
    # fold x into every run's statistics (Welford)
    new_count = count + 1.0
    delta = x - mean
    new_mean = mean + delta / new_count
    new_m2 = m2 + delta * (x - new_mean)
    if max_run is not None and len(log_probs) > max_run:
        log_probs = log_probs[:max_run] - logsumexp(log_probs[:max_run])
        new_count, new_mean, new_m2 = new_count[:max_run], new_mean[:max_run], new_m2[:max_run]
    new_state = RunLengthState(log_probs, new_count, new_mean, new_m2, state.t + 1, mu0)
    return new_state, float(np.exp(log_probs[0]))


def changepoint_probabilities(series, prior=None, max_run=None):
    state = RunLengthState()
    out = []
    for x in series:
        state, p = ocpd_update(state, x, prior, max_run)
        out.append(p)
    return np.array(out)


def detect(series, prior=None, threshold=0.5, steps=None, max_run=None):
    """Alerts for every topic series whose change probability exceeds `threshold`.

    `series` maps topic id to a sequence of proportions (a list is keyed by
    position). `steps` names the time step of each position (1-based by
    default).
    """
    if not isinstance(series, dict):
        series = dict(enumerate(series))
    alerts = []
    for tid, values in series.items():
        values = np.asarray(values, dtype=float)
        if len(values) < 2:
            raise ValueError("series must have at least two observations")
        labels = steps if steps is not None else range(1, len(values) + 1)
        probs = changepoint_probabilities(values, prior, max_run)
        for step, p in zip(labels, probs):
            if p > threshold:
                alerts.append(ChangepointAlert(int(step), tid, float(p)))
    alerts.sort(key=lambda a: (a.step, a.topic_id))
    return alerts


def series_from_history(history, ids=None):
    """Per-topic series from {step: {id: proportion}}; topics not yet born contribute 0."""
    steps = sorted(history)
    ids = ids if ids is not None else sorted({i for s in steps for i in history[s]})
    return steps, {i: np.array([history[s].get(i, 0.0) for s in steps]) for i in ids}


def roc_counts(truth_steps, alert_steps, all_steps):
    truth = set(truth_steps)
    alerted = set(alert_steps)
    tp = sum(any(abs(t - a) <= 1 for a in alerted) for t in truth)
    fn = len(truth) - tp
    fp = sum(not any(abs(a - t) <= 1 for t in truth) for a in alerted)
    tn = len(set(all_steps) - alerted - {s for s in all_steps if any(abs(s - t) <= 1 for t in truth)})
    return tp, fn, fp, tn


def evaluate_roc(truth_steps, detect_fn, grid, all_steps):
    """ROC points, one per threshold in ascending order.

    `detect_fn(threshold)` returns alerts (or bare steps). A true change
    counts as found when any topic alerts within one step of it; alerts are
    deduplicated per step, and an alert is a false positive when no true
    change lies within one step. Negatives are the steps not within one step
    of a true change.
    """
    grid = sorted(float(g) for g in grid)
    if not grid or grid[0] < 0 or grid[-1] > 1:
        raise ValueError("grid must be nonempty and within [0, 1]")
    points = []
    for thr in grid:
        alerts = detect_fn(thr)
        steps = {getattr(a, "step", a) for a in alerts}
        tp, fn, fp, tn = roc_counts(truth_steps, steps, all_steps)
        tpr = tp / (tp + fn) if tp + fn else 0.0
        fpr = fp / (fp + tn) if fp + tn else 0.0
        points.append({"threshold": thr, "fpr": fpr, "tpr": tpr, "tp": tp, "fn": fn, "fp": fp, "tn": tn})
    return points


def truth_steps_from_schedule(tau, threshold=0.0):
    """Steps (1-based) where any topic switches between active and inactive."""
    active = np.asarray(tau) > threshold
    return [i + 1 for i in range(1, len(active)) if np.any(active[i] != active[i - 1])]


def write_alerts(path, alerts, prior=None):
    meta = {"statistic": "posterior mass at run length 0"}
    if prior is not None:
        meta["prior"] = {k: getattr(prior, k) for k in ("mu0", "kappa0", "alpha0", "beta0", "hazard_lambda")}
    with open(path, "w") as fh:
        json.dump({"meta": meta, "alerts": [a.to_json() for a in alerts]}, fh, indent=1)


def write_roc_csv(path, points):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["threshold", "fpr", "tpr"])
        for p in points:
            w.writerow([repr(p["threshold"]), repr(p["fpr"]), repr(p["tpr"])])
