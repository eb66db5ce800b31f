"""Unbalanced optimal transport between topic embeddings, and distance baselines.

The transport problem is

    min_{T >= 0}  <C, T> + lam_row * GKL(T 1 | a_row) + lam_col * GKL(T' 1 | a_col)

with GKL(x | y) = sum x log(x / y) - x + y. It is solved by multiplicative
majorization-minimization updates, which keep every iterate nonnegative and
never increase the objective.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .embeddings import cosine_distance_matrix
from .errors import DimensionError, InvalidConfig, NumericalError

NEW = None  # assignment marker for a topic that matches nothing


@dataclass
class UotConfig:
    lambda_a: float = 0.09
    lambda_atilde: float = 0.09
    max_iter: int = 1000
    tol: float = 1e-6
    mass_tol: float = 1e-8
    # a row is "new" when its transported mass is below this fraction of its
    # source mass; 0 disables the relative rule (absolute mass_tol only)
    min_row_fraction: float = 0.0

    def __post_init__(self):
        if self.lambda_a <= 0 or self.lambda_atilde <= 0:
            raise InvalidConfig("marginal penalties must be positive")
        if self.max_iter < 1 or self.tol <= 0 or self.mass_tol < 0:
            raise InvalidConfig("max_iter and tol must be positive, mass_tol nonnegative")
        if not 0 <= self.min_row_fraction < 1:
            raise InvalidConfig("min_row_fraction must be in [0, 1)")


@dataclass
class CostMatrix:
    C: np.ndarray
    metric: str = "cosine"

    def __post_init__(self):
        self.C = np.asarray(self.C, dtype=float)
        if self.C.ndim != 2:
            raise DimensionError("cost matrix must be 2-D")
        if not np.all(np.isfinite(self.C)) or np.any(self.C < 0):
            raise NumericalError("cost entries must be finite and nonnegative")

    @property
    def shape(self):
        return self.C.shape


@dataclass
class TransportPlan:
    T: np.ndarray
    objective: float
    iterations: int
    converged: bool
    a_tilde: np.ndarray = None
    history: list = field(default_factory=list, repr=False)

    def to_json(self, C=None):
        out = {"T": self.T.tolist(), "objective": self.objective,
               "iterations": self.iterations, "converged": self.converged}
        if C is not None:
            out = {"C": np.asarray(getattr(C, "C", C)).tolist(), **out}
        return out

    def dump(self, path, C=None):
        with open(path, "w") as fh:
            json.dump(self.to_json(C), fh)


def _parse_metric(metric):
    if isinstance(metric, tuple):
        name, p = metric
    elif isinstance(metric, str) and metric.startswith("minkowski"):
        name, _, p = metric.partition(":")
        p = float(p) if p else 2.0
    else:
        name, p = metric, None
    if name == "euclidean":
        name, p = "minkowski", 2.0
    if name not in ("cosine", "minkowski"):
        raise InvalidConfig(f"unknown metric {metric!r}")
    if name == "minkowski" and p < 1:
        raise InvalidConfig("minkowski requires p >= 1")
    return name, p


def cost_matrix(alpha_new, alpha_prev, metric="cosine"):
    """Pairwise costs between new topics (columns of an L x J matrix) and previous ones (L x K).

    `metric` is "cosine", "euclidean", "minkowski:<p>" or ("minkowski", p).
    """
    alpha_new = np.asarray(alpha_new, dtype=float)
    alpha_prev = np.asarray(alpha_prev, dtype=float)
    if alpha_new.ndim != 2 or alpha_prev.ndim != 2 or alpha_new.shape[0] != alpha_prev.shape[0]:
        raise DimensionError("topic embeddings must share the embedding dimension")
    name, p = _parse_metric(metric)
    if name == "cosine":
        return CostMatrix(cosine_distance_matrix(alpha_new, alpha_prev), "cosine")
    diff = np.abs(alpha_new.T[:, None, :] - alpha_prev.T[None, :, :])
    C = np.sum(diff ** p, axis=2) ** (1.0 / p)
    label = "euclidean" if p == 2.0 else f"minkowski:{p:g}"
    return CostMatrix(C, label)


def gkl(x, y):
    """Generalized KL divergence between nonnegative vectors (0 log 0 = 0)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    pos = x > 0
    return float(np.sum(x[pos] * np.log(x[pos] / y[pos])) - x.sum() + y.sum())


def uot_objective(T, C, a_tilde, a, lambda_atilde, lambda_a):
    return float(np.sum(C * T) + lambda_atilde * gkl(T.sum(axis=1), a_tilde)
                 + lambda_a * gkl(T.sum(axis=0), a))


def uot_solve(C, a_tilde=None, a=None, cfg=None):
    """Solve the KL-relaxed unbalanced transport problem between J sources and K targets.

    Masses default to uniform (1/J, 1/K). Row sums are compared with
    `a_tilde` and column sums with `a`. Entries below ``cfg.mass_tol`` are set
    to exactly zero in the returned plan.
    """
    cfg = cfg or UotConfig()
    C = np.asarray(getattr(C, "C", C), dtype=float)
    if C.ndim != 2 or 0 in C.shape:
        raise DimensionError(f"cost matrix must be J x K with J, K > 0, got {C.shape}")
    J, K = C.shape
    a_tilde = np.full(J, 1.0 / J) if a_tilde is None else np.asarray(a_tilde, dtype=float)
    a = np.full(K, 1.0 / K) if a is None else np.asarray(a, dtype=float)
    if a_tilde.shape != (J,) or a.shape != (K,):
        raise DimensionError("mass vectors do not match the cost matrix")
    if np.any(a_tilde <= 0) or np.any(a <= 0):
        raise InvalidConfig("masses must be positive")

    lam_r, lam_c = cfg.lambda_atilde, cfg.lambda_a
    lam = lam_r + lam_c
    w_r, w_c = lam_r / lam, lam_c / lam
    # the majorizer's minimizer is T * G / (rowsum^w_r * colsum^w_c)
    G = np.exp(-C / lam) * (a_tilde[:, None] ** w_r) * (a[None, :] ** w_c)
    T = np.outer(a_tilde, a)
    obj = uot_objective(T, C, a_tilde, a, lam_r, lam_c)
    history = [obj]
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        r = T.sum(axis=1, keepdims=True)
        c = T.sum(axis=0, keepdims=True)
        denom = r ** w_r * c ** w_c
        with np.errstate(divide="ignore", invalid="ignore"):
            T = np.where(T > 0, T * G / denom, 0.0)
        new_obj = uot_objective(T, C, a_tilde, a, lam_r, lam_c)
        if not np.isfinite(new_obj):
            raise NumericalError(f"non-finite transport objective at iteration {it}")
        history.append(new_obj)
        done = abs(obj - new_obj) <= cfg.tol * max(abs(obj), 1e-12)
        obj = new_obj
        if done:
            converged = True
            break
    T = np.where(T < cfg.mass_tol, 0.0, T)
    obj = uot_objective(T, C, a_tilde, a, lam_r, lam_c)
    return TransportPlan(T, obj, it, converged, a_tilde, history)


def _argmin_ties_low(row):
    return int(np.flatnonzero(row == row.min())[0])


def match_by_distance(C, threshold=0.5):
    """Baseline matcher: nearest previous topic if closer than `threshold`, else NEW."""
    if threshold <= 0:
        raise InvalidConfig("threshold must be positive")
    C = np.asarray(getattr(C, "C", C), dtype=float)
    out = []
    for row in C:
        k = _argmin_ties_low(row)
        out.append(k if row[k] < threshold else NEW)
    return out


def assign_from_plan(plan, mass_tol=1e-8, min_row_fraction=0.0):
    """Map each source row to the target receiving most of its mass, or NEW.

    A row is NEW when its total mass is at most `mass_tol`, or, with
    `min_row_fraction` > 0, below that fraction of the row's source mass.
    """
    if isinstance(plan, TransportPlan):
        T, a_tilde = plan.T, plan.a_tilde
    else:
        T, a_tilde = np.asarray(plan, dtype=float), None
    if not np.all(np.isfinite(T)):
        raise NumericalError("transport plan has non-finite entries")
    if a_tilde is None:
        a_tilde = np.full(T.shape[0], 1.0 / T.shape[0])
    out = []
    for j, row in enumerate(T):
        mass = row.sum()
        if mass <= mass_tol or mass < min_row_fraction * a_tilde[j]:
            out.append(NEW)
        else:
            out.append(int(np.flatnonzero(row == row.max())[0]))
    return out
