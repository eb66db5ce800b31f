"""Independent reference computations used by the tests.

None of these share code with the package beyond plain numpy/scipy.
"""

import itertools
import math

import numpy as np
from scipy.special import gammaln


# -- unbalanced transport --------------------------------------------------

def uot_F(T, C, a_row, a_col, lam_row, lam_col):
    def gkl(x, y):
        x = np.maximum(x, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(x > 0, x * np.log(x / y), 0.0)
        return t.sum() - x.sum() + y.sum()
    return float((C * T).sum() + lam_row * gkl(T.sum(1), a_row) + lam_col * gkl(T.sum(0), a_col))


def uot_projected_gradient(C, a_row, a_col, lam_row, lam_col, iters=2000, floor=1e-14):
    """Projected gradient descent with Armijo backtracking on T >= floor."""
    T = np.outer(a_row, a_col)
    f = uot_F(T, C, a_row, a_col, lam_row, lam_col)
    step = 1.0
    for _ in range(iters):
        g = (C + lam_row * np.log(T.sum(1) / a_row)[:, None]
             + lam_col * np.log(T.sum(0) / a_col)[None, :])
        while True:
            T_new = np.maximum(T - step * g, floor)
            f_new = uot_F(T_new, C, a_row, a_col, lam_row, lam_col)
            if f_new <= f - 1e-4 * np.sum(g * (T - T_new)) or step < 1e-16:
                break
            step *= 0.5
        if abs(f - f_new) < 1e-15:
            T, f = T_new, f_new
            break
        T, f = T_new, f_new
        step *= 2.0
    return T, f


# -- change points -----------------------------------------------------------

def nig_log_evidence(xs, mu0, kappa0, alpha0, beta0):
    """Closed-form log marginal likelihood of a segment under a Normal-Inverse-Gamma prior."""
    xs = np.asarray(xs, dtype=float)
    n = len(xs)
    if n == 0:
        return 0.0
    xbar = xs.mean()
    kappa_n = kappa0 + n
    alpha_n = alpha0 + n / 2
    beta_n = beta0 + 0.5 * np.sum((xs - xbar) ** 2) + kappa0 * n * (xbar - mu0) ** 2 / (2 * kappa_n)
    return (gammaln(alpha_n) - gammaln(alpha0) + alpha0 * math.log(beta0) - alpha_n * math.log(beta_n)
            + 0.5 * (math.log(kappa0) - math.log(kappa_n)) - 0.5 * n * math.log(2 * math.pi))


def run_length_posterior_bruteforce(xs, mu0, kappa0, alpha0, beta0, hazard):
    """P(r_t = r | x_1..t) by enumerating every segmentation of x_1..t.

    Position 1 always starts a segment; each later position starts one with
    probability `hazard`. Run length r_t is t minus the start of the last
    segment.
    """
    t = len(xs)
    weights = np.zeros(t)
    for starts in itertools.product([0, 1], repeat=t - 1):
        bounds = [0] + [i + 1 for i, s in enumerate(starts) if s] + [t]
        logp = sum(math.log(hazard) if s else math.log1p(-hazard) for s in starts)
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            logp += nig_log_evidence(xs[lo:hi], mu0, kappa0, alpha0, beta0)
        weights[t - 1 - bounds[-2]] += math.exp(logp)
    return weights / weights.sum()


# -- coherence ---------------------------------------------------------------

def npmi_by_hand(docs, wi, wj):
    D = len(docs)
    ni = sum(wi in d for d in docs)
    nj = sum(wj in d for d in docs)
    nij = sum(wi in d and wj in d for d in docs)
    if nij == 0:
        return -1.0
    if nij == D:
        return 1.0
    pij = nij / D
    return math.log(pij / ((ni / D) * (nj / D))) / -math.log(pij)


# -- least squares -----------------------------------------------------------

def min_norm_solution(A, b, eps=1e-6, iters=200):
    """Iterated Tikhonov regularization; converges to the minimum-norm least-squares solution."""
    A = np.asarray(A, dtype=float)
    n = A.shape[1]
    M = A.T @ A + eps * np.eye(n)
    Atb = A.T @ b
    x = np.zeros(n)
    for _ in range(iters):
        x = np.linalg.solve(M, Atb + eps * x)
    return x
