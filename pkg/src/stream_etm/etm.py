"""Embedded Topic Model with a hand-written backward pass.

The encoder is a single ReLU hidden layer feeding two linear heads (mean and
log-variance of the Gaussian over the unnormalized topic proportions). The
decoder is fixed by the word embeddings ``rho`` (L x V) and the topic
embeddings ``alpha`` (L x K): ``beta[:, k] = softmax(rho.T @ alpha[:, k])``.

All batch computations work on a sparse document-term matrix; only the
nonzero entries of each document enter the reconstruction term.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, DivergenceError, InvalidConfig

LOG_EPS = 1e-10
ENCODER_PARAMS = ("W1", "b1", "Wmu", "bmu", "Wsig", "bsig")
ALL_PARAMS = ENCODER_PARAMS + ("alpha",)


@dataclass
class TrainConfig:
    epochs: int = 3000
    batch_size: int = 1000
    learning_rate: float = 0.01
    weight_decay: float = 0.006
    seed: int = 0
    mc_samples: int = 1

    def __post_init__(self):
        for name in ("epochs", "batch_size", "mc_samples"):
            if getattr(self, name) < 1:
                raise InvalidConfig(f"{name} must be positive")
        if self.learning_rate <= 0 or self.weight_decay < 0:
            raise InvalidConfig("learning_rate must be positive and weight_decay nonnegative")


@dataclass
class EtmModel:
    alpha: np.ndarray
    W1: np.ndarray
    b1: np.ndarray
    Wmu: np.ndarray
    bmu: np.ndarray
    Wsig: np.ndarray
    bsig: np.ndarray
    rho: np.ndarray = field(repr=False)
    hyper: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        L, V = self.rho.shape
        H = self.W1.shape[0]
        K = self.alpha.shape[1]
        expected = {
            "alpha": (L, K), "W1": (H, V), "b1": (H,), "Wmu": (K, H),
            "bmu": (K,), "Wsig": (K, H), "bsig": (K,),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise DimensionError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")

    @property
    def V(self):
        return self.rho.shape[1]

    @property
    def L(self):
        return self.rho.shape[0]

    @property
    def H(self):
        return self.W1.shape[0]

    @property
    def K(self):
        return self.alpha.shape[1]

    def params(self):
        return {name: getattr(self, name) for name in ALL_PARAMS}

    def copy(self):
        arrays = {name: getattr(self, name).copy() for name in ALL_PARAMS}
        return EtmModel(rho=self.rho, hyper=self.hyper, **arrays)

    def to_json(self, vocab_hash=None):
        return {
            "V": self.V, "K": self.K, "L": self.L, "H": self.H,
            "alpha": self.alpha.tolist(),
            "encoder": {name: getattr(self, name).tolist() for name in ENCODER_PARAMS},
            "vocab_hash": vocab_hash,
        }

    @classmethod
    def from_json(cls, obj, rho, hyper=None):
        rho = np.asarray(rho, dtype=float)
        if rho.shape != (obj["L"], obj["V"]):
            raise DimensionError("checkpoint does not match the embedding matrix")
        enc = {name: np.array(obj["encoder"][name], dtype=float) for name in ENCODER_PARAMS}
        return cls(alpha=np.array(obj["alpha"], dtype=float).reshape(obj["L"], obj["K"]),
                   rho=rho, hyper=hyper or TrainConfig(), **enc)


def vocab_hash(tokens):
    return hashlib.sha256(json.dumps(list(tokens), ensure_ascii=False).encode()).hexdigest()


def xavier_uniform(rng, fan_out, fan_in):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_out, fan_in))


def init_model(V, K, L, H, rho, seed=0, hyper=None):
    """Fresh model: Xavier-uniform weights, zero biases, deterministic in `seed`."""
    rho = np.asarray(rho, dtype=float)
    if min(V, K, L, H) < 1:
        raise DimensionError("dimensions must be positive")
    if rho.shape != (L, V):
        raise DimensionError(f"rho has shape {rho.shape}, expected {(L, V)}")
    rng = np.random.default_rng(seed)
    W1 = xavier_uniform(rng, H, V)
    Wmu = xavier_uniform(rng, K, H)
    Wsig = xavier_uniform(rng, K, H)
    # alpha is stored L x K; fan_in = L, fan_out = K
    alpha = xavier_uniform(rng, K, L).T.copy()
    return EtmModel(alpha=alpha, W1=W1, b1=np.zeros(H), Wmu=Wmu, bmu=np.zeros(K),
                    Wsig=Wsig, bsig=np.zeros(K), rho=rho, hyper=hyper or TrainConfig())


def compute_beta(rho, alpha):
    """Topic-word distributions, V x K, each column a softmax over the vocabulary."""
    logits = np.asarray(rho).T @ np.asarray(alpha)
    logits = logits - logits.max(axis=0, keepdims=True)
    e = np.exp(logits)
    return e / e.sum(axis=0, keepdims=True)


def softmax_rows(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def encode(model, x_norm):
    """Encoder pass for a normalized bag-of-words vector (or a D x V array of them)."""
    x = np.asarray(x_norm, dtype=float)
    h = np.maximum(x @ model.W1.T + model.b1, 0.0)
    return h @ model.Wmu.T + model.bmu, h @ model.Wsig.T + model.bsig


def _as_csr(batch, V):
    if sp.issparse(batch):
        X = batch.tocsr()
    elif hasattr(batch, "to_csr"):
        X = batch.to_csr(V)
    else:
        X = sp.csr_matrix(np.asarray(batch, dtype=float))
    if X.shape[1] != V:
        raise DimensionError(f"batch has {X.shape[1]} columns, model has V={V}")
    if X.shape[0] == 0:
        raise ValueError("batch must be nonempty")
    return X


def _normalize_rows(X):
    n = np.asarray(X.sum(axis=1)).ravel()
    if np.any(n <= 0):
        raise ValueError("every document needs at least one word")
    return sp.diags(1.0 / n) @ X


def _as_noise(noise, D, K):
    noise = np.asarray(noise, dtype=float)
    if noise.ndim == 2:
        noise = noise[None]
    if noise.ndim != 3 or noise.shape[1:] != (D, K):
        raise DimensionError(f"noise must have shape (S, {D}, {K}), got {noise.shape}")
    if noise.shape[0] == 0:
        raise ValueError("noise needs at least one Monte Carlo sample per document")
    return noise


def _encoder_forward(model, Xn):
    hpre = np.asarray(Xn @ model.W1.T) + model.b1
    h = np.maximum(hpre, 0.0)
    mu = h @ model.Wmu.T + model.bmu
    logvar = h @ model.Wsig.T + model.bsig
    return hpre, h, mu, logvar


def theta_mean(model, batch):
    """Topic proportions at the posterior mean (no sampling), D x K."""
    X = _as_csr(batch, model.V)
    _, _, mu, _ = _encoder_forward(model, _normalize_rows(X))
    return softmax_rows(mu)


def _forward_backward(model, X, noise, need_grads=True, freeze_alpha=False):
    """Per-document reconstruction and KL terms and, optionally, the gradient of -sum(recon - kl)."""
    D = X.shape[0]
    noise = _as_noise(noise, D, model.K)
    S = noise.shape[0]
    Xn = _normalize_rows(X)
    hpre, h, mu, logvar = _encoder_forward(model, Xn)
    std = np.exp(0.5 * logvar)
    beta = compute_beta(model.rho, model.alpha)

    coo = X.tocoo()
    rows, cols, counts = coo.row, coo.col, coo.data
    recon_d = np.zeros(D)
    Gbeta = np.zeros_like(beta)
    dmu = np.zeros_like(mu)
    dlogvar = np.zeros_like(logvar)
    for s in range(S):
        eps = noise[s]
        delta = mu + std * eps
        theta = softmax_rows(delta)
        p = np.einsum("nk,nk->n", theta[rows], beta[cols])
        recon_d += np.bincount(rows, weights=counts * np.log(p + LOG_EPS), minlength=D) / S
        if not need_grads:
            continue
        # d(-recon)/dp at the nonzero entries only
        g = sp.csr_matrix((-counts / (p + LOG_EPS) / S, (rows, cols)), shape=X.shape)
        dtheta = np.asarray(g @ beta)
        if not freeze_alpha:
            Gbeta += np.asarray(g.T @ theta)
        ddelta = theta * (dtheta - np.sum(theta * dtheta, axis=1, keepdims=True))
        dmu += ddelta
        dlogvar += ddelta * eps * std * 0.5

    kl_d = 0.5 * np.sum(mu ** 2 + np.exp(logvar) - logvar - 1.0, axis=1)
    if not need_grads:
        return recon_d, kl_d, None

    dmu += mu
    dlogvar += 0.5 * (np.exp(logvar) - 1.0)
    grads = {
        "Wmu": dmu.T @ h, "bmu": dmu.sum(axis=0),
        "Wsig": dlogvar.T @ h, "bsig": dlogvar.sum(axis=0),
    }
    dh = dmu @ model.Wmu + dlogvar @ model.Wsig
    dhpre = dh * (hpre > 0)
    grads["W1"] = np.asarray((Xn.T @ dhpre).T)
    grads["b1"] = dhpre.sum(axis=0)
    if freeze_alpha:
        grads["alpha"] = np.zeros_like(model.alpha)
    else:
        dlogits = beta * (Gbeta - np.sum(beta * Gbeta, axis=0, keepdims=True))
        grads["alpha"] = model.rho @ dlogits
    return recon_d, kl_d, grads


def elbo(model, batch, noise):
    """ELBO of a batch as (total, recon, kl), summed over documents.

    `noise` holds the standard-normal draws of the reparameterization, shape
    (D, K) or (S, D, K) for S Monte Carlo samples (averaged).
    """
    X = _as_csr(batch, model.V)
    recon_d, kl_d, _ = _forward_backward(model, X, noise, need_grads=False)
    recon = float(np.sum(recon_d))
    kl = float(np.sum(kl_d))
    return recon - kl, recon, kl


def gradients(model, batch, noise, freeze_alpha=False):
    """Gradient of the negative ELBO (summed over documents) for every parameter."""
    X = _as_csr(batch, model.V)
    _, _, grads = _forward_backward(model, X, noise, freeze_alpha=freeze_alpha)
    return grads


class Adam:
    """Adam with L2 weight decay added to the gradient."""

    def __init__(self, names, lr=0.01, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.0):
        self.names = tuple(names)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {}
        self.v = {}

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name in self.names:
            p = params[name]
            g = grads[name] + self.weight_decay * p
            if name not in self.m:
                self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def train(model, corpus, config=None, freeze_alpha=False):
    """Fit the model on one batch of documents.

    Each epoch visits the documents in a seeded random order, in minibatches
    of ``config.batch_size``. The optimized loss is the negative ELBO averaged
    over the documents of a minibatch. Returns the trained copy and the
    per-epoch mean negative ELBO per document.
    """
    config = config or model.hyper
    model = model.copy()
    model.hyper = config
    X = _as_csr(corpus, model.V)
    D = X.shape[0]
    rng = np.random.default_rng(config.seed)
    names = ENCODER_PARAMS if freeze_alpha else ALL_PARAMS
    opt = Adam(names, lr=config.learning_rate, weight_decay=config.weight_decay)
    params = model.params()
    trace = []
    for epoch in range(config.epochs):
        order = rng.permutation(D)
        epoch_loss = 0.0
        for start in range(0, D, config.batch_size):
            idx = np.sort(order[start:start + config.batch_size])
            Xb = X[idx]
            n = len(idx)
            noise = rng.standard_normal((config.mc_samples, n, model.K))
            recon_d, kl_d, grads = _forward_backward(model, Xb, noise, freeze_alpha=freeze_alpha)
            loss = float(np.sum(kl_d) - np.sum(recon_d))
            if not np.isfinite(loss):
                raise DivergenceError(epoch)
            epoch_loss += loss
            opt.step(params, {k: g / n for k, g in grads.items()})
        trace.append(epoch_loss / D)
    for name in ALL_PARAMS:
        if not np.all(np.isfinite(params[name])):
            raise DivergenceError(config.epochs - 1, f"non-finite {name}")
    return model, trace


def config_dict(config):
    return asdict(config)
