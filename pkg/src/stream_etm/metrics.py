"""Topic quality and merge evaluation metrics, plus pure-document topic embeddings."""

import logging
import math
from itertools import combinations

import numpy as np

from .errors import DegenerateEmbedding, LabelError

log = logging.getLogger(__name__)

UNDEFINED = float("nan")


def top_words(beta, vocab, n=10):
    """Per topic (column of a V x K matrix), the n most probable (word, probability) pairs.

    Ties go to the smaller word id; `n` is clamped to V.
    """
    beta = np.asarray(beta, dtype=float)
    V, K = beta.shape
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > V:
        log.warning("top_words: n=%d exceeds vocabulary size %d, clamping", n, V)
        n = V
    tokens = vocab.tokens if hasattr(vocab, "tokens") else vocab
    out = []
    for k in range(K):
        # stable sort on -beta keeps smaller ids first among ties
        order = np.argsort(-beta[:, k], kind="stable")[:n]
        out.append([(tokens[v], float(beta[v, k])) for v in order])
    return out


def top_word_ids(beta, n=10):
    beta = np.asarray(beta, dtype=float)
    n = min(n, beta.shape[0])
    return [list(np.argsort(-beta[:, k], kind="stable")[:n]) for k in range(beta.shape[1])]


def topic_diversity(lists, n=10):
    """Fraction of unique words among the top-n words of all topics."""
    if not lists:
        raise ValueError("no topics")
    tops = [[w[0] if isinstance(w, tuple) else w for w in lst[:n]] for lst in lists]
    n_eff = min(n, min(len(t) for t in tops))
    unique = set()
    for t in tops:
        unique.update(t[:n_eff])
    return len(unique) / (n_eff * len(tops))


def _presence(corpus):
    """Binary document-word presence as a dict word_id -> set of document indices."""
    docs = corpus.docs if hasattr(corpus, "docs") else corpus
    index = {}
    for d, doc in enumerate(docs):
        keys = doc.counts.keys() if hasattr(doc, "counts") else doc
        for w in set(keys):
            index.setdefault(w, set()).add(d)
    return index, len(docs)


def npmi(n_i, n_j, n_ij, D):
    """Normalized PMI from document counts; -1 without co-occurrence, +1 when P(i, j) = 1."""
    if n_ij == 0:
        return -1.0
    if n_ij == D:
        return 1.0
    p_ij = n_ij / D
    return (math.log(p_ij) - math.log(n_i / D) - math.log(n_j / D)) / -math.log(p_ij)


def topic_coherence(lists, corpus, n=10, vocab=None):
    """Mean NPMI over pairs of each topic's top-n words, averaged over topics.

    `lists` holds word ids per topic, or (word, prob) pairs when `vocab` is
    given to map words back to ids. Pairs involving a word absent from the
    corpus are skipped. Returns (tc, skipped_pairs); tc is NaN if every pair
    was skipped.
    """
    if len(getattr(corpus, "docs", corpus)) == 0:
        raise ValueError("corpus must be nonempty")
    presence, D = _presence(corpus)
    index = vocab.index if vocab is not None else None
    per_topic = []
    skipped = 0
    for lst in lists:
        ids = []
        for w in lst[:n]:
            w = w[0] if isinstance(w, tuple) else w
            ids.append(index[w] if index is not None else int(w))
        scores = []
        for wi, wj in combinations(ids, 2):
            si, sj = presence.get(wi), presence.get(wj)
            if not si or not sj:
                skipped += 1
                continue
            scores.append(npmi(len(si), len(sj), len(si & sj), D))
        if scores:
            per_topic.append(sum(scores) / len(scores))
    if not per_topic:
        return UNDEFINED, skipped
    return sum(per_topic) / len(per_topic), skipped


def harmonic_mean(x, y):
    if x < 0 or y < 0:
        raise ValueError("harmonic_mean expects nonnegative values")
    if x == 0 or y == 0:
        return 0.0
    return 2.0 * x * y / (x + y)


def merge_discovery_accuracy(assignment, common, novel):
    """Merging and discovery accuracy of a per-row assignment.

    `assignment` maps each new-topic index to a previous index or None (new);
    it may also be a MergeReport. `common` maps truly shared new-topic indices
    to their correct previous index, `novel` lists truly new indices.
    """
    if hasattr(assignment, "matches"):
        mapping = {j: None for j in assignment.discoveries}
        mapping.update({j: k for j, k in assignment.matches})
    else:
        mapping = dict(enumerate(assignment))
    common = dict(common)
    novel = set(novel)
    if set(common) & novel:
        raise ValueError("common and novel indices overlap")
    ma = sum(mapping.get(j) == k for j, k in common.items()) / len(common) if common else 1.0
    da = sum(mapping.get(j, 0) is None for j in novel) / len(novel) if novel else 1.0
    return ma, da


def pinv(A, rcond=1e-10):
    """Moore-Penrose pseudoinverse via SVD; singular values below rcond * s_max count as zero."""
    U, s, Vt = np.linalg.svd(np.asarray(A, dtype=float), full_matrices=False)
    if s.size == 0 or s[0] == 0:
        raise DegenerateEmbedding("matrix has rank 0")
    keep = s > rcond * s[0]
    return (Vt[keep].T / s[keep]) @ U[:, keep].T


def pure_topic_embedding(beta_pure, rho):
    """Topic embedding whose softmax decoding best reproduces `beta_pure` (least squares in log space)."""
    beta_pure = np.clip(np.asarray(beta_pure, dtype=float), 1e-12, None)
    rho_t = np.asarray(rho, dtype=float).T
    P = pinv(rho_t)
    target = np.log(beta_pure)
    # softmax ignores constant shifts of the logits, so drop the shift that the
    # span of rho' cannot represent; with the ones vector in the span c stays 0
    ones = np.ones(len(target))
    off = ones - rho_t @ (P @ ones)
    denom = off @ off
    if denom > 1e-12 * len(target):
        target = target - (off @ target) / denom
    return P @ target


def build_pure_documents(labels, rho, vocab, expand_n=20):
    """Word distributions for label-derived 'pure documents'.

    Each label phrase is tokenized on whitespace; its in-vocabulary words are
    extended with the `expand_n` vocabulary words closest (cosine) to their
    embedding centroid. The distribution is uniform on that set and 1e-12
    elsewhere, renormalized. Returns a V x len(labels) matrix.
    """
    rho = np.asarray(rho, dtype=float)
    V = rho.shape[1]
    norms = np.linalg.norm(rho, axis=0)
    norms[norms == 0] = 1.0
    unit = rho / norms
    out = np.empty((V, len(labels)))
    for i, phrase in enumerate(labels):
        words = phrase.split() if isinstance(phrase, str) else list(phrase)
        seeds = sorted({vocab.index[w] for w in words if w in vocab.index})
        if not seeds:
            raise LabelError(f"label {phrase!r} has no in-vocabulary word")
        chosen = set(seeds)
        if expand_n > 0:
            centroid = rho[:, seeds].mean(axis=1)
            sims = unit.T @ (centroid / max(np.linalg.norm(centroid), 1e-300))
            sims[seeds] = -np.inf
            order = np.argsort(-sims, kind="stable")
            chosen.update(int(v) for v in order[:expand_n] if np.isfinite(sims[v]))
        b = np.full(V, 1e-12)
        b[sorted(chosen)] = 1.0 / len(chosen)
        out[:, i] = b / b.sum()
    return out
