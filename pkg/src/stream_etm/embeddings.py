"""Fixed word embeddings and the cosine distance shared with transport."""

import logging
from dataclasses import dataclass

import numpy as np

from .corpus import Vocabulary
from .errors import EmptyVocabulary, FormatError, ZeroVector

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Word embeddings, one column per vocabulary word (shape L x V)."""

    rho: np.ndarray

    def __post_init__(self):
        rho = np.array(self.rho, dtype=float)
        if rho.ndim != 2 or rho.shape[0] == 0:
            raise ValueError("rho must be a nonempty L x V matrix")
        if not np.all(np.isfinite(rho)):
            raise ValueError("rho has non-finite entries")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @property
    def L(self):
        return self.rho.shape[0]

    @property
    def V(self):
        return self.rho.shape[1]


def load_embeddings(path, vocab, max_rows=15000):
    """Read a word-vector text file and align it with `vocab`.

    Only the first `max_rows` lines are read. The returned vocabulary keeps
    the input order restricted to words that have an embedding.
    """
    vectors = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if lineno > max_rows:
                break
            parts = line.rstrip("\n").rstrip("\r").split(" ")
            if dim is None:
                dim = len(parts) - 1
                if dim < 1:
                    raise FormatError("no vector components", line=lineno)
            if len(parts) != dim + 1:
                raise FormatError(f"expected {dim + 1} fields, got {len(parts)}", line=lineno)
            try:
                vec = np.array([float(x) for x in parts[1:]])
            except ValueError as exc:
                raise FormatError(str(exc), line=lineno) from exc
            if not np.all(np.isfinite(vec)):
                raise FormatError("non-finite component", line=lineno)
            vectors.setdefault(parts[0], vec)

    kept = [tok for tok in vocab.tokens if tok in vectors]
    if not kept:
        raise EmptyVocabulary("no vocabulary word has an embedding")
    if len(kept) < vocab.V:
        log.info("dropped %d words without embeddings", vocab.V - len(kept))
    rho = np.stack([vectors[tok] for tok in kept], axis=1)
    return EmbeddingMatrix(rho), Vocabulary(kept)


def save_embeddings(path, emb, vocab):
    with open(path, "w", encoding="utf-8") as fh:
        for v, tok in enumerate(vocab.tokens):
            fh.write(tok + " " + " ".join(repr(float(x)) for x in emb.rho[:, v]) + "\n")


def cosine_distance(u, v):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ZeroVector("cosine distance of a zero-norm vector")
    return float(np.clip(1.0 - u @ v / (nu * nv), 0.0, 2.0))


def cosine_distance_matrix(A, B):
    """Pairwise cosine distances between the columns of A (L x J) and B (L x K)."""
    na = np.linalg.norm(A, axis=0)
    nb = np.linalg.norm(B, axis=0)
    if np.any(na == 0) or np.any(nb == 0):
        raise ZeroVector("cosine distance of a zero-norm column")
    return np.clip(1.0 - (A.T @ B) / np.outer(na, nb), 0.0, 2.0)
