"""
Topic quality and recovering topic embeddings from word lists
=============================================================

Coherence is the average normalized PMI of top-word pairs over document
co-occurrence; diversity is the share of unique top words. The inverse
problem maps a word distribution back to a topic embedding via the
pseudoinverse of rho'.
"""

import numpy as np

from stream_etm.corpus import Batch, BowDocument, Vocabulary
from stream_etm.etm import compute_beta
from stream_etm.metrics import (build_pure_documents, harmonic_mean, pure_topic_embedding,
                                topic_coherence, topic_diversity)

docs = Batch([BowDocument(str(i), {w: 1 for w in ws})
              for i, ws in enumerate([{0, 1, 2}, {0, 1}, {0, 2}, {3}])])
tc, skipped = topic_coherence([[0, 1, 2], [1, 3]], docs)
td = topic_diversity([[0, 1, 2], [1, 3, 4]], n=3)
print(f"TC {tc:.3f} (skipped pairs {skipped}), TD {td:.2f}, H {harmonic_mean(max(tc, 0), td):.3f}")

###############################################################################
# Round trip: beta -> alpha -> beta

rng = np.random.default_rng(1)
rho = rng.normal(size=(8, 30))
alpha = rng.normal(size=(8, 1)) / np.sqrt(8)
beta = compute_beta(rho, alpha)[:, 0]
alpha_back = pure_topic_embedding(beta, rho)
print("max |beta - beta'|:", np.abs(compute_beta(rho, alpha_back[:, None])[:, 0] - beta).max())

###############################################################################
# Pure documents: a label plus its nearest neighbours in embedding space

vocab = Vocabulary(["space", "orbit"] + [f"w{i}" for i in range(28)])
pure = build_pure_documents(["space orbit"], rho, vocab, expand_n=3)[:, 0]
chosen = [vocab.tokens[v] for v in np.flatnonzero(pure > 1e-6)]
print("pure document words:", chosen)
print("its topic embedding:", np.round(pure_topic_embedding(pure, rho), 2))
