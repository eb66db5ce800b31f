"""
Training an embedded topic model on one batch
=============================================

Topics are embeddings alpha in the word-embedding space; each topic's word
distribution is softmax(rho' alpha). We draw a synthetic corpus from three
known topics, fit the model and compare the learned topics with the truth.
"""

import numpy as np

from stream_etm.corpus import Batch
from stream_etm.etm import TrainConfig, compute_beta, elbo, init_model, theta_mean, train
from stream_etm.metrics import top_words, topic_diversity
from stream_etm.toys import synthetic_corpus

vocab, rho, pools, true_beta = synthetic_corpus(n_topics=3, V=200, L=20, docs_per_topic=100, seed=0)
docs = [d for pool in pools.values() for d in pool]
batch = Batch(docs)

model = init_model(vocab.V, 3, rho.shape[0], 64, rho, seed=0)
model, trace = train(model, batch, TrainConfig(epochs=300, batch_size=300, seed=0))
print(f"per-document negative ELBO: {trace[0]:.1f} -> {trace[-1]:.1f}")

# the deterministic ELBO (zero noise) on the whole batch
total, recon, kl = elbo(model, batch, np.zeros((len(batch), model.K)))
print(f"ELBO {total:.1f} = recon {recon:.1f} - KL {kl:.1f}")

beta = compute_beta(rho, model.alpha)
for k, words in enumerate(top_words(beta, vocab, 5)):
    print(f"topic {k}:", " ".join(w for w, _ in words))
print("topic diversity (top 10):", topic_diversity(top_words(beta, vocab, 10)))

# each learned topic should sit close to one of the true ones
kl_to_truth = np.array([[np.sum(t * np.log(t / b)) for b in beta.T] for t in true_beta.T])
print("KL(true || learned), best match per true topic:", np.round(kl_to_truth.min(axis=1), 3))

# documents of topic0 should load mostly on a single learned topic
theta = theta_mean(model, Batch(pools["topic0"][:50]))
print("mean proportions on topic0 documents:", np.round(theta.mean(axis=0), 2))
