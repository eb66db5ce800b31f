"""
From raw text to bag-of-words and aligned word embeddings
=========================================================

Tokenize a handful of documents, build a filtered vocabulary, vectorize,
then restrict the vocabulary to words that have an embedding.
"""

import tempfile
from pathlib import Path

import numpy as np

from stream_etm.corpus import build_vocabulary, load_stopwords, tokenize, vectorize_all
from stream_etm.embeddings import cosine_distance, load_embeddings

texts = [
    "The rocket reached orbit; the crew saw the Moon.",
    "A rocket launch was delayed, orbit insertion failed.",
    "The team won the match after the coach changed tactics.",
    "Our team lost the match, the coach resigned.",
    "Bake the bread, then melt cheese over the bread.",
    "Cheese and bread: the simplest dinner.",
]

# lowercase, punctuation removed, alphabetic tokens of length >= 2
tokens = [tokenize(t) for t in texts]
print(tokens[0])

# stopwords and words seen once are dropped; max_df drops words in > 70% of docs
vocab = build_vocabulary(tokens, load_stopwords(), min_count=2, max_df_ratio=0.7)
print("vocabulary:", vocab.tokens)

batch, dropped = vectorize_all([(str(i), t, None) for i, t in enumerate(tokens)], vocab)
print(f"{len(batch)} documents kept, {dropped} dropped")
print("document 0 counts:", batch.docs[0].counts)

# a tiny word-vector file in the usual "word x1 x2 ..." text format
rng = np.random.default_rng(0)
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "vectors.txt"
    with open(path, "w") as fh:
        for word in vocab.tokens[:-1]:  # leave one word without a vector
            fh.write(word + " " + " ".join(f"{x:.4f}" for x in rng.normal(size=4)) + "\n")
    emb, sub_vocab = load_embeddings(path, vocab)

print(f"rho is {emb.rho.shape[0]} x {emb.rho.shape[1]}; kept words: {sub_vocab.tokens}")
print("cosine distance between the first two words:",
      round(cosine_distance(emb.rho[:, 0], emb.rho[:, 1]), 3))
