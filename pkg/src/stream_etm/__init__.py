"""Online topic modeling on document streams.

Embedded topic models are trained per batch, merged across time steps with
unbalanced optimal transport, and monitored with online Bayesian change-point
detection.
"""

from .changepoint import OcpdPrior, detect, evaluate_roc, ocpd_update
from .corpus import Batch, BowDocument, Vocabulary, build_vocabulary, tokenize, vectorize
from .embeddings import EmbeddingMatrix, cosine_distance, load_embeddings
from .etm import EtmModel, TrainConfig, compute_beta, elbo, gradients, init_model, train
from .metrics import (harmonic_mean, merge_discovery_accuracy, pure_topic_embedding,
                      topic_coherence, topic_diversity, top_words)
from .stream import MergeConfig, StreamConfig, merge_alphas, run_stream, stream_step
from .transport import UotConfig, assign_from_plan, cost_matrix, match_by_distance, uot_solve

__version__ = "0.1.0"
