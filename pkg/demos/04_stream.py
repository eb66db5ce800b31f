"""
The online loop over a simulated stream
=======================================

Batches are sampled from labelled pools following a dynamic schedule in
which topics switch on and off. Each step trains on the new batch, merges
the topics through transport and retrains the encoder with the topics
frozen. The registry keeps stable topic ids across steps.
"""

import tempfile
from pathlib import Path

import numpy as np

from stream_etm.etm import TrainConfig
from stream_etm.stream import (StreamConfig, generate_dynamic_schedule, run_stream, sample_batch,
                               write_proportions_csv)
from stream_etm.toys import synthetic_corpus

vocab, rho, pools, _ = synthetic_corpus(n_topics=3, V=200, L=20, seed=0)
schedule = generate_dynamic_schedule(3, 8, p=0.7, dir_alpha=2.0, seed=0)
print("schedule (rows = steps, columns = true topics)")
print(np.round(schedule.tau, 2))

batches = [sample_batch(pools, row, 200, seed=i, step_index=i + 1) for i, row in enumerate(schedule.tau)]
cfg = StreamConfig(hidden=64, train=TrainConfig(epochs=300, batch_size=200))


def report(state):
    entry = state.per_step[-1]
    props = " ".join(f"{k}:{v:.2f}" for k, v in entry["proportions"].items())
    merge = entry["merge"] or {}
    print(f"step {state.t}: {props}  matches={merge.get('matches')} new={merge.get('discoveries')}")


state = run_stream(batches, rho, vocab, cfg, on_step=report)
print("registry ids:", state.registry.ids)
for tid, words in state.per_step[-1]["top_words"].items():
    print(f"topic {tid}:", " ".join(words))

with tempfile.TemporaryDirectory() as tmp:
    out = Path(tmp) / "proportions.csv"
    write_proportions_csv(out, state.per_step)
    print(out.read_text().splitlines()[:4])
