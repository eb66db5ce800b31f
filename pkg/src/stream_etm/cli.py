"""Command-line entry point: ``stream-etm <command>``.

Exit codes: 0 success, 2 usage or IO error, 3 numerical failure, 4 bad data.
"""

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import changepoint, corpus, embeddings, metrics, stream, toys
from .errors import StreamEtmError
from .etm import TrainConfig, compute_beta, vocab_hash
from .transport import UotConfig

log = logging.getLogger("stream_etm")


class UsageError(StreamEtmError):
    exit_code = 2


def _path(p, kind="path"):
    if p is None or not Path(p).exists():
        raise UsageError(f"{kind} does not exist: {p}")
    return Path(p)


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=1, ensure_ascii=False) + "\n")


def _manifest(args, extra=None):
    out = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k != "func"}
    out.update(extra or {})
    return out


# -- preprocess --------------------------------------------------------------

def cmd_preprocess(args):
    raw = corpus.read_corpus(_path(args.corpus, "corpus"))
    stop = corpus.load_stopwords(_path(args.stopwords, "stopwords") if args.stopwords else None)
    tokenized = [(doc_id, corpus.tokenize(text), label) for doc_id, text, label in raw]
    vocab = corpus.build_vocabulary([t for _, t, _ in tokenized], stop, args.min_count,
                                    args.max_df, args.vocab_cap)
    n_filtered = vocab.V
    if args.embeddings:
        _, vocab = embeddings.load_embeddings(_path(args.embeddings, "embeddings"), vocab, args.max_rows)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    vocab.save(out / "vocab.json")
    batch, dropped = corpus.vectorize_all(tokenized, vocab)
    batch.save_jsonl(out / "docs.jsonl")
    _write_json(out / "manifest.json", _manifest(args, {"vocab_size": vocab.V, "documents": len(batch),
                                                        "dropped_documents": dropped}))
    print(f"documents={len(raw)} kept={len(batch)} dropped={dropped} "
          f"vocab={vocab.V} words_without_embedding={n_filtered - vocab.V}")


# -- simulate ----------------------------------------------------------------

def cmd_simulate(args):
    pool_batch = corpus.Batch.load_jsonl(_path(args.docs, "docs"))
    pools = {}
    for doc in pool_batch.docs:
        if doc.label is not None:
            pools.setdefault(doc.label, []).append(doc)
    labels = args.labels.split(",") if args.labels else sorted(pools)
    if args.schedule:
        schedule = stream.load_schedule(_path(args.schedule, "schedule"))
    else:
        schedule = stream.generate_dynamic_schedule(len(labels), args.steps, args.p, args.dir_alpha, args.seed)
    if schedule.tau.shape[1] != len(labels):
        raise UsageError(f"schedule has {schedule.tau.shape[1]} topics but {len(labels)} labels")
    out = Path(args.out)
    (out / "batches").mkdir(parents=True, exist_ok=True)
    written = 0
    for i, row in enumerate(schedule.tau):
        if row.sum() == 0:
            log.info("step %d inactive, skipped", i + 1)
            continue
        written += 1
        b = stream.sample_batch(pools, row, args.n_docs, seed=stream._seed(args.seed, i), labels=labels,
                                step_index=written)
        b.save_jsonl(out / "batches" / f"step_{written:03d}.jsonl")
    _write_json(out / "schedule.json", {**schedule.to_json(), "labels": labels})
    truth = changepoint.truth_steps_from_schedule(schedule.tau[~schedule.inactive])
    _write_json(out / "truth.json", {"change_steps": truth})
    _write_json(out / "manifest.json", _manifest(args, {"labels": labels, "steps": written}))
    print(f"steps={written} labels={','.join(labels)}")


# -- run ---------------------------------------------------------------------

def _remap(batch, old_vocab, new_vocab):
    if old_vocab.tokens == new_vocab.tokens:
        return batch
    docs = []
    for doc in batch.docs:
        counts = {new_vocab.index[old_vocab.tokens[k]]: c for k, c in doc.counts.items()
                  if old_vocab.tokens[k] in new_vocab.index}
        if counts:
            docs.append(corpus.BowDocument(doc.id, counts, doc.label))
    return corpus.Batch(docs, batch.step_index)


def _batch_files(path):
    path = _path(path, "batches")
    files = sorted(path.glob("step_*.jsonl")) if path.is_dir() else [path]
    if not files:
        raise UsageError(f"no step_*.jsonl files in {path}")
    return files


def _stream_config(args):
    train = TrainConfig(args.epochs, args.batch_size, args.lr, args.weight_decay, args.seed, args.mc_samples)
    uot = UotConfig(args.lambda_a, args.lambda_atilde, args.uot_max_iter, args.uot_tol, args.mass_tol,
                    args.min_row_fraction)
    merge = stream.MergeConfig(args.omega, uot, args.metric)
    return stream.StreamConfig(args.n_topics, args.hidden, train, merge, args.seed, args.top_n)


def cmd_run(args):
    vocab = corpus.Vocabulary.load(_path(args.vocab, "vocab"))
    emb, emb_vocab = embeddings.load_embeddings(_path(args.embeddings, "embeddings"), vocab, args.max_rows)
    batches = [_remap(corpus.Batch.load_jsonl(f, i + 1), vocab, emb_vocab)
               for i, f in enumerate(_batch_files(args.batches))]
    cfg = _stream_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    vh = vocab_hash(emb_vocab.tokens)
    _write_json(out / "manifest.json", _manifest(args, {
        "resolved": {"train": asdict(cfg.train), "merge": {"omega": cfg.merge.omega, "metric": cfg.merge.metric,
                                                           "uot": asdict(cfg.merge.uot)},
                     "n_topics": cfg.n_topics, "hidden": cfg.hidden, "seed": cfg.seed, "top_n": cfg.top_n},
        "vocab_size": emb_vocab.V, "embedding_dim": emb.L, "vocab_hash": vh, "steps": len(batches)}))

    def flush(state):
        step_dir = out / f"step_{state.t}"
        step_dir.mkdir(exist_ok=True)
        _write_json(step_dir / "model.json", state.model.to_json(vh))
        if state.t > 1:
            C, plan = state.plans[-1]
            _write_json(step_dir / "plan.json", plan.to_json(C))
        _write_json(out / "result.json", state.result())
        stream.write_proportions_csv(out / "proportions.csv", state.per_step)

    state = stream.run_stream(batches, emb.rho, emb_vocab, cfg, on_step=flush)
    print(f"steps={state.t} topics={state.registry.K}")


# -- detect ------------------------------------------------------------------

def _prior(args):
    return changepoint.OcpdPrior(args.mu0, args.kappa0, args.alpha0, args.beta0, args.hazard_lambda)


def _truth_steps(path):
    obj = json.loads(_path(path, "truth").read_text())
    if isinstance(obj, dict) and "change_steps" in obj:
        return obj["change_steps"]
    if isinstance(obj, dict) and "tau" in obj:
        tau = np.asarray(obj["tau"], dtype=float)
        return changepoint.truth_steps_from_schedule(tau[tau.sum(axis=1) > 0])
    return list(obj)


def cmd_detect(args):
    steps, series = stream.read_proportions_csv(_path(args.series, "series"))
    prior = _prior(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    alerts = changepoint.detect(series, prior, args.threshold, steps=steps, max_run=args.max_run)
    changepoint.write_alerts(out / "alerts.json", alerts, prior)
    if args.truth:
        truth = _truth_steps(args.truth)
        probs = {tid: changepoint.changepoint_probabilities(v, prior, args.max_run) for tid, v in series.items()}

        def detect_fn(thr):
            return [s for p in probs.values() for s, v in zip(steps, p) if v > thr]

        grid = np.linspace(0.0, 1.0, args.grid_size)
        points = changepoint.evaluate_roc(truth, detect_fn, grid, steps)
        changepoint.write_roc_csv(out / "roc.csv", points)
    print(f"alerts={len(alerts)}")


# -- eval --------------------------------------------------------------------

def cmd_eval(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.run:
        run_dir = _path(args.run, "run directory")
        result = json.loads((run_dir / "result.json").read_text())
        vocab = corpus.Vocabulary.load(_path(args.vocab, "vocab"))
        files = _batch_files(args.batches) if args.batches else []
        emb, emb_vocab = embeddings.load_embeddings(_path(args.embeddings, "embeddings"), vocab, args.max_rows)
        report = []
        for entry in result["steps"]:
            t = entry["step"]
            model = json.loads((run_dir / f"step_{t}" / "model.json").read_text())
            alpha = np.array(model["alpha"])
            beta = compute_beta(emb.rho, alpha)
            ids = metrics.top_word_ids(beta, args.top_n)
            td = metrics.topic_diversity(ids, args.top_n)
            row = {"step": t, "td": td}
            if files:
                batch = _remap(corpus.Batch.load_jsonl(files[t - 1]), vocab, emb_vocab)
                tc, skipped = metrics.topic_coherence(ids, batch, args.top_n)
                row.update(tc=tc, h=None if math.isnan(tc) else metrics.harmonic_mean(max(tc, 0.0), td),
                           skipped_pairs=skipped)
            if args.truth:
                truth = json.loads(_path(args.truth, "truth").read_text())
                if truth.get("step") == t and entry["merge"]:
                    m = entry["merge"]
                    assignment = {j: None for j in m["discovered_from"]}
                    assignment.update({j: tid for j, tid in m["matches"]})
                    common = {int(k): v for k, v in truth["common"].items()}
                    row["MA"], row["DA"] = metrics.merge_discovery_accuracy(assignment, common, truth["novel"])
            report.append(row)
        _write_json(out / "metrics.json", {"meta": {"tc": "NPMI, document presence, -1 without co-occurrence"},
                                           "steps": report})
    if args.benchmark:
        table = toys.merge_benchmark(args.trials, args.seed)
        _write_json(out / "benchmark.json", table)
        for row in table:
            print(f"{row['method']:<14} MA={row['MA_mean']:.2f}±{row['MA_std']:.2f} "
                  f"DA={row['DA_mean']:.2f}±{row['DA_std']:.2f} H={row['H']:.2f}")
    if not args.run and not args.benchmark:
        raise UsageError("eval needs --run and/or --benchmark")


# -- toy-fig1 ----------------------------------------------------------------

def cmd_toy_fig1(args):
    res = toys.fig1_toy(args.seed, threshold=args.threshold)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_json(out, res)
    print(f"uot_stable={res['uot_stable']} euclidean_stable={res['euclidean_stable']}")


def build_parser():
    p = argparse.ArgumentParser(prog="stream-etm", description="Streaming embedded topic model.")
    sub = p.add_subparsers(dest="command", required=True)

    pp = sub.add_parser("preprocess", help="build vocabulary and bag-of-words documents")
    pp.add_argument("--corpus", required=True, help="directory of .txt files or JSONL {id, text, label}")
    pp.add_argument("--stopwords", help="newline-delimited stopword file (default: bundled English list)")
    pp.add_argument("--min-count", type=int, default=corpus.DEFAULT_MIN_COUNT)
    pp.add_argument("--max-df", type=float, default=corpus.DEFAULT_MAX_DF)
    pp.add_argument("--vocab-cap", type=int, default=corpus.DEFAULT_VOCAB_CAP)
    pp.add_argument("--embeddings", help="word-vector file; vocabulary is restricted to its words")
    pp.add_argument("--max-rows", type=int, default=15000)
    pp.add_argument("--out", required=True)
    pp.set_defaults(func=cmd_preprocess)

    ps = sub.add_parser("simulate", help="generate a schedule and sample per-step batches")
    ps.add_argument("--docs", required=True, help="labelled documents JSONL (preprocess output)")
    ps.add_argument("--schedule", help="schedule JSON (custom matrix or dynamic spec)")
    ps.add_argument("--labels", help="comma-separated label order for schedule columns")
    ps.add_argument("--steps", type=int, default=11)
    ps.add_argument("--p", type=float, default=0.7)
    ps.add_argument("--dir-alpha", type=float, default=2.0)
    ps.add_argument("--n-docs", type=int, default=500)
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--out", required=True)
    ps.set_defaults(func=cmd_simulate)

    pr = sub.add_parser("run", help="run the online topic model over per-step batches")
    pr.add_argument("--vocab", required=True)
    pr.add_argument("--embeddings", required=True)
    pr.add_argument("--batches", required=True, help="directory of step_*.jsonl files")
    pr.add_argument("--max-rows", type=int, default=15000)
    pr.add_argument("--n-topics", type=int, default=3)
    pr.add_argument("--hidden", type=int, default=800)
    pr.add_argument("--epochs", type=int, default=3000)
    pr.add_argument("--batch-size", type=int, default=1000)
    pr.add_argument("--lr", type=float, default=0.01)
    pr.add_argument("--weight-decay", type=float, default=0.006)
    pr.add_argument("--mc-samples", type=int, default=1)
    pr.add_argument("--omega", type=float, default=0.5)
    pr.add_argument("--metric", default="cosine", help="cosine, euclidean or minkowski:<p>")
    pr.add_argument("--lambda-a", type=float, default=0.09)
    pr.add_argument("--lambda-atilde", type=float, default=0.09)
    pr.add_argument("--uot-max-iter", type=int, default=1000)
    pr.add_argument("--uot-tol", type=float, default=1e-6)
    pr.add_argument("--mass-tol", type=float, default=1e-8)
    pr.add_argument("--min-row-fraction", type=float, default=0.06)
    pr.add_argument("--top-n", type=int, default=5)
    pr.add_argument("--seed", type=int, default=0)
    pr.add_argument("--out", required=True)
    pr.set_defaults(func=cmd_run)

    pd = sub.add_parser("detect", help="change-point alerts (and ROC) from a proportions CSV")
    pd.add_argument("--series", required=True, help="step,topic_id,proportion CSV")
    pd.add_argument("--truth", help="truth.json, schedule JSON or JSON list of change steps")
    pd.add_argument("--threshold", type=float, default=0.5)
    pd.add_argument("--grid-size", type=int, default=101)
    pd.add_argument("--mu0", type=float, default=None)
    pd.add_argument("--kappa0", type=float, default=1.0)
    pd.add_argument("--alpha0", type=float, default=1.0)
    pd.add_argument("--beta0", type=float, default=0.01)
    pd.add_argument("--hazard-lambda", type=float, default=10.0)
    pd.add_argument("--max-run", type=int, default=None)
    pd.add_argument("--out", required=True)
    pd.set_defaults(func=cmd_detect)

    pe = sub.add_parser("eval", help="topic quality per step and the merge benchmark")
    pe.add_argument("--run", help="output directory of `run`")
    pe.add_argument("--vocab")
    pe.add_argument("--embeddings")
    pe.add_argument("--max-rows", type=int, default=15000)
    pe.add_argument("--batches", help="batches used for the run (for coherence)")
    pe.add_argument("--truth", help="merge truth JSON {step, common: {j: k}, novel: [j]}")
    pe.add_argument("--top-n", type=int, default=10)
    pe.add_argument("--benchmark", action="store_true", help="run the synthetic merge benchmark")
    pe.add_argument("--trials", type=int, default=50)
    pe.add_argument("--seed", type=int, default=0)
    pe.add_argument("--out", required=True)
    pe.set_defaults(func=cmd_eval)

    pt = sub.add_parser("toy-fig1", help="2-D perturbation toy comparing UOT and Euclidean matching")
    pt.add_argument("--seed", type=int, default=toys.FIG1_SEED)
    pt.add_argument("--threshold", type=float, default=0.5)
    pt.add_argument("--out", required=True)
    pt.set_defaults(func=cmd_toy_fig1)
    return p


def main(argv=None):
    level = os.environ.get("STREAM_ETM_LOG", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except StreamEtmError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
