"""Tokenization, vocabulary building and bag-of-words vectorization."""

import json
import logging
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import EmptyVocabulary, FormatError

log = logging.getLogger(__name__)

DEFAULT_MIN_COUNT = 2
DEFAULT_MAX_DF = 0.7
DEFAULT_VOCAB_CAP = 15000


@dataclass(frozen=True)
class Vocabulary:
    tokens: tuple

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        index = {t: i for i, t in enumerate(self.tokens)}
        if len(index) != len(self.tokens):
            raise ValueError("vocabulary tokens must be unique")
        object.__setattr__(self, "_index", index)

    @property
    def index(self):
        return self._index

    @property
    def V(self):
        return len(self.tokens)

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self._index

    def save(self, path):
        Path(path).write_text(json.dumps(list(self.tokens), ensure_ascii=False))

    @classmethod
    def load(cls, path):
        try:
            tokens = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: {exc}") from exc
        if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
            raise FormatError(f"{path}: vocabulary must be a JSON array of strings")
        return cls(tokens)


@dataclass
class BowDocument:
    id: str
    counts: dict
    label: str = None

    @property
    def length(self):
        return sum(self.counts.values())

    def to_json(self):
        out = {"id": self.id, "counts": {str(k): int(v) for k, v in sorted(self.counts.items())}}
        if self.label is not None:
            out["label"] = self.label
        return out

    @classmethod
    def from_json(cls, obj):
        counts = {int(k): int(v) for k, v in obj["counts"].items()}
        return cls(str(obj["id"]), counts, obj.get("label"))


@dataclass
class Batch:
    docs: list
    step_index: int = 0
    _csr: object = field(default=None, repr=False, compare=False)

    def __len__(self):
        return len(self.docs)

    def to_csr(self, V):
        """Document-term count matrix (D x V) in CSR form."""
        if self._csr is None or self._csr.shape[1] != V:
            rows, cols, vals = [], [], []
            for d, doc in enumerate(self.docs):
                for k in sorted(doc.counts):
                    rows.append(d)
                    cols.append(k)
                    vals.append(doc.counts[k])
            self._csr = sp.csr_matrix(
                (np.asarray(vals, dtype=float), (rows, cols)), shape=(len(self.docs), V)
            )
        return self._csr

    def save_jsonl(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for doc in self.docs:
                fh.write(json.dumps(doc.to_json(), ensure_ascii=False) + "\n")

    @classmethod
    def load_jsonl(cls, path, step_index=0):
        docs = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    docs.append(BowDocument.from_json(json.loads(line)))
                except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
                    raise FormatError(f"{path}: {exc}", line=lineno) from exc
        return cls(docs, step_index)


def tokenize(text):
    """Lowercase, drop Unicode punctuation, keep alphabetic tokens of length >= 2."""
    text = "".join(ch for ch in text.lower() if not unicodedata.category(ch).startswith("P"))
    return [tok for tok in text.split() if len(tok) >= 2 and tok.isalpha()]


def build_vocabulary(raw_docs, stopwords=frozenset(), min_count=DEFAULT_MIN_COUNT,
                     max_df_ratio=DEFAULT_MAX_DF, cap=DEFAULT_VOCAB_CAP):
    """Build the filtered vocabulary of a tokenized corpus.

    Tokens are dropped when they are stopwords, occur fewer than `min_count`
    times in the whole corpus, or appear in more than `max_df_ratio` of the
    documents. At most `cap` survivors are kept, ordered by descending corpus
    frequency with ties broken lexicographically.
    """
    if not raw_docs:
        raise ValueError("raw_docs must be nonempty")
    if not 0 < max_df_ratio <= 1:
        raise ValueError("max_df_ratio must be in (0, 1]")
    if min_count < 1:
        raise ValueError("min_count must be >= 1")

    counts = Counter()
    df = Counter()
    for doc in raw_docs:
        counts.update(doc)
        df.update(set(doc))
    n_docs = len(raw_docs)
    kept = [
        tok for tok, c in counts.items()
        if tok not in stopwords and c >= min_count and df[tok] / n_docs <= max_df_ratio
    ]
    if not kept:
        raise EmptyVocabulary("every token was filtered out")
    kept.sort(key=lambda tok: (-counts[tok], tok))
    return Vocabulary(kept[:cap])


def vectorize(tokens, vocab, doc_id="", label=None):
    """Count in-vocabulary tokens. Returns None (dropped) when none remain."""
    index = vocab.index
    counts = Counter(index[t] for t in tokens if t in index)
    if not counts:
        return None
    return BowDocument(doc_id, dict(counts), label)


def vectorize_all(raw, vocab, step_index=0):
    """Vectorize (id, tokens, label) triples, dropping empty documents."""
    docs = []
    for doc_id, tokens, label in raw:
        doc = vectorize(tokens, vocab, doc_id, label)
        if doc is not None:
            docs.append(doc)
    dropped = len(raw) - len(docs)
    if dropped:
        log.info("dropped %d empty documents", dropped)
    return Batch(docs, step_index), dropped


def read_corpus(path):
    """Read raw documents as (id, text, label) triples.

    `path` is either a directory of ``.txt`` files (one document per file,
    id = file stem) or a JSONL file with ``id``, ``text`` and optional
    ``label`` fields.
    """
    path = Path(path)
    if path.is_dir():
        return [(p.stem, p.read_text(encoding="utf-8"), None) for p in sorted(path.glob("*.txt"))]
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                out.append((str(obj["id"]), obj["text"], obj.get("label")))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise FormatError(f"{path}: {exc}", line=lineno) from exc
    return out


def load_stopwords(path=None):
    """Newline-delimited stopword file; the bundled English list when `path` is None."""
    if path is None:
        text = resources.files("stream_etm").joinpath("data/stopwords_en.txt").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())
