import json
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stream_etm.corpus import (Batch, BowDocument, Vocabulary, build_vocabulary, load_stopwords,
                               read_corpus, tokenize, vectorize, vectorize_all)
from stream_etm.errors import EmptyVocabulary, FormatError


def test_tokenize_examples():
    assert tokenize("The Dog, the dog!") == ["the", "dog", "the", "dog"]
    assert tokenize("x1 y2") == []
    assert tokenize("a b") == []
    assert tokenize("Café «déjà» vu-ok") == ["café", "déjà", "vuok"]


def test_build_vocabulary_examples():
    assert build_vocabulary([["cat"], ["dog"], ["dog"]], min_count=2).tokens == ("dog",)
    docs = [["the", f"w{i}", "x", "x"] for i in range(10)]
    assert "the" not in build_vocabulary(docs, max_df_ratio=0.7, min_count=1)
    # x is in every document, so the df filter is switched off to isolate the stopword rule
    assert build_vocabulary([["a", "x"], ["x"]], stopwords={"a"}, min_count=1,
                            max_df_ratio=1.0).tokens == ("x",)


def test_build_vocabulary_order_and_cap():
    docs = [["b", "b", "a"], ["a", "c"], ["c", "d"], ["e"]]
    v = build_vocabulary(docs, min_count=1, max_df_ratio=1.0, cap=3)
    # counts a=2 b=2 c=2 d=1 e=1 -> ties lexicographic
    assert v.tokens == ("a", "b", "c")


def test_build_vocabulary_empty():
    with pytest.raises(EmptyVocabulary):
        build_vocabulary([["cat"], ["dog"]], min_count=2)


words = st.sampled_from(["alpha", "beta", "gamma", "delta", "eps", "zeta", "eta", "theta"])


@given(st.lists(st.lists(words, max_size=8), min_size=1, max_size=20),
       st.integers(1, 3), st.floats(0.1, 1.0))
@settings(max_examples=100, deadline=None)
def test_vocabulary_filters_by_recount(docs, min_count, max_df):
    try:
        v = build_vocabulary(docs, stopwords={"eta"}, min_count=min_count, max_df_ratio=max_df)
    except EmptyVocabulary:
        return
    counts = Counter(w for d in docs for w in d)
    for tok in v.tokens:
        assert tok != "eta"
        assert counts[tok] >= min_count
        assert sum(tok in d for d in docs) / len(docs) <= max_df
    assert all(v.index[t] == i for i, t in enumerate(v.tokens))
    assert build_vocabulary(docs, stopwords={"eta"}, min_count=min_count, max_df_ratio=max_df) == v


def test_vectorize_examples():
    vocab = Vocabulary(["dog"])
    assert vectorize(["dog", "dog", "cat"], vocab).counts == {0: 2}
    assert vectorize(["zzz"], vocab) is None
    assert vectorize([], vocab) is None


@given(st.lists(words, max_size=30))
def test_vectorize_total_equals_in_vocab_tokens(tokens):
    vocab = Vocabulary(["alpha", "gamma", "theta"])
    doc = vectorize(tokens, vocab)
    n = sum(t in vocab.index for t in tokens)
    assert (doc is None and n == 0) or doc.length == n


def test_vocabulary_rejects_duplicates_and_round_trips(tmp_path):
    with pytest.raises(ValueError):
        Vocabulary(["a", "a"])
    v = Vocabulary(["x", "y"])
    v.save(tmp_path / "v.json")
    assert json.loads((tmp_path / "v.json").read_text()) == ["x", "y"]
    assert Vocabulary.load(tmp_path / "v.json") == v


def test_batch_jsonl_round_trip_and_csr(tmp_path):
    b = Batch([BowDocument("a", {0: 2, 3: 1}, "sci"), BowDocument("b", {1: 4})])
    b.save_jsonl(tmp_path / "b.jsonl")
    first = json.loads((tmp_path / "b.jsonl").read_text().splitlines()[0])
    assert first == {"id": "a", "counts": {"0": 2, "3": 1}, "label": "sci"}
    back = Batch.load_jsonl(tmp_path / "b.jsonl")
    assert [d.counts for d in back.docs] == [d.counts for d in b.docs]
    X = back.to_csr(4).toarray()
    assert X.tolist() == [[2, 0, 0, 1], [0, 4, 0, 0]]


def test_bad_jsonl_reports_line(tmp_path):
    p = tmp_path / "b.jsonl"
    p.write_text('{"id": "a", "counts": {"0": 1}}\nnot json\n')
    with pytest.raises(FormatError) as exc:
        Batch.load_jsonl(p)
    assert exc.value.line == 2


def test_read_corpus_dir_and_jsonl(tmp_path):
    d = tmp_path / "docs"
    d.mkdir()
    (d / "b.txt").write_text("second doc")
    (d / "a.txt").write_text("first doc")
    assert read_corpus(d) == [("a", "first doc", None), ("b", "second doc", None)]
    j = tmp_path / "c.jsonl"
    j.write_text('{"id": 1, "text": "hi there", "label": "x"}\n\n{"id": "2", "text": "yo"}\n')
    assert read_corpus(j) == [("1", "hi there", "x"), ("2", "yo", None)]


def test_vectorize_all_drops_empty():
    vocab = Vocabulary(["dog"])
    batch, dropped = vectorize_all([("1", ["dog"], None), ("2", ["cat"], None)], vocab)
    assert dropped == 1 and len(batch) == 1


def test_bundled_stopwords():
    sw = load_stopwords()
    assert {"the", "and", "of"} <= sw
    assert all(w == w.strip() and w for w in sw)
