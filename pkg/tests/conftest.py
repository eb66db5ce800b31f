import numpy as np
import pytest

from stream_etm.corpus import Batch, BowDocument
from stream_etm.etm import init_model


def random_instance(V=20, K=3, L=8, H=16, D=4, seed=0):
    """Small model with nonzero biases, a dense-ish count matrix and fixed noise."""
    rng = np.random.default_rng(seed)
    rho = rng.normal(size=(L, V))
    model = init_model(V, K, L, H, rho, seed=seed + 1)
    model.b1[:] = 0.1 * rng.normal(size=H)
    model.bmu[:] = 0.1 * rng.normal(size=K)
    model.bsig[:] = 0.1 * rng.normal(size=K)
    X = rng.poisson(1.0, size=(D, V)).astype(float)
    X[:, 0] += 1
    noise = rng.normal(size=(D, K))
    return model, X, noise


def two_topic_batch(n_docs=50, V=30, seed=0):
    """Documents drawn from two disjoint word blocks."""
    rng = np.random.default_rng(seed)
    docs = []
    half = V // 2
    for d in range(n_docs):
        lo = 0 if d % 2 == 0 else half
        words = rng.integers(lo, lo + half, size=30)
        ids, counts = np.unique(words, return_counts=True)
        docs.append(BowDocument(str(d), {int(a): int(b) for a, b in zip(ids, counts)}, str(d % 2)))
    return Batch(docs)


@pytest.fixture
def instance():
    return random_instance()


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    verdicts = getattr(mod, "VERDICTS", None)
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(verdicts):
        terminalreporter.write_line(verdicts[num])
