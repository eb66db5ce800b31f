import json

import numpy as np
import pytest

from stream_etm import stream as stream_mod
from stream_etm.errors import DimensionError, InvalidConfig, PoolError, ScheduleError
from stream_etm.etm import TrainConfig
from stream_etm.stream import (MergeConfig, StreamConfig, generate_dynamic_schedule, load_schedule,
                               merge_alphas, read_proportions_csv, run_stream, sample_batch,
                               write_proportions_csv)
from stream_etm.toys import synthetic_corpus
from stream_etm.transport import TransportPlan


def plan_of(T):
    T = np.asarray(T, dtype=float)
    return TransportPlan(T, 0.0, 1, True, np.full(T.shape[0], 1 / T.shape[0]))


# -- merge_alphas --------------------------------------------------------------

def test_merge_omega_limits():
    rng = np.random.default_rng(0)
    new, prev = rng.normal(size=(4, 2)), rng.normal(size=(4, 2))
    T = [[0.4, 0.0], [0.0, 0.3]]
    m1, _ = merge_alphas(new, prev, plan_of(T), omega=1.0)
    assert np.array_equal(m1, new)
    m0, _ = merge_alphas(new, prev, plan_of(T), omega=0.0)
    assert np.array_equal(m0, prev)
    mh, rep = merge_alphas(new, prev, plan_of(T), omega=0.5)
    assert np.allclose(mh, 0.5 * new + 0.5 * prev)
    assert rep.matches == [(0, 0), (1, 1)] and rep.discoveries == []


def test_merge_zero_row_is_discovery():
    rng = np.random.default_rng(1)
    new, prev = rng.normal(size=(3, 2)), rng.normal(size=(3, 2))
    merged, rep = merge_alphas(new, prev, plan_of([[0.0, 0.0], [0.2, 0.1]]), omega=0.5)
    assert rep.discoveries == [0] and rep.matches == [(1, 0)]
    assert merged.shape == (3, 3)
    assert np.array_equal(merged[:, 2], new[:, 0])
    assert np.array_equal(merged[:, 1], prev[:, 1])  # unmatched previous topic persists


def test_merge_many_to_one_largest_mass_owns():
    rng = np.random.default_rng(2)
    new, prev = rng.normal(size=(3, 2)), rng.normal(size=(3, 1))
    merged, rep = merge_alphas(new, prev, plan_of([[0.1], [0.3]]), omega=0.5)
    assert rep.matches == [(1, 0)] and rep.discoveries == [0]
    assert np.allclose(merged[:, 0], 0.5 * new[:, 1] + 0.5 * prev[:, 0])
    assert np.array_equal(merged[:, 1], new[:, 0])


def test_merge_errors():
    with pytest.raises(DimensionError):
        merge_alphas(np.zeros((3, 2)), np.zeros((3, 2)), np.zeros((3, 2)))
    with pytest.raises(InvalidConfig):
        MergeConfig(omega=1.5)


def test_merge_accepts_bare_matrix():
    new = np.eye(2)
    merged, rep = merge_alphas(new, new, np.array([[0.0, 0.3], [0.2, 0.0]]), omega=0.0)
    assert rep.matches == [(0, 1), (1, 0)]
    assert np.array_equal(merged, new)


# -- schedules -----------------------------------------------------------------

def test_dynamic_schedule_properties():
    s = generate_dynamic_schedule(5, 11, p=0.7, dir_alpha=2.0, seed=7)
    assert s.tau.shape == (11, 5)
    assert np.allclose(s.tau.sum(1), 1, atol=1e-9) and np.all(s.tau >= 0)
    assert np.array_equal(s.tau, generate_dynamic_schedule(5, 11, 0.7, 2.0, seed=7).tau)
    full = generate_dynamic_schedule(4, 6, p=1.0, dir_alpha=3.0, seed=1)
    assert np.all(full.tau > 0)
    with pytest.raises(InvalidConfig):
        generate_dynamic_schedule(3, 4, p=0.0)
    with pytest.raises(InvalidConfig):
        generate_dynamic_schedule(3, 4, dir_alpha=1.0)


def test_custom_schedule_validation(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps({"kind": "custom", "tau": [[0.5, 0.5, 0, 0, 0], [0, 0, 0, 0, 0]]}))
    s = load_schedule(p)
    assert s.inactive.tolist() == [False, True]
    p.write_text(json.dumps([[0.5, 0.5], [0.5, 0.6]]))
    with pytest.raises(ScheduleError) as exc:
        load_schedule(p)
    assert exc.value.row == 1
    p.write_text(json.dumps([[1.2, -0.2]]))
    with pytest.raises(ScheduleError):
        load_schedule(p)
    p.write_text(json.dumps({"kind": "dynamic", "K": 3, "T": 4, "p": 0.7, "alpha": 2.0, "seed": 7}))
    assert np.array_equal(load_schedule(p).tau, generate_dynamic_schedule(3, 4, 0.7, 2.0, 7).tau)


def test_sample_batch():
    pools = {"a": ["a1", "a2"], "b": ["b1"]}
    pools = {k: [type("D", (), {"id": x})() for x in v] for k, v in pools.items()}
    b = sample_batch(pools, [1.0, 0.0], n_docs=5, seed=3)
    assert len(b) == 5 and all(d.id.startswith("a") for d in b.docs)
    ids = [d.id for d in sample_batch(pools, [0.5, 0.5], 20, seed=4).docs]
    assert ids == [d.id for d in sample_batch(pools, [0.5, 0.5], 20, seed=4).docs]
    with pytest.raises(PoolError):
        sample_batch({"a": [], "b": pools["b"]}, [0.5, 0.5], 5)
    with pytest.raises(ScheduleError):
        sample_batch(pools, [0.0, 0.0], 5)


# -- the loop ------------------------------------------------------------------

@pytest.fixture(scope="module")
def small_stream():
    vocab, rho, pools, _ = synthetic_corpus(n_topics=3, V=60, L=8, docs_per_topic=60, seed=1)
    sched = generate_dynamic_schedule(3, 3, p=0.7, dir_alpha=2.0, seed=0)
    batches = [sample_batch(pools, row, 60, seed=i, step_index=i) for i, row in enumerate(sched.tau)]
    cfg = StreamConfig(hidden=16, train=TrainConfig(epochs=40, batch_size=60))
    return vocab, rho, batches, cfg


def test_stream_first_step_and_invariants(small_stream):
    vocab, rho, batches, cfg = small_stream
    state = run_stream(batches, rho, vocab, cfg, keep_models=True)
    reg = state.registry
    assert state.per_step[0]["merge"] is None
    assert list(state.per_step[0]["proportions"]) == ["0", "1", "2"]
    assert reg.ids == sorted(reg.ids) and len(set(reg.ids)) == len(reg.ids)
    assert reg.alpha.shape[1] == len(reg.ids)
    sizes = [len(e["proportions"]) for e in state.per_step]
    assert sizes == sorted(sizes)
    for e in state.per_step:
        assert abs(sum(e["proportions"].values()) - 1) < 1e-6
    for m in state.models:
        assert m.alpha.shape[1] == m.Wmu.shape[0]
    # the frozen retrain leaves the registry's alpha untouched
    assert np.array_equal(state.model.alpha, reg.alpha)


def test_stream_deterministic(small_stream, tmp_path):
    vocab, rho, batches, cfg = small_stream
    a = run_stream(batches, rho, vocab, cfg)
    b = run_stream(batches, rho, vocab, cfg)
    write_proportions_csv(tmp_path / "a.csv", a.per_step)
    write_proportions_csv(tmp_path / "b.csv", b.per_step)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert a.result() == b.result()
    steps, series = read_proportions_csv(tmp_path / "a.csv")
    assert steps == [1, 2, 3]
    assert set(series) == {int(k) for k in a.per_step[-1]["proportions"]}


def test_zero_row_grows_registry_by_one(small_stream, monkeypatch):
    vocab, rho, batches, cfg = small_stream
    real = stream_mod.uot_solve

    def one_empty_row(C, *args, **kwargs):
        plan = real(C, *args, **kwargs)
        T = np.eye(*plan.T.shape) * 0.3
        T[-1] = 0.0
        return TransportPlan(T, plan.objective, plan.iterations, True, plan.a_tilde)

    monkeypatch.setattr(stream_mod, "uot_solve", one_empty_row)
    state = run_stream(batches[:2], rho, vocab, cfg)
    assert state.registry.ids == [0, 1, 2, 3]
    assert state.per_step[1]["merge"]["discoveries"] == [3]
    assert state.registry.birth_step[3] == 2
