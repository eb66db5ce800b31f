import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stream_etm.errors import DimensionError, InvalidConfig, NumericalError, ZeroVector
from stream_etm.transport import (NEW, CostMatrix, UotConfig, assign_from_plan, cost_matrix,
                                  match_by_distance, uot_objective, uot_solve)

from oracles import uot_F, uot_projected_gradient


def random_problem(seed, max_dim=6):
    rng = np.random.default_rng(seed)
    J, K = rng.integers(1, max_dim + 1, size=2)
    C = rng.uniform(0, 1.5, size=(J, K))
    return C, np.full(J, 1 / J), np.full(K, 1 / K)


# -- cost matrices -----------------------------------------------------------

@pytest.mark.parametrize("metric", ["cosine", "euclidean", "minkowski:1", "minkowski:3"])
def test_identical_embeddings_have_zero_diagonal(metric):
    A = np.random.default_rng(0).normal(size=(5, 4))
    C = cost_matrix(A, A, metric).C
    assert np.allclose(np.diag(C), 0, atol=1e-12)


def test_cosine_orthogonal_is_one():
    C = cost_matrix(np.array([[1.0], [0.0]]), np.array([[0.0], [1.0]]), "cosine").C
    assert C[0, 0] == pytest.approx(1.0)


def test_minkowski_one_arithmetic():
    C = cost_matrix(np.array([[0.0], [0.0]]), np.array([[1.0], [2.0]]), ("minkowski", 1)).C
    assert C[0, 0] == pytest.approx(3.0)
    assert cost_matrix(np.zeros((2, 1)), np.array([[3.0], [4.0]]), "euclidean").C[0, 0] == pytest.approx(5.0)


def test_cost_matrix_errors():
    with pytest.raises(ZeroVector):
        cost_matrix(np.zeros((3, 1)), np.ones((3, 1)), "cosine")
    with pytest.raises(InvalidConfig):
        cost_matrix(np.ones((3, 1)), np.ones((3, 1)), "minkowski:0.5")
    with pytest.raises(DimensionError):
        cost_matrix(np.ones((3, 1)), np.ones((4, 1)))
    with pytest.raises(NumericalError):
        CostMatrix(np.array([[-1.0]]))


def test_cost_matrix_shape_is_new_by_prev():
    rng = np.random.default_rng(1)
    assert cost_matrix(rng.normal(size=(4, 2)), rng.normal(size=(4, 5))).shape == (2, 5)


# -- solver ------------------------------------------------------------------

def test_one_by_one_zero_cost_fixed_point():
    plan = uot_solve(np.zeros((1, 1)), np.ones(1), np.ones(1))
    assert plan.T[0, 0] == pytest.approx(1.0, abs=1e-12)


def test_one_by_one_closed_form():
    # stationarity of c t + 2 lam (t ln t - t + 1): c + 2 lam ln t = 0
    plan = uot_solve(np.array([[0.5]]), np.ones(1), np.ones(1),
                     UotConfig(lambda_a=0.09, lambda_atilde=0.09))
    assert plan.T[0, 0] == pytest.approx(math.exp(-0.5 / 0.18), abs=1e-6)
    assert plan.converged


def test_one_by_one_asymmetric_penalties():
    # c + (la + lb) ln t = 0 with unit masses
    plan = uot_solve(np.array([[0.3]]), np.ones(1), np.ones(1), UotConfig(lambda_a=0.05, lambda_atilde=0.2))
    assert plan.T[0, 0] == pytest.approx(math.exp(-0.3 / 0.25), abs=1e-6)


def test_zero_cost_symmetric_marginals():
    plan = uot_solve(np.zeros((3, 3)), cfg=UotConfig(tol=1e-12))
    assert np.allclose(plan.T.sum(1), 1 / 3, atol=1e-6)
    assert np.allclose(plan.T.sum(0), 1 / 3, atol=1e-6)


@pytest.mark.parametrize("seed", range(100))
def test_monotone_and_matches_oracle(seed):
    C, ar, ac = random_problem(seed)
    plan = uot_solve(C, ar, ac)
    hist = np.array(plan.history)
    assert np.all(np.diff(hist) <= 1e-12)
    _, f_oracle = uot_projected_gradient(C, ar, ac, 0.09, 0.09)
    assert plan.objective <= f_oracle + 1e-4


def test_reported_objective_is_objective_of_plan():
    C, ar, ac = random_problem(3)
    plan = uot_solve(C, ar, ac)
    assert plan.objective == pytest.approx(uot_F(plan.T, C, ar, ac, 0.09, 0.09), abs=1e-14)
    assert plan.objective == uot_objective(plan.T, C, ar, ac, 0.09, 0.09)


@given(st.integers(0, 2**31))
@settings(max_examples=40, deadline=None)
def test_plan_nonnegative_finite(seed):
    C, ar, ac = random_problem(seed)
    plan = uot_solve(C, ar, ac, UotConfig(max_iter=50))
    assert np.all(plan.T >= 0) and np.all(np.isfinite(plan.T))
    assert plan.iterations <= 50


def test_truncation_below_mass_tol():
    C = np.array([[0.0, 30.0]])
    plan = uot_solve(C, cfg=UotConfig(mass_tol=1e-8))
    assert plan.T[0, 1] == 0.0 and plan.T[0, 0] > 0


def test_solver_errors():
    with pytest.raises(DimensionError):
        uot_solve(np.zeros((0, 3)))
    with pytest.raises(DimensionError):
        uot_solve(np.zeros((2, 2)), np.ones(3))
    with pytest.raises(InvalidConfig):
        uot_solve(np.zeros((2, 2)), np.array([1.0, 0.0]))
    with pytest.raises(InvalidConfig):
        UotConfig(lambda_a=0)


def test_plan_dump_schema(tmp_path):
    C = np.array([[0.1, 0.9], [0.8, 0.2]])
    plan = uot_solve(C)
    path = tmp_path / "plan.json"
    plan.dump(path, C)
    obj = json.loads(path.read_text())
    assert set(obj) == {"C", "T", "objective", "iterations", "converged"}
    assert obj["C"] == C.tolist()


# -- matchers ----------------------------------------------------------------

def test_match_by_distance_examples():
    assert match_by_distance(np.array([[0.1, 0.9]]), 0.5) == [0]
    assert match_by_distance(np.array([[0.8, 0.9]]), 0.5) == [NEW]
    assert match_by_distance(np.array([[0.2, 0.2]]), 0.5) == [0]
    with pytest.raises(InvalidConfig):
        match_by_distance(np.zeros((1, 1)), 0)


def test_assign_from_plan_examples():
    assert assign_from_plan(np.array([[0.0, 0.3]])) == [1]
    assert assign_from_plan(np.array([[0.0, 0.0]])) == [NEW]
    assert assign_from_plan(np.array([[1e-12, 1e-12]]), mass_tol=1e-8) == [NEW]
    assert assign_from_plan(np.array([[0.2, 0.2]])) == [0]
    with pytest.raises(NumericalError):
        assign_from_plan(np.array([[np.nan, 0.1]]))


def test_assign_relative_rule():
    T = np.array([[0.01, 0.0], [0.3, 0.1]])
    # a_tilde defaults to 1/2 per row: 0.01 < 0.06 * 0.5
    assert assign_from_plan(T, min_row_fraction=0.06) == [NEW, 0]
    assert assign_from_plan(T) == [0, 0]


@given(st.integers(0, 2**31), st.floats(1e-3, 1e3))
@settings(max_examples=50, deadline=None)
def test_assign_invariant_to_positive_rescaling(seed, s):
    T = np.random.default_rng(seed).uniform(size=(4, 3))
    assert assign_from_plan(T) == assign_from_plan(s * T)


def test_far_source_is_discovered():
    # one source close to a target, another far from everything
    prev = np.array([[1.0, 0.0], [0.0, 1.0]])
    new = np.array([[1.0, -1.0], [0.05, -0.02]])
    C = cost_matrix(new, prev, "cosine")
    cfg = UotConfig(min_row_fraction=0.06)
    plan = uot_solve(C, cfg=cfg)
    assert assign_from_plan(plan, cfg.mass_tol, cfg.min_row_fraction) == [0, NEW]
