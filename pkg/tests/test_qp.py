import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import enumerate_oracle, kkt_residual_oracle, pg_oracle, random_psd
from redcut.errors import ConfigError, ConvergenceError, DataError
from redcut.qp import (
    kkt_residual,
    project_simplex,
    rank_by_alpha,
    solve_simplex_qp,
    solve_theta_qp,
)


def test_frozen_two_variable_solution():
    # 0.5 a'Ia - s'a with s = (1, 0): unconstrained optimum (1, 0) is feasible
    sol = solve_simplex_qp(np.eye(2), np.array([1.0, 0.0]))
    np.testing.assert_allclose(sol.alpha, [1.0, 0.0], atol=1e-12)
    assert sol.objective == pytest.approx(-0.5)
    # interior optimum: a = (0.75, 0.25)
    sol = solve_simplex_qp(np.eye(2), np.array([0.5, 0.0]))
    np.testing.assert_allclose(sol.alpha, [0.75, 0.25], atol=1e-12)


def test_single_feature():
    sol = solve_simplex_qp(np.array([[2.0]]), np.array([1.0]))
    assert sol.alpha.tolist() == [1.0]
    assert sol.objective == 0.0


@pytest.mark.parametrize("seed", range(10))
def test_matches_oracles(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, 8))
    Q = random_psd(rng, m)
    s = rng.random(m)
    sol = solve_simplex_qp(Q, s)
    f_pg, _ = pg_oracle(Q, s)
    f_ex, _ = enumerate_oracle(Q, s)
    assert sol.objective == pytest.approx(f_pg, abs=1e-8)
    assert sol.objective == pytest.approx(f_ex, abs=1e-8)


@settings(max_examples=60, deadline=None)
@given(arrays(float, 7, elements=st.floats(-50, 50)))
def test_projection_is_feasible_and_idempotent(v):
    p = project_simplex(v)
    assert np.all(p >= 0)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(project_simplex(p), p, atol=1e-12)


def test_objective_monotone_and_feasible_along_path():
    rng = np.random.default_rng(11)
    Q = random_psd(rng, 30, ridge=0.01)
    s = rng.random(30)
    trace = []
    solve_simplex_qp(Q, s, callback=lambda it, a, f: trace.append((f, a.copy())))
    fs = [f for f, _ in trace]
    assert all(b <= a + 1e-12 for a, b in zip(fs, fs[1:]))
    for _, a in trace:
        assert a.min() >= 0 and abs(a.sum() - 1) <= 1e-10


def test_kkt_residual_matches_loop_version():
    rng = np.random.default_rng(3)
    for _ in range(20):
        m = int(rng.integers(2, 40))
        Q = random_psd(rng, m)
        s = rng.random(m)
        sol = solve_simplex_qp(Q, s)
        g = Q @ sol.alpha - s
        assert kkt_residual(sol.alpha, g) == pytest.approx(kkt_residual_oracle(sol.alpha, g), abs=1e-14)
        assert sol.kkt_residual <= 1e-7


def test_indefinite_q_still_converges():
    rng = np.random.default_rng(5)
    A = rng.normal(size=(20, 20))
    Q = 0.5 * (A + A.T)
    s = rng.random(20)
    sol = solve_simplex_qp(Q, s)
    assert sol.kkt_residual <= 1e-7
    assert abs(sol.alpha.sum() - 1) < 1e-12


def test_iteration_cap_raises_with_best_iterate():
    rng = np.random.default_rng(6)
    Q = random_psd(rng, 40, ridge=1e-3)
    s = rng.random(40)
    with pytest.raises(ConvergenceError) as info:
        solve_simplex_qp(Q, s, tol=1e-15, max_iter=1)
    assert info.value.alpha.sum() == pytest.approx(1.0)
    assert info.value.residual > 1e-15


def test_input_validation():
    with pytest.raises(DataError, match="symmetric"):
        solve_simplex_qp(np.array([[1.0, 0.5], [0.0, 1.0]]), np.ones(2))
    with pytest.raises(DataError):
        solve_simplex_qp(np.eye(2), np.ones(3))
    with pytest.raises(ConfigError):
        solve_theta_qp(np.eye(2), np.ones(2), 1.5)


def test_theta_one_is_max_relevance():
    s = np.array([0.2, 0.9, 0.4])
    sol = solve_theta_qp(np.ones((3, 3)), s, 1.0)
    assert rank_by_alpha(sol.alpha, s)[0] == 1


def test_rank_by_alpha_tie_breaks():
    alpha = np.array([0.0, 0.5, 1e-9, 0.5, 0.0])
    s = np.array([0.3, 0.1, 0.9, 0.1, 0.3])
    # equal weights -> index; zero weights (incl. 1e-9) -> relevance, then index
    assert rank_by_alpha(alpha, s) == [1, 3, 2, 0, 4]
