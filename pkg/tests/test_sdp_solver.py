import io

import numpy as np
import pytest
from hypothesis import given, strategies as st

from helpers import make_config
from irsbeam.beamforming_opt import power_sdp, user_grams
from irsbeam.channel_model import PhaseProfile, all_composite_rows, generate_channels
from irsbeam.oracle import single_user_power_oracle
from irsbeam.sdp_solver import (SdpProblem, Tolerances, dump_triplets, feasibility, hermitian_real_embedding,
                                load_triplets, solve)


def _herm(rng, n):
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return A + A.conj().T


class TestEmbedding:
    def test_identity(self):
        np.testing.assert_array_equal(hermitian_real_embedding(np.eye(2)), np.eye(4))

    def test_pauli_y_spectrum(self):
        E = hermitian_real_embedding(np.array([[0, -1j], [1j, 0]]))
        np.testing.assert_allclose(np.linalg.eigvalsh(E), [-1, -1, 1, 1], atol=1e-15)

    def test_trace_identity(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            A, B = _herm(rng, 3), _herm(rng, 3)
            lhs = np.trace(hermitian_real_embedding(A) @ hermitian_real_embedding(B))
            assert lhs == pytest.approx(2 * np.real(np.trace(A @ B)), rel=1e-12)

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            hermitian_real_embedding(np.array([[0, 1], [0, 0]]))


class TestSolve:
    def test_trace_at_least_one(self):
        p = SdpProblem([2], {0: np.eye(2)})
        p.add({0: np.eye(2)}, ">=", 1.0)
        sol = solve(p)
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(1.0, abs=1e-7)

    def test_weighted_trace_kkt_point(self):
        p = SdpProblem([2], {0: np.eye(2)})
        p.add({0: np.diag([2.0, 1.0])}, ">=", 1.0)
        sol = solve(p)
        assert sol.objective == pytest.approx(0.5, abs=1e-7)
        np.testing.assert_allclose(sol.X[0], np.diag([0.5, 0.0]), atol=1e-6)

    def test_contradictory_equalities(self):
        p = SdpProblem([2], {}, sense="feasibility")
        p.add({0: np.eye(2)}, "=", 1.0)
        p.add({0: np.eye(2)}, "=", 2.0)
        assert solve(p).status == "infeasible"

    def test_maximize_eigenvalue(self):
        rng = np.random.default_rng(4)
        C = _herm(rng, 4)
        p = SdpProblem([4], {0: C}, sense="maximize")
        p.add({0: np.eye(4)}, "=", 1.0)
        sol = solve(p)
        assert sol.objective == pytest.approx(np.linalg.eigvalsh(C)[-1], abs=1e-7)
        assert np.linalg.matrix_rank(sol.X[0], tol=1e-4) == 1

    def test_unbounded_is_not_optimal(self):
        p = SdpProblem([2], {0: -np.eye(2)})
        p.add({0: np.eye(2)}, ">=", 1.0)
        assert solve(p).status != "optimal"

    def test_dimension_cap(self):
        p = SdpProblem([5], {0: np.eye(5)})
        p.add({0: np.eye(5)}, ">=", 1.0)
        with pytest.raises(ValueError):
            solve(p, Tolerances(max_dim=4))

    def test_non_hermitian_coefficients_rejected(self):
        p = SdpProblem([2], {0: np.eye(2)})
        p.add({0: np.array([[1.0, 1.0], [0.0, 1.0]])}, ">=", 1.0)
        with pytest.raises(ValueError):
            solve(p)

    @given(st.integers(0, 2**31 - 1), st.integers(1, 5))
    def test_certificates_on_random_problems(self, seed, n):
        rng = np.random.default_rng(seed)
        p = SdpProblem([n, 2], {0: np.eye(n), 1: np.eye(2)})
        for _ in range(3):
            G = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            p.add({0: G @ G.conj().T, 1: np.diag([1.0, 0.0])}, ">=", float(rng.uniform(0.5, 2)))
        sol = solve(p)
        assert sol.status == "optimal"
        assert sol.violation <= 1e-7
        assert sol.gap <= 1e-7 * (1 + abs(sol.objective))
        for X in sol.X:
            np.testing.assert_allclose(X, X.conj().T, atol=1e-12)
            assert np.linalg.eigvalsh(X)[0] >= -1e-9
        obj, _ = p.evaluate(sol.X)
        assert obj == pytest.approx(sol.objective, abs=1e-8)


class TestFeasibility:
    def test_nonnegative_trace(self):
        p = SdpProblem([2], {}, sense="feasibility")
        p.add({0: np.eye(2)}, ">=", 0.0)
        sol = feasibility(p)
        assert sol.status == "optimal"
        assert np.real(np.trace(sol.X[0])) >= -1e-9

    def test_unit_diagonal_gives_identity(self):
        p = SdpProblem([3], {}, sense="feasibility")
        for m in range(3):
            E = np.zeros((3, 3))
            E[m, m] = 1.0
            p.add({0: E}, "=", 1.0)
        sol = feasibility(p)
        assert sol.status == "optimal"
        np.testing.assert_allclose(sol.X[0], np.eye(3), atol=1e-6)

    def test_off_diagonal_beyond_psd_limit(self):
        p = SdpProblem([2], {}, sense="feasibility")
        p.add({0: np.diag([1.0, 0.0])}, "=", 1.0)
        p.add({0: np.diag([0.0, 1.0])}, "=", 1.0)
        p.add({0: np.array([[0, 0.5], [0.5, 0]])}, ">=", 1.5)
        sol = feasibility(p)
        assert sol.status == "infeasible"
        assert sol.phase1_slack < 0

    def test_feasible_point_meets_constraints(self):
        rng = np.random.default_rng(2)
        p = SdpProblem([3], {}, sense="feasibility")
        for _ in range(4):
            G = rng.standard_normal((3, 3))
            p.add({0: G @ G.T}, ">=", 1.0)
        p.add({0: np.eye(3)}, "<=", 50.0)
        sol = feasibility(p, slack_cap=None, trace_cap=None)
        _, lhs = p.evaluate(sol.X)
        assert sol.status == "optimal"
        assert np.all(lhs[:4] >= 1.0 - 1e-7)

    def test_satisfied_constant_row_is_ignored(self):
        p = SdpProblem([2], {}, sense="feasibility")
        p.add({0: np.zeros((2, 2))}, ">=", -1e-15)
        p.add({0: np.eye(2)}, "=", 2.0)
        sol = feasibility(p)
        assert sol.status == "optimal" and sol.violation <= 1e-7

    def test_violated_constant_row(self):
        p = SdpProblem([2], {}, sense="feasibility")
        p.add({0: np.zeros((2, 2))}, ">=", 1.0)
        p.add({0: np.eye(2)}, "=", 2.0)
        assert feasibility(p).status == "infeasible"


@given(st.integers(0, 2**31 - 1))
def test_relaxation_bounds_rank_one_power(seed):
    rng = np.random.default_rng(seed)
    cfg = make_config(int(rng.integers(1, 4)), [3], [[0]], gamma=float(rng.uniform(0.5, 2)))
    ch = generate_channels(cfg, seed=seed)
    ph = PhaseProfile.random([3], rng)
    sol = solve(power_sdp(user_grams(all_composite_rows(ch, ph)), cfg))
    oracle = single_user_power_oracle(ch, ph, cfg.sinr_targets[0], cfg.noise_powers[0])
    slack = 1e-7 * (1 + abs(sol.objective))
    assert sol.objective <= oracle.power + slack
    assert sol.objective == pytest.approx(oracle.power, abs=slack)


def test_triplet_round_trip():
    rng = np.random.default_rng(1)
    p = SdpProblem([3, 1], {0: _herm(rng, 3), 1: np.eye(1)}, sense="maximize")
    p.add({0: _herm(rng, 3)}, ">=", 0.25)
    p.add({0: np.eye(3), 1: np.eye(1)}, "=", 1.0)
    buf = io.StringIO()
    dump_triplets(p, buf)
    q = load_triplets(io.StringIO(buf.getvalue()))
    assert q.sense == p.sense and q.blocks == p.blocks
    for a, b in zip([p.objective] + [c.coeffs for c in p.constraints],
                    [q.objective] + [c.coeffs for c in q.constraints]):
        assert sorted(a) == sorted(b)
        for k in a:
            np.testing.assert_array_equal(np.asarray(a[k], complex), b[k])
    assert [(c.relation, c.rhs) for c in p.constraints] == [(c.relation, c.rhs) for c in q.constraints]
    assert solve(q).objective == pytest.approx(solve(p).objective, abs=1e-9)


def test_rejects_foreign_triplet_file():
    with pytest.raises(ValueError):
        load_triplets(io.StringIO("something else\n"))
