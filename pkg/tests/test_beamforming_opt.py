import numpy as np
import pytest
from hypothesis import given, strategies as st

from helpers import make_config
from irsbeam.beamforming_opt import (BeamformingOptions, extract_rank_one, maxmin_given_phase,
                                     minimize_power_given_phase, power_sdp, user_grams)
from irsbeam.channel_model import PhaseProfile, all_composite_rows, effective_gram, generate_channels
from irsbeam.errors import InfeasibleTargets
from irsbeam.sdp_solver import feasibility
from irsbeam.sinr_metrics import evaluate


def _setup(seed, M=3, groups=((0,),), Q=1, gamma=1.0, noise=0.1, P=1.0, N=3):
    rng = np.random.default_rng(seed)
    cfg = make_config(M, [N], [list(g) for g in groups], Q=Q, gamma=gamma, noise=noise, P=P)
    ch = generate_channels(cfg, seed=seed)
    return cfg, ch, PhaseProfile.random([N], rng)


def _groups(kind, K):
    return {"unicast": [[i] for i in range(K)], "broadcast": [list(range(K))],
            "multicast": [list(range(K - 1)), [K - 1]] if K > 1 else [[0]]}[kind]


class TestPowerStep:
    @pytest.mark.parametrize("Q", [1, 2])
    def test_single_user_matched_filter(self, Q):
        cfg, ch, ph = _setup(3, Q=Q, gamma=2.0)
        res = minimize_power_given_phase(ch, ph, cfg)
        G = effective_gram(ch, ph, 0)
        lam, vec = np.linalg.eigh(G)
        assert res.achieved_value == pytest.approx(2.0 * 0.1 / lam[-1], rel=1e-6)
        w = res.W.W[:, 0]
        assert abs(np.vdot(vec[:, -1], w)) / np.linalg.norm(w) == pytest.approx(1.0, abs=1e-6)
        assert res.rank1_exact

    def test_vanishing_targets(self):
        cfg, ch, ph = _setup(5, groups=((0,), (1,)), gamma=1e-9)
        res = minimize_power_given_phase(ch, ph, cfg)
        assert res.achieved_value < 1e-7
        assert res.W.total_power() < 1e-7

    def test_unreachable_targets_raise(self):
        cfg, ch, ph = _setup(1, M=1, groups=((0,), (1,), (2,)), gamma=10.0)
        with pytest.raises(InfeasibleTargets):
            minimize_power_given_phase(ch, ph, cfg)

    def test_unicast_equals_singleton_multicast_sdp(self):
        cfg, ch, ph = _setup(2, groups=((0,), (1,), (2,)))
        grams = user_grams(all_composite_rows(ch, ph))
        a = power_sdp(grams, cfg)
        b = power_sdp(grams, cfg.replace(groups=((0,), (1,), (2,))))
        assert len(a.constraints) == len(b.constraints)
        for x, y in zip(a.constraints, b.constraints):
            assert x.relation == y.relation and x.rhs == y.rhs
            for k in x.coeffs:
                np.testing.assert_array_equal(x.coeffs[k], y.coeffs[k])

    @given(st.integers(0, 2**31 - 1), st.sampled_from(["unicast", "broadcast", "multicast"]),
           st.integers(1, 3), st.integers(1, 2))
    def test_feasible_and_above_relaxation(self, seed, kind, K, Q):
        cfg, ch, ph = _setup(seed, M=3, groups=_groups(kind, K), Q=Q, gamma=0.5)
        res = minimize_power_given_phase(ch, ph, cfg, BeamformingOptions(trials=200),
                                         np.random.default_rng(seed))
        rep = evaluate(ch, ph, res.W, cfg)
        assert min(np.array(rep.constraint_slacks) / 0.5) >= -1e-6
        assert res.achieved_value >= res.sdr_lower_bound - 1e-7 * (1 + res.sdr_lower_bound)
        assert res.achieved_value == pytest.approx(res.W.total_power(), rel=1e-12)

    @given(st.integers(0, 2**31 - 1), st.sampled_from([0.5, 2.0, 10.0]))
    def test_noise_homogeneity(self, seed, c):
        cfg, ch, ph = _setup(seed, groups=((0,), (1,)))
        base = minimize_power_given_phase(ch, ph, cfg, rng=np.random.default_rng(0)).achieved_value
        scaled_cfg = cfg.replace(noise_powers=tuple(c * s for s in cfg.noise_powers))
        scaled = minimize_power_given_phase(ch, ph, scaled_cfg, rng=np.random.default_rng(0)).achieved_value
        assert scaled == pytest.approx(c * base, rel=1e-5)

    def test_incumbent_never_beaten_by_worse_candidate(self):
        cfg, ch, ph = _setup(9, groups=((0, 1), (2, 3)), N=4)
        first = minimize_power_given_phase(ch, ph, cfg, BeamformingOptions(trials=50), np.random.default_rng(1))
        again = minimize_power_given_phase(ch, ph, cfg, BeamformingOptions(trials=5), np.random.default_rng(2),
                                           incumbent=first.W)
        assert again.achieved_value <= first.achieved_value * (1 + 1e-12)


class TestMaxMinStep:
    @pytest.mark.parametrize("Q", [1, 2])
    def test_single_user_closed_form(self, Q):
        cfg, ch, ph = _setup(4, Q=Q, gamma=1.5, P=2.0)
        res = maxmin_given_phase(ch, ph, cfg)
        lam = np.linalg.eigvalsh(effective_gram(ch, ph, 0))[-1]
        assert res.achieved_value == pytest.approx(2.0 * lam / (1.5 * 0.1), rel=1e-6)
        assert res.W.total_power() == pytest.approx(2.0, rel=1e-9)

    def test_zero_budget(self):
        cfg, ch, ph = _setup(4, groups=((0,), (1,)), P=0.0)
        res = maxmin_given_phase(ch, ph, cfg)
        assert res.achieved_value == 0.0
        assert res.W.total_power() == 0.0

    @pytest.mark.parametrize("seed", range(3))
    def test_single_group_linear_in_budget(self, seed):
        cfg, ch, ph = _setup(seed, groups=((0, 1, 2),))
        t1 = maxmin_given_phase(ch, ph, cfg, rng=np.random.default_rng(0)).achieved_value
        t2 = maxmin_given_phase(ch, ph, cfg.replace(power_budget=2.0), rng=np.random.default_rng(0)).achieved_value
        assert t2 == pytest.approx(2 * t1, rel=2e-3)

    @given(st.integers(0, 2**31 - 1), st.sampled_from(["unicast", "broadcast", "multicast"]))
    def test_bracket_and_feasibility(self, seed, kind):
        cfg, ch, ph = _setup(seed, groups=_groups(kind, 3), gamma=1.0)
        opts = BeamformingOptions(trials=200)
        res = maxmin_given_phase(ch, ph, cfg, opts, np.random.default_rng(seed))
        grams = user_grams(all_composite_rows(ch, ph))
        t_high = res.sdr_upper_bound
        assert feasibility(power_sdp(grams, cfg, t_high, cfg.power_budget), slack_cap=None,
                           trace_cap=None).status == "infeasible"
        assert res.achieved_value <= t_high
        rep = evaluate(ch, ph, res.W, cfg)
        assert rep.total_power <= cfg.power_budget * (1 + 1e-8)
        assert rep.min_scaled_sinr == pytest.approx(res.achieved_value, rel=1e-9)


class TestExtractRankOne:
    def test_exact_rank_one(self):
        v = np.array([1 + 2j, -0.5, 0.3j])
        w = extract_rank_one(np.outer(v, v.conj()))
        phase = np.vdot(w, v) / abs(np.vdot(w, v))
        np.testing.assert_allclose(w * phase, v, atol=1e-12)

    def test_identity_principal(self):
        w = extract_rank_one(np.eye(2))
        assert np.linalg.norm(w) == pytest.approx(1.0, rel=1e-14)

    def test_zero_matrix(self):
        assert not np.any(extract_rank_one(np.zeros((3, 3))))

    @pytest.mark.parametrize("seed", range(5))
    def test_randomized_against_direction_grid(self, seed):
        # X = I_2 has no preferred direction, so only randomization can find a good one
        rng = np.random.default_rng(seed)
        H = [np.outer(h, h.conj()) for h in rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))]
        gamma, sigma2 = np.ones(3), np.full(3, 0.1)
        w = extract_rank_one(np.eye(2), H, gamma, sigma2, trials=1000, rng=np.random.default_rng(0))
        power = np.vdot(w, w).real
        a, b = np.meshgrid(np.arange(0, np.pi / 2, 0.01), np.arange(0, 2 * np.pi, 0.01), indexing="ij")
        U = np.stack([np.cos(a).ravel(), (np.sin(a) * np.exp(1j * b)).ravel()], axis=1)
        gains = np.stack([np.real(np.einsum("zm,mn,zn->z", U.conj(), Hi, U)) for Hi in H], axis=1)
        grid = np.min(np.max(gamma * sigma2 / gains, axis=1))
        assert grid * 0.999 <= power <= grid * 1.02
        sinr = np.array([np.real(np.vdot(w, Hi @ w)) for Hi in H]) / sigma2
        assert np.all(sinr >= gamma * (1 - 1e-9))
