import numpy as np
import pytest
from hypothesis import given, strategies as st

from helpers import make_config, random_scenario
from irsbeam.alt_opt import AlgorithmOptions, Scenario, solve
from irsbeam.channel_model import BeamformingSet, ChannelSet, PhaseProfile, generate_channels
from irsbeam.errors import ConfigError
from irsbeam.oracle import exhaustive_discrete_phase, single_user_power_oracle, single_user_scalar_power
from irsbeam.phase_opt import PhaseConstraints
from irsbeam.sinr_metrics import evaluate


def _direct_only(h):
    h = np.atleast_2d(np.asarray(h, complex))
    M = h.shape[1]
    return ChannelSet([np.zeros((1, M))], [[np.zeros((h.shape[0], 1))]], [h])


class TestSingleUser:
    def test_unit_channel(self):
        out = single_user_power_oracle(_direct_only([1.0, 0.0]), PhaseProfile.uniform([1]), 1.0, 1.0)
        assert out.power == 1.0
        np.testing.assert_allclose(np.abs(out.w), [1.0, 0.0])

    def test_inverse_square_in_channel(self):
        h = np.array([0.3 + 0.1j, -1.0, 0.5j])
        a = single_user_power_oracle(_direct_only(h), PhaseProfile.uniform([1]), 2.0, 0.5).power
        b = single_user_power_oracle(_direct_only(2 * h), PhaseProfile.uniform([1]), 2.0, 0.5).power
        assert b == pytest.approx(a / 4, rel=1e-15)

    @given(st.integers(0, 2**31 - 1), st.integers(1, 2))
    def test_target_met_with_equality(self, seed, Q):
        rng = np.random.default_rng(seed)
        cfg = make_config(3, [2], [[0]], Q=Q, gamma=1.7, noise=0.3)
        ch = generate_channels(cfg, seed=seed)
        ph = PhaseProfile.random([2], rng)
        out = single_user_power_oracle(ch, ph, 1.7, 0.3)
        sinr = evaluate(ch, ph, BeamformingSet(out.w[:, None]), cfg).sinr[0]
        assert sinr == pytest.approx(1.7, rel=1e-12)

    def test_dead_channel(self):
        out = single_user_power_oracle(_direct_only([0.0, 0.0]), PhaseProfile.uniform([1]), 1.0, 1.0)
        assert not out.feasible and out.power == np.inf

    def test_scalar_alignment(self):
        assert single_user_scalar_power(1.0, 2.0, 3.0j, 1.0, 0.5) == pytest.approx(0.5 / 49)


class TestExhaustive:
    def test_single_element_binary_count(self):
        scn = random_scenario(0, K=1, M=2, N=1, tau=2)
        out = exhaustive_discrete_phase(scn)
        assert out.evaluated == 2 and out.feasible and out.certified

    def test_all_infeasible(self):
        cfg = make_config(1, [1], [[0], [1], [2]], gamma=50.0)
        scn = Scenario(cfg, generate_channels(cfg, seed=0), PhaseConstraints(tau=2))
        out = exhaustive_discrete_phase(scn)
        assert not out.feasible and out.value is None and out.phase is None

    def test_needs_discrete_phases(self):
        with pytest.raises(ConfigError):
            exhaustive_discrete_phase(random_scenario(0, K=1, M=2, N=2))

    def test_combination_cap(self):
        with pytest.raises(ConfigError):
            exhaustive_discrete_phase(random_scenario(0, K=1, M=2, N=8, tau=4), max_combinations=100)

    @pytest.mark.parametrize("seed", range(5))
    def test_alternation_never_beats_enumeration(self, seed):
        scn = random_scenario(100 + seed, K=2, M=2, N=2, traffic="unicast", tau=2)
        rep = solve(scn)
        out = exhaustive_discrete_phase(scn)
        assert out.certified
        if rep.objective is not None:
            assert rep.objective >= out.value - 1e-6
            assert out.value >= out.sdr_bound - 1e-6

    def test_thread_count_irrelevant(self):
        scn = random_scenario(3, K=2, M=2, N=3, traffic="unicast", tau=2)
        a = exhaustive_discrete_phase(scn, jobs=1)
        b = exhaustive_discrete_phase(scn, jobs=4)
        assert (a.value, a.sdr_bound, a.evaluated) == (b.value, b.sdr_bound, b.evaluated)
        np.testing.assert_array_equal(a.phase.stacked_reflection(), b.phase.stacked_reflection())

    def test_maxmin_enumeration_picks_largest(self):
        scn = random_scenario(4, "maxmin_qos", K=1, M=2, N=2, tau=2, trials=100)
        out = exhaustive_discrete_phase(scn)
        rep = solve(Scenario(scn.config, scn.channels, scn.constraints,
                             AlgorithmOptions(problem="maxmin_qos", trials=100)))
        assert rep.objective <= out.value * (1 + 1e-9)
