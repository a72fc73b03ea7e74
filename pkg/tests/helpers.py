"""Random instance factories shared by the test modules."""
import numpy as np

from irsbeam.alt_opt import AlgorithmOptions, Scenario
from irsbeam.channel_model import BeamformingSet, SystemConfig, generate_channels
from irsbeam.phase_opt import PhaseConstraints


def groups_for(traffic, K, rng=None):
    if traffic == "unicast" or K == 1:
        return [[i] for i in range(K)]
    if traffic == "broadcast":
        return [list(range(K))]
    cut = 1 + int(rng.integers(0, K - 1)) if rng is not None else K // 2
    return [list(range(cut)), list(range(cut, K))]


def make_config(M, irs_sizes, groups, Q=1, noise=0.1, gamma=1.0, P=1.0):
    K = sum(len(g) for g in groups)
    Q = [Q] * K if np.isscalar(Q) else list(Q)
    noise = [noise] * K if np.isscalar(noise) else list(noise)
    gamma = [gamma] * K if np.isscalar(gamma) else list(gamma)
    return SystemConfig(M, tuple(irs_sizes), tuple(tuple(g) for g in groups), tuple(Q), tuple(noise),
                        tuple(gamma), P)


def random_scenario(seed, problem="power_qos", K=None, M=None, N=None, traffic=None, tau=None, trials=1000,
                    **opts):
    rng = np.random.default_rng(seed)
    K = K or int(rng.integers(1, 5))
    M = M or int(rng.integers(1, 5))
    N = N or int(rng.integers(1, 9))
    traffic = traffic or ["unicast", "broadcast", "multicast"][int(rng.integers(0, 3))]
    groups = groups_for(traffic, K, rng)
    gamma = rng.uniform(0.5, 2.0, K)
    cfg = make_config(M, [N], groups, noise=0.1, gamma=gamma, P=1.0)
    ch = generate_channels(cfg, seed=int(rng.integers(0, 2**31)))
    return Scenario(cfg, ch, PhaseConstraints(tau=tau),
                    AlgorithmOptions(problem=problem, seed=seed, trials=trials, **opts))


def random_beams(M, g, rng):
    return BeamformingSet(rng.standard_normal((M, g)) + 1j * rng.standard_normal((M, g)))
