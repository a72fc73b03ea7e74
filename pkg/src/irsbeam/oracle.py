"""Ground-truth generators for tests: closed forms and exhaustive search.

Nothing here touches the phase-step relaxation; the exhaustive search only
reuses the beamforming step, and reports whether every inner solve was
certified rank-one (in which case its answer is the true discrete optimum).
"""
from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .beamforming_opt import BeamformingOptions, maxmin_given_phase, minimize_power_given_phase
from .channel_model import ChannelSet, PhaseProfile
from .errors import ConfigError, InfeasibleTargets, RandomizationFailed

MAX_COMBINATIONS = 4096


@dataclass(frozen=True)
class SingleUserOracle:
    power: float
    w: np.ndarray
    feasible: bool


def direct_channel_rows(channels: ChannelSet, phase: PhaseProfile, mu: int = 0) -> np.ndarray:
    """``h_b^H + sum_l h_l^H Phi_l H_l`` with explicit diagonal matrices."""
    rows = np.array(channels.bs_to_mu[mu], dtype=complex)
    for l, H in enumerate(channels.bs_to_irs):
        Phi = np.diag(phase.amplitudes[l] * np.exp(1j * phase.phases[l]))
        rows = rows + channels.irs_to_mu[l][mu] @ Phi @ H
    return rows


def single_user_power_oracle(channels: ChannelSet, phase: PhaseProfile, gamma: float,
                             sigma2: float) -> SingleUserOracle:
    """Matched-filter minimum power for one user served alone.

    With several receive antennas the best direction is the top eigenvector
    of the user's Gram matrix; with one antenna this is ``h / ||h||``.
    """
    rows = direct_channel_rows(channels, phase, 0)
    M = rows.shape[1]
    if rows.shape[0] == 1:
        h = rows[0].conj()
        gain = float(np.vdot(h, h).real)
        u = h / np.sqrt(gain) if gain > 0 else np.zeros(M, complex)
    else:
        lam, vec = np.linalg.eigh(rows.conj().T @ rows)
        gain, u = float(lam[-1]), vec[:, -1]
    if gain <= 0:
        return SingleUserOracle(float("inf"), np.zeros(M, complex), False)
    power = gamma * sigma2 / gain
    return SingleUserOracle(power, np.sqrt(power) * u, True)


def single_user_scalar_power(hb: complex, hr: complex, g: complex, gamma: float, sigma2: float,
                             beta: float = 1.0) -> float:
    """M = N = 1 closed form: ``gamma sigma^2 / (|hb| + beta |hr g|)^2`` at the aligned phase."""
    return gamma * sigma2 / (abs(hb) + beta * abs(hr * g)) ** 2


@dataclass
class DiscreteSearch:
    value: float | None
    phase: PhaseProfile | None
    feasible: bool
    certified: bool
    evaluated: int
    sdr_bound: float | None


def exhaustive_discrete_phase(scenario, jobs: int = 1, max_combinations: int = MAX_COMBINATIONS) -> DiscreteSearch:
    """Best phase profile on the discrete grid by full enumeration.

    For power problems ``value`` is the least power and ``sdr_bound`` the
    smallest relaxation bound over the grid; for max-min ``value`` is the
    largest level.  ``certified`` is true when every inner solve was rank
    one, i.e. ``value`` is the exact discrete optimum.
    """
    cons = scenario.constraints
    cfg = scenario.config
    if cons.tau is None:
        raise ConfigError("exhaustive search needs discrete phases", "constraints.tau")
    n = cfg.total_elements
    count = cons.tau ** n
    if count > max_combinations:
        raise ConfigError(f"{count} combinations exceed the cap of {max_combinations}", "constraints.tau")
    maxmin = scenario.options.problem == "maxmin_qos"
    amps = cons.split(cons.amplitudes(cfg.irs_sizes), cfg.irs_sizes)
    opts = BeamformingOptions(trials=scenario.options.trials, bisect_tol=scenario.options.bisect_tol,
                              tolerances=scenario.options.tolerances)
    beam = maxmin_given_phase if maxmin else minimize_power_given_phase

    def inner(ms):
        ph = PhaseProfile(amps, cons.split(2 * np.pi * np.asarray(ms, float) / cons.tau, cfg.irs_sizes),
                          cons.amplitude_mode, cons.tau)
        try:
            res = beam(scenario.channels, ph, cfg, opts, np.random.default_rng(0))
        except (InfeasibleTargets, RandomizationFailed):
            return ph, None, None, True
        return ph, res.achieved_value, res.sdr_lower_bound, res.rank1_exact

    combos = list(itertools.product(range(cons.tau), repeat=n))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(inner, combos))
    else:
        results = [inner(c) for c in combos]
    best, bound, certified = None, None, True
    for ph, val, lb, rank1 in results:
        certified &= bool(rank1)
        if val is None:
            continue
        if lb is not None:
            bound = lb if bound is None else min(bound, lb)
        if best is None or (val > best[0] if maxmin else val < best[0]):
            best = (val, ph)
    if best is None:
        return DiscreteSearch(None, None, False, certified, len(combos), bound)
    return DiscreteSearch(best[0], best[1], True, certified, len(combos), bound)
