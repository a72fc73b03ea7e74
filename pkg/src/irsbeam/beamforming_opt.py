"""Transmit beamforming for fixed IRS phases.

Both subproblems are lifted to ``X_k = w_k w_k^H`` and relaxed to SDPs:

* power minimization: ``min sum_k tr X_k`` with
  ``tr(X_k H_i) >= gamma_i sigma_i^2 + gamma_i sum_{j != k} tr(X_j H_i)``;
* max-min fairness: bisection on ``t`` over the feasibility of the same
  constraints with ``gamma_i`` replaced by ``t gamma_i`` and
  ``sum_k tr X_k <= P``.

Rank-one beamformers are read off the principal eigenvectors when every
block is numerically rank one.  Otherwise Gaussian randomization proposes
beam directions and the power-control kernels assign powers to each
candidate.  The principal directions and, when supplied, the directions of
an incumbent beamformer are always part of the candidate pool, so the
recovered value never gets worse than the incumbent's.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .channel_model import BeamformingSet, ChannelSet, PhaseProfile, SystemConfig, all_composite_rows
from .errors import InfeasibleTargets, RandomizationFailed, SolverFailure
from .sdp_solver import SdpProblem, SdpSolution, Tolerances, feasibility, solve

log = logging.getLogger(__name__)

CHUNK = 256


@dataclass
class BeamformingOptions:
    trials: int = 1000
    rank_tol: float = 1e-6
    bisect_tol: float = 1e-4
    jobs: int = 1
    tolerances: Tolerances = field(default_factory=Tolerances)


@dataclass
class BeamformingResult:
    """Outcome of one beamforming step.

    ``sdr_lower_bound`` is the relaxation's minimum power (power problems);
    ``sdr_upper_bound`` is the bisection's upper bracket on ``t`` (max-min).
    ``recovery`` names how W was obtained: ``principal``, ``randomized``,
    ``incumbent`` or ``zero``.
    """

    W: BeamformingSet
    achieved_value: float
    rank1_exact: bool
    randomization_trials_used: int
    sdr_lower_bound: float | None = None
    sdr_upper_bound: float | None = None
    recovery: str = "principal"
    sdp: SdpSolution | None = None


def user_grams(rows: list) -> list:
    out = []
    for R in rows:
        G = R.conj().T @ R
        out.append(0.5 * (G + G.conj().T))
    return out


def power_sdp(grams: list, config: SystemConfig, t_scale: float = 1.0, budget: float | None = None) -> SdpProblem:
    """SDR of the SINR constraints at level ``t_scale``.

    Without ``budget`` the objective is total power; with it the problem is
    a feasibility problem carrying ``sum_k tr X_k <= budget``.
    """
    M = grams[0].shape[0]
    g = config.num_groups
    grp = config.group_of
    blocks = [M] * g
    eye = np.eye(M)
    if budget is None:
        prob = SdpProblem(blocks, {k: eye for k in range(g)}, [], "minimize")
    else:
        prob = SdpProblem(blocks, {}, [], "feasibility")
    for i, H in enumerate(grams):
        tg = t_scale * config.sinr_targets[i]
        coeffs = {j: (H if j == grp[i] else -tg * H) for j in range(g)}
        prob.add(coeffs, ">=", tg * config.noise_powers[i])
    if budget is not None:
        prob.add({k: eye for k in range(g)}, "<=", budget)
    return prob


def _gains(rows: list, U: np.ndarray) -> np.ndarray:
    """``gains[z, i, j] = |R_i u_{z,j}|^2`` for directions ``U`` (Z x g x M)."""
    return np.stack([np.sum(np.abs(np.einsum("qm,zjm->zqj", R, U)) ** 2, axis=1) for R in rows], axis=1)


def _evaluate(rows, U, config, budget, jobs):
    """Power-control every candidate; returns (p, value) with value = power or t."""
    gamma = np.asarray(config.sinr_targets, float)
    sigma2 = np.asarray(config.noise_powers, float)
    grp = config.group_of

    def run(chunk):
        G = _gains(rows, chunk)
        if budget is None:
            p, ok = kernels.min_power_batch(G, gamma, sigma2, grp)
            return p, np.where(ok, p.sum(axis=1), np.inf)
        return kernels.maxmin_power_batch(G, gamma, sigma2, grp, budget)

    parts = map_chunks(run, U, jobs)
    return np.concatenate([p for p, _ in parts]), np.concatenate([v for _, v in parts])


def map_chunks(fn, rows, jobs: int = 1, chunk: int = CHUNK) -> list:
    """Apply ``fn`` to fixed-size row chunks, in order.

    Chunk boundaries do not depend on ``jobs``, so the arithmetic (and hence
    every bit of the result) is the same for any thread count.
    """
    pieces = [rows[a:a + chunk] for a in range(0, rows.shape[0], chunk)]
    if jobs <= 1 or len(pieces) == 1:
        return [fn(x) for x in pieces]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, pieces))


def _principal(X: np.ndarray, rank_tol: float):
    lam, vec = np.linalg.eigh(0.5 * (X + X.conj().T))
    l1 = max(float(lam[-1]), 0.0)
    l2 = max(float(lam[-2]), 0.0) if lam.size > 1 else 0.0
    return l1, vec[:, -1], (l1 == 0.0 or l2 <= rank_tol * l1)


def _unit(v):
    n = np.linalg.norm(v)
    return v / n if n > 0 else v


def _draw_directions(Xs, trials, rng):
    """``trials`` x g x M unit directions drawn from CN(0, X_k)."""
    g = len(Xs)
    M = Xs[0].shape[0]
    r = rng.standard_normal((trials, g, M, 2))
    r = (r[..., 0] + 1j * r[..., 1]) / np.sqrt(2.0)
    U = np.empty((trials, g, M), complex)
    for k, X in enumerate(Xs):
        lam, vec = np.linalg.eigh(0.5 * (X + X.conj().T))
        root = vec * np.sqrt(np.clip(lam, 0.0, None))
        U[:, k] = r[:, k] @ root.T
    nrm = np.linalg.norm(U, axis=2, keepdims=True)
    return np.divide(U, nrm, out=np.zeros_like(U), where=nrm > 0)


def _recover(Xs, rows, config, options, rng, incumbent, budget):
    """Pick beam directions and powers; returns (W, value, rank1, used, how)."""
    pr = [_principal(X, options.rank_tol) for X in Xs]
    rank1 = all(ok for _, _, ok in pr)
    base = np.array([[_unit(u) for _, u, _ in pr]])
    pool = [base]
    labels = ["principal"]
    used = 0
    if not rank1 and options.trials > 0:
        used = int(options.trials)
        pool.insert(0, _draw_directions(Xs, used, rng))
        labels.insert(0, "randomized")
    if incumbent is not None and incumbent.total_power() > 0:
        pool.append(np.array([[_unit(w) for w in incumbent.vectors]]))
        labels.append("incumbent")
    U = np.concatenate(pool, axis=0)
    p, value = _evaluate(rows, U, config, budget, options.jobs)
    if budget is not None and labels[-1] == "incumbent":
        # the incumbent as given, so bisection tolerance never costs it level
        own = np.sum(np.abs(incumbent.W) ** 2, axis=0)
        scale = min(1.0, budget / own.sum()) if own.sum() > 0 else 0.0
        p_own = own * scale
        t_own = kernels.scaled_sinr_batch(_gains(rows, U[-1:]), p_own[None], np.asarray(config.sinr_targets, float),
                                          np.asarray(config.noise_powers, float), config.group_of)[0]
        if t_own > value[-1]:
            p[-1], value[-1] = p_own, t_own
    if budget is None:
        best = int(np.argmin(value))
        ok = np.isfinite(value[best])
    else:
        best = int(np.argmax(value))
        ok = True
    if not ok:
        return None, float("inf"), rank1, used, "none"
    sizes = np.cumsum([len(x) for x in pool])
    how = labels[int(np.searchsorted(sizes, best, side="right"))]
    W = BeamformingSet(U[best].T * np.sqrt(p[best])[None, :])
    return W, float(value[best]), rank1, used, how


def _solve_or_raise(prob, tol):
    sol = solve(prob, tol)
    if sol.status == "infeasible":
        raise InfeasibleTargets("SINR targets infeasible for the relaxation", sol)
    if sol.status != "optimal":
        check = feasibility(prob, tol, slack_cap=1.0)
        if check.status == "infeasible":
            raise InfeasibleTargets("SINR targets infeasible for the relaxation", check)
        raise SolverFailure(f"SDP solver stopped with status {sol.status}: {sol.message}", sol)
    return sol


def minimize_power_given_phase(channels: ChannelSet, phase: PhaseProfile, config: SystemConfig,
                               options: BeamformingOptions | None = None, rng=None,
                               incumbent: BeamformingSet | None = None, path: str = "general") -> BeamformingResult:
    """Least-power beamformers meeting every SINR target at fixed ``phase``.

    Raises
    ------
    InfeasibleTargets
        The relaxation is infeasible, so no beamformer exists.
    RandomizationFailed
        The relaxation is feasible but no candidate could be made feasible.
    """
    options = options or BeamformingOptions()
    rng = rng if rng is not None else np.random.default_rng(0)
    rows = all_composite_rows(channels, phase, path)
    grams = user_grams(rows)
    sol = _solve_or_raise(power_sdp(grams, config), options.tolerances)
    W, value, rank1, used, how = _recover(sol.X, rows, config, options, rng, incumbent, None)
    if W is None:
        raise RandomizationFailed("no feasible beamformer recovered from the relaxation", sol.objective)
    return BeamformingResult(W, value, rank1, used, sdr_lower_bound=sol.objective, recovery=how, sdp=sol)


def _achieved_t(Xs, grams, config):
    grp = config.group_of
    t = np.inf
    for i, H in enumerate(grams):
        pw = [float(np.real(np.sum(H * X.T))) for X in Xs]
        sig = pw[grp[i]]
        den = config.sinr_targets[i] * (sum(pw) - sig + config.noise_powers[i])
        t = min(t, sig / den if den > 0 else 0.0)
    return max(t, 0.0)


def maxmin_given_phase(channels: ChannelSet, phase: PhaseProfile, config: SystemConfig,
                       options: BeamformingOptions | None = None, rng=None,
                       incumbent: BeamformingSet | None = None, path: str = "general") -> BeamformingResult:
    """Beamformers maximizing ``min_i SINR_i / gamma_i`` under the power budget.

    Bisection keeps ``t_low`` relaxation-feasible and ``t_high`` infeasible
    and stops once ``t_high - t_low <= bisect_tol * t_low``.
    """
    options = options or BeamformingOptions()
    rng = rng if rng is not None else np.random.default_rng(0)
    P = float(config.power_budget)
    rows = all_composite_rows(channels, phase, path)
    grams = user_grams(rows)
    M = grams[0].shape[0]
    g = config.num_groups
    gamma = np.asarray(config.sinr_targets, float)
    sigma2 = np.asarray(config.noise_powers, float)
    lmax = np.array([np.linalg.eigvalsh(H)[-1] for H in grams])
    t_high = float(np.max(P * np.clip(lmax, 0.0, None) / (gamma * sigma2))) if P > 0 else 0.0
    if t_high <= 0.0:
        return BeamformingResult(BeamformingSet.zeros(M, g), 0.0, True, 0, sdr_upper_bound=0.0, recovery="zero")
    tol = options.tolerances
    t_low, X_low, sol_low = 0.0, None, None
    floor = 1e-12 * t_high
    for _ in range(200):
        if t_high - t_low <= options.bisect_tol * t_low or t_high <= floor:
            break
        t_mid = 0.5 * (t_low + t_high)
        sol = feasibility(power_sdp(grams, config, t_mid, P), tol, slack_cap=None, trace_cap=None)
        if sol.status == "optimal":
            Xs = sol.X
            tr = sum(float(np.real(np.trace(X))) for X in Xs)
            if tr > P:
                Xs = [X * (P / tr) for X in Xs]
            t_low = max(t_mid, min(_achieved_t(Xs, grams, config), t_high))
            X_low, sol_low = Xs, sol
        elif sol.status == "infeasible":
            t_high = t_mid
        else:
            raise SolverFailure(f"bisection feasibility SDP stopped with status {sol.status}: {sol.message}", sol)
    if X_low is None:
        return BeamformingResult(BeamformingSet.zeros(M, g), 0.0, True, 0, sdr_upper_bound=t_high, recovery="zero")
    W, value, rank1, used, how = _recover(X_low, rows, config, options, rng, incumbent, P)
    log.debug("max-min bracket [%.6g, %.6g], recovered t=%.6g via %s", t_low, t_high, value, how)
    return BeamformingResult(W, value, rank1, used, sdr_lower_bound=None, sdr_upper_bound=t_high,
                             recovery=how, sdp=sol_low)


def extract_rank_one(X, grams=None, sinr_targets=None, noise_powers=None, trials: int = 1000,
                     rng=None, rank_tol: float = 1e-6) -> np.ndarray:
    """Rank-one vector for a single lifted beamformer ``X``.

    With no SINR context this is ``sqrt(lambda_1) u_1``.  Given the user
    grams, targets and noise of a single group, randomized directions are
    also tried and each is scaled to the least power meeting every target;
    the cheapest vector wins.
    """
    X = np.asarray(X, complex)
    if not np.any(X):
        return np.zeros(X.shape[0], complex)
    l1, u, rank1 = _principal(X, rank_tol)
    if grams is None or rank1:
        return np.sqrt(l1) * u
    gamma = np.asarray(sinr_targets, float)
    sigma2 = np.asarray(noise_powers, float)
    rng = rng if rng is not None else np.random.default_rng(0)
    U = np.concatenate([_draw_directions([X], trials, rng), u[None, None, :]], axis=0)
    gains = np.stack([np.real(np.einsum("zjm,mn,zjn->zj", U.conj(), H, U)) for H in grams], axis=1)
    p, ok = kernels.min_power_batch(gains, gamma, sigma2, np.zeros(len(grams), np.intp))
    cost = np.where(ok, p[:, 0], np.inf)
    best = int(np.argmin(cost))
    if not np.isfinite(cost[best]):
        raise RandomizationFailed("no direction reaches the targets", None)
    return np.sqrt(p[best, 0]) * U[best, 0]
