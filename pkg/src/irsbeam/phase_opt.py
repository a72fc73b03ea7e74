"""IRS phase step for fixed beamformers.

With ``phi`` the conjugate of the stacked reflection coefficients, the
signal of beam ``k`` at antenna ``q`` of user ``i`` is ``b + phi^H a`` where
``a = diag(h_{l,i,q}^H) H_{b,l} w_k`` (stacked over IRSs) and
``b = h_{b,i,q}^H w_k``.  Lifting ``v = [phi; 1]``, ``V = v v^H`` gives

    |b + phi^H a|^2 = tr(A V) + |b|^2,   A = [[a a^H, a conj(b)], [b a^H, 0]]

so every SINR constraint is linear in ``V``.  The SDP over ``V`` is solved in
either a pure feasibility form (maximize the smallest slack) or the residual
form (maximize the sum of per-user residuals), then Gaussian randomization
turns ``V`` into candidate phase vectors.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .beamforming_opt import map_chunks
from .channel_model import BeamformingSet, ChannelSet, PhaseProfile, SystemConfig
from .errors import ConfigError, SolverFailure
from .sdp_solver import SdpProblem, Tolerances, feasibility, solve

log = logging.getLogger(__name__)

ACCEPT_TOL = 1e-12


@dataclass(frozen=True)
class PhaseConstraints:
    """Allowed reflection coefficients.

    ``beta`` holds the stacked fixed amplitudes (``fixed_values``); it is
    ignored in the other modes.
    """

    amplitude_mode: str = "fixed_unit"
    tau: int | None = None
    beta: tuple | None = None

    def amplitudes(self, irs_sizes) -> np.ndarray:
        n = int(sum(irs_sizes))
        if self.amplitude_mode == "fixed_values":
            if self.beta is None or len(self.beta) != n:
                raise ConfigError(f"expected {n} amplitude values", "constraints.beta")
            return np.asarray(self.beta, float)
        return np.ones(n)

    def split(self, stacked, irs_sizes):
        return np.split(np.asarray(stacked), np.cumsum(irs_sizes)[:-1])

    def random_profile(self, irs_sizes, rng) -> PhaseProfile:
        amps = self.split(self.amplitudes(irs_sizes), irs_sizes)
        return PhaseProfile.random(irs_sizes, rng, self.amplitude_mode, self.tau, amps)


@dataclass
class PhaseCoupling:
    """Per-user vectors ``a[i]`` (Q_i x g x N) and scalars ``b[i]`` (Q_i x g)."""

    a: list
    b: list

    @property
    def size(self) -> int:
        return self.a[0].shape[2] + 1

    def matrix(self, i: int, q: int, k: int) -> np.ndarray:
        """``A_{i,q}(w_k)``, Hermitian with a zero bottom-right entry."""
        a = self.a[i][q, k]
        b = self.b[i][q, k]
        n = a.shape[0]
        A = np.zeros((n + 1, n + 1), complex)
        A[:n, :n] = np.outer(a, a.conj())
        A[:n, n] = a * np.conj(b)
        A[n, :n] = b * a.conj()
        return A

    def constant(self, i: int, q: int, k: int) -> float:
        return float(np.abs(self.b[i][q, k]) ** 2)

    def powers(self, phi: np.ndarray) -> np.ndarray:
        """Received powers ``P[z, i, k]`` for candidate rows ``phi`` (Z x N)."""
        phi = np.atleast_2d(phi)
        out = np.empty((phi.shape[0], len(self.a), self.a[0].shape[1]))
        for i, (a, b) in enumerate(zip(self.a, self.b)):
            y = np.einsum("zn,qkn->zqk", phi.conj(), a) + b[None]
            out[:, i] = np.sum(np.abs(y) ** 2, axis=1)
        return out


def build_coupling(channels: ChannelSet, W: BeamformingSet, config: SystemConfig) -> PhaseCoupling:
    """Coupling data for any number of IRSs and receive antennas."""
    a, b = [], []
    HW = [H @ W.W for H in channels.bs_to_irs]  # N_l x g
    for i in range(len(channels.bs_to_mu)):
        parts = [channels.irs_to_mu[l][i][:, None, :] * HW[l].T[None, :, :] for l in range(len(HW))]
        a.append(np.concatenate(parts, axis=2))
        b.append(channels.bs_to_mu[i] @ W.W)
    return PhaseCoupling(a, b)


def build_coupling_single(channels: ChannelSet, W: BeamformingSet, config: SystemConfig) -> PhaseCoupling:
    """Coupling data for one IRS and single-antenna users."""
    if len(channels.bs_to_irs) != 1 or any(h.shape[0] != 1 for h in channels.bs_to_mu):
        raise ValueError("single-IRS, single-antenna form only")
    HW = channels.bs_to_irs[0] @ W.W
    a = [channels.irs_to_mu[0][i][:, None, :] * HW.T[None, :, :] for i in range(len(channels.bs_to_mu))]
    b = [h @ W.W for h in channels.bs_to_mu]
    return PhaseCoupling(a, b)


def _lifted_row(a, b, weights):
    """sum over (q, k) of weights[k] * A_{i,q}(w_k) for one user."""
    n = a.shape[2]
    S = np.einsum("k,qkn,qkm->nm", weights, a, a.conj())
    col = np.einsum("k,qkn,qk->n", weights, a, b.conj())
    A = np.zeros((n + 1, n + 1), complex)
    A[:n, :n] = 0.5 * (S + S.conj().T)
    A[:n, n] = col
    A[n, :n] = col.conj()
    return A


def phase_sdp(coupling: PhaseCoupling, config: SystemConfig, constraints: PhaseConstraints,
              t_scale: float = 1.0, variant: str = "feasibility") -> SdpProblem:
    n = coupling.size
    N = n - 1
    grp = config.group_of
    g = config.num_groups
    K = config.num_mus
    if variant == "residual":
        blocks = [n] + [1] * K
        prob = SdpProblem(blocks, {1 + i: -np.ones((1, 1)) for i in range(K)}, [], "minimize")
    elif variant == "feasibility":
        prob = SdpProblem([n], {}, [], "feasibility")
    else:
        raise ValueError(f"unknown variant {variant!r}")
    for i in range(K):
        k = grp[i]
        tg = t_scale * config.sinr_targets[i]
        weights = np.full(g, -tg)
        weights[k] = 1.0
        const = np.sum(np.abs(coupling.b[i]) ** 2, axis=0)  # per beam
        rhs = tg * (config.noise_powers[i] + const.sum() - const[k]) - const[k]
        coeffs = {0: _lifted_row(coupling.a[i], coupling.b[i], weights)}
        if variant == "residual":
            coeffs[1 + i] = -np.ones((1, 1))
        prob.add(coeffs, ">=", rhs)
    amps = constraints.amplitudes(config.irs_sizes)
    for m in range(n):
        E = np.zeros((n, n))
        E[m, m] = 1.0
        if m == N:
            prob.add({0: E}, "=", 1.0)
        elif constraints.amplitude_mode == "free_unit_interval":
            prob.add({0: E}, "<=", 1.0)
            prob.add({0: E}, ">=", 0.0)
        else:
            prob.add({0: E}, "=", float(amps[m]) ** 2)
    return prob


def gaussian_randomize(V: np.ndarray, trials: int, rng, beta) -> tuple:
    """Candidate lifted phase vectors drawn around ``V``.

    Each trial draws ``v = U Lambda^(1/2) r`` with ``r ~ CN(0, I)``, divides by
    the last entry, keeps the leading entries and sets their magnitudes to
    ``beta`` (entries that are exactly zero get phase 0).  Trials whose last
    entry vanishes are redrawn.  Returns ``(candidates, redraws)``.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    V = np.asarray(V, complex)
    n = V.shape[0]
    lam, U = np.linalg.eigh(0.5 * (V + V.conj().T))
    # eigenvalues at rounding level would only add noise to the draws
    lam = np.where(lam > n * np.finfo(float).eps * max(lam[-1], 0.0), lam, 0.0)
    root = U * np.sqrt(lam)

    def draw(count):
        r = rng.standard_normal((count, n, 2))
        return ((r[..., 0] + 1j * r[..., 1]) / np.sqrt(2.0)) @ root.T

    v = draw(trials)
    redraws = 0
    scale = np.sqrt(max(np.real(np.trace(V)), 1e-300))
    for _ in range(1000):
        bad = np.flatnonzero(np.abs(v[:, -1]) <= 1e-12 * scale)
        if bad.size == 0:
            break
        redraws += bad.size
        v[bad] = draw(bad.size)
    else:
        raise SolverFailure("lifted matrix gives no weight to the auxiliary entry")
    phi = v[:, :-1] / v[:, -1:]
    beta = np.broadcast_to(np.asarray(beta, float), phi.shape[1:])
    mag = np.abs(phi)
    unit = np.divide(phi, mag, out=np.ones_like(phi), where=mag > 0)
    return unit * beta[None, :], redraws


def project_discrete(coeffs: np.ndarray, tau: int) -> np.ndarray:
    """Snap every phase to the nearest of ``2*pi*m/tau``; ties go to the lower angle."""
    if tau < 1:
        raise ValueError("tau must be positive")
    coeffs = np.asarray(coeffs, complex)
    x = np.mod(np.angle(coeffs), 2 * np.pi) * tau / (2 * np.pi)
    m = np.mod(np.ceil(x - 0.5 - 1e-12), tau)
    return np.abs(coeffs) * np.exp(2j * np.pi * m / tau)


def normalized_slacks(P: np.ndarray, config: SystemConfig, t_scale: float) -> np.ndarray:
    """Slack of every user's SINR constraint over ``gamma_i sigma_i^2`` (Z x K)."""
    K = config.num_mus
    grp = config.group_of
    gamma = np.asarray(config.sinr_targets, float)
    sigma2 = np.asarray(config.noise_powers, float)
    sig = P[:, np.arange(K), grp]
    interf = P.sum(axis=2) - sig
    return (sig - t_scale * gamma * (interf + sigma2)) / (gamma * sigma2)


@dataclass
class Infeasible:
    reason: str


@dataclass
class PhaseReport:
    sdp_status: str
    variant: str
    trials: int = 0
    redraws: int = 0
    selected: int | None = None
    min_slack: float | None = None
    projected: bool = False
    message: str = ""
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("sdp_status", "variant", "trials", "redraws", "selected",
                                               "min_slack", "projected", "message")}


def find_phase(channels: ChannelSet, W: BeamformingSet, config: SystemConfig, t_scale: float = 1.0,
               variant: str = "feasibility", constraints: PhaseConstraints | None = None,
               trials: int = 1000, rng=None, jobs: int = 1, tolerances: Tolerances | None = None,
               path: str = "general"):
    """Phase profile keeping every SINR constraint at level ``t_scale`` for ``W``.

    Returns ``(PhaseProfile, report)`` or ``(Infeasible, report)``.
    """
    if t_scale < 0:
        raise ValueError("t_scale must be nonnegative")
    constraints = constraints or PhaseConstraints()
    rng = rng if rng is not None else np.random.default_rng(0)
    tol = tolerances or Tolerances()
    build = build_coupling if path == "general" else build_coupling_single
    coupling = build(channels, W, config)
    prob = phase_sdp(coupling, config, constraints, t_scale, variant)
    if variant == "residual":
        sol = solve(prob, tol)
        if sol.status not in ("optimal", "infeasible"):
            check = feasibility(prob, tol, slack_cap=None, trace_cap=None)
            if check.status == "infeasible":
                sol = check
    else:
        sol = feasibility(prob, tol, slack_cap=None, trace_cap=None)
    report = PhaseReport(sol.status, variant, message=sol.message)
    if sol.status == "infeasible":
        return Infeasible("phase SDP infeasible"), report
    if sol.status != "optimal":
        raise SolverFailure(f"phase SDP stopped with status {sol.status}: {sol.message}", sol)
    V = sol.X[0]
    N = coupling.size - 1
    if constraints.amplitude_mode == "free_unit_interval":
        beta = np.clip(np.sqrt(np.clip(np.real(np.diag(V))[:N], 0.0, None)), 0.0, 1.0)
    else:
        beta = constraints.amplitudes(config.irs_sizes)
    phi, redraws = gaussian_randomize(V, trials, rng, beta)
    report.trials, report.redraws = trials, redraws

    def score(chunk):
        return normalized_slacks(coupling.powers(chunk), config, t_scale).min(axis=1)

    slack = np.concatenate(map_chunks(score, phi, jobs))
    best = int(np.argmax(slack))
    report.min_slack = float(slack[best])
    if slack[best] < -ACCEPT_TOL:
        report.message = "no randomized candidate meets the constraints"
        return Infeasible("no candidate"), report
    coeffs = np.conj(phi[best])
    if constraints.tau is not None:
        coeffs = project_discrete(coeffs, constraints.tau)
        report.projected = True
        s = float(score(np.conj(coeffs)[None])[0])
        report.min_slack = s
        if s < -ACCEPT_TOL:
            report.message = "projected candidate violates the constraints"
            return Infeasible("projection"), report
    report.selected = best
    amps = constraints.split(beta, config.irs_sizes) if constraints.amplitude_mode != "fixed_unit" else None
    profile = PhaseProfile.from_stacked(coeffs, config.irs_sizes, constraints.amplitude_mode, constraints.tau, amps)
    return profile, report
