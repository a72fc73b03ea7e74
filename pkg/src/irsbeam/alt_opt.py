"""Alternating optimization of beamformers and IRS phases.

Each outer iteration runs a beamforming step at the current phases, checks
the relative change of the objective, then runs a phase step that keeps the
current beamformers feasible.  Because the previous beamformers stay
feasible after the phase step, and they are always part of the next
beamforming step's candidate pool, the power never rises and the max-min
level never falls from one iteration to the next.

Randomness comes from independent substreams keyed by
``(seed, restart, iteration, step)`` so results do not depend on thread
counts or evaluation order.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .beamforming_opt import BeamformingOptions, maxmin_given_phase, minimize_power_given_phase
from .channel_model import BeamformingSet, ChannelSet, PhaseProfile, SystemConfig
from .errors import ConfigError, InfeasibleTargets, RandomizationFailed, SolverFailure
from .phase_opt import Infeasible, PhaseConstraints, find_phase
from .sdp_solver import Tolerances
from .sinr_metrics import SinrReport, evaluate

log = logging.getLogger(__name__)

PROBLEMS = ("power_qos", "maxmin_qos")
STEP_INIT, STEP_BEAM, STEP_PHASE = 0, 1, 2


def substream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))))


@dataclass
class AlgorithmOptions:
    problem: str = "power_qos"
    epsilon: float = 1e-3
    max_iter: int = 50
    trials: int = 1000
    restarts: int = 1
    residual_variant: bool = False
    seed: int = 0
    path: str = "general"
    jobs: int = 1
    bisect_tol: float = 1e-4
    rank_tol: float = 1e-6
    tolerances: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}", "algorithm.problem")
        if not self.epsilon >= 0:
            raise ConfigError("epsilon must be nonnegative", "algorithm.epsilon")
        for name in ("max_iter", "trials", "restarts"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be at least 1", f"algorithm.{name}")
        if self.path not in ("general", "base"):
            raise ConfigError(f"unknown path {self.path!r}", "algorithm.path")


@dataclass
class Scenario:
    config: SystemConfig
    channels: ChannelSet
    constraints: PhaseConstraints = field(default_factory=PhaseConstraints)
    options: AlgorithmOptions = field(default_factory=AlgorithmOptions)

    def __post_init__(self):
        self.channels.check(self.config)
        if self.options.path == "base" and (self.config.num_irs != 1 or any(q != 1 for q in self.config.mu_antennas)):
            raise ConfigError("the base path needs one IRS and single-antenna users", "algorithm.path")

    @property
    def traffic(self) -> str:
        return self.config.traffic


@dataclass
class IterationRecord:
    iteration: int
    objective: float
    sinr: SinrReport
    sdr_bound: float | None
    recovery: str
    wall_ms: float
    phase_step: dict | None = None

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "objective": self.objective,
            "min_scaled_sinr": self.sinr.min_scaled_sinr,
            "total_power": self.sinr.total_power,
            "sdr_bound": self.sdr_bound,
            "recovery": self.recovery,
            "phase_step": self.phase_step,
        }


@dataclass
class SolveReport:
    status: str
    problem: str
    trajectory: list
    W: BeamformingSet | None
    phase: PhaseProfile | None
    objective: float | None
    sinr: SinrReport | None
    best_iteration: int | None
    seed: int
    restart: int = 0
    message: str = ""
    restarts: list = field(default_factory=list)

    @property
    def objectives(self) -> list:
        return [r.objective for r in self.trajectory]

    @property
    def sdr_bounds(self) -> list:
        return [r.sdr_bound for r in self.trajectory]

    @property
    def iterations(self) -> int:
        return len(self.trajectory)

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "problem": self.problem,
            "objective": self.objective,
            "best_iteration": self.best_iteration,
            "iterations": self.iterations,
            "seed": self.seed,
            "restart": self.restart,
            "message": self.message,
            "sinr": self.sinr.to_dict() if self.sinr else None,
            "trajectory": [r.to_dict() for r in self.trajectory],
            "restarts": self.restarts,
        }

    def timing(self) -> dict:
        return {"iterations_ms": [r.wall_ms for r in self.trajectory]}


def _beam_options(opts: AlgorithmOptions) -> BeamformingOptions:
    return BeamformingOptions(trials=opts.trials, rank_tol=opts.rank_tol, bisect_tol=opts.bisect_tol,
                              jobs=opts.jobs, tolerances=opts.tolerances)


def _run_once(scn: Scenario, restart: int) -> SolveReport:
    opts = scn.options
    cfg, ch = scn.config, scn.channels
    maxmin = opts.problem == "maxmin_qos"
    beam = maxmin_given_phase if maxmin else minimize_power_given_phase
    bopts = _beam_options(opts)
    variant = "residual" if opts.residual_variant else "feasibility"
    phase = scn.constraints.random_profile(cfg.irs_sizes, substream(opts.seed, restart, 0, STEP_INIT))
    traj = []
    best = None  # (objective, W, phase, sinr, iteration)
    W_prev, f_prev = None, None
    status, message = "iteration_cap", f"stopped after {opts.max_iter} iterations"
    for r in range(1, opts.max_iter + 1):
        t0 = time.perf_counter()
        try:
            res = beam(ch, phase, cfg, bopts, substream(opts.seed, restart, r, STEP_BEAM), W_prev, opts.path)
        except (InfeasibleTargets, RandomizationFailed) as exc:
            status, message = "beamforming_infeasible", str(exc)
            break
        f = res.achieved_value
        rep = evaluate(ch, phase, res.W, cfg)
        bound = res.sdr_upper_bound if maxmin else res.sdr_lower_bound
        rec = IterationRecord(r, f, rep, bound, res.recovery, 0.0)
        traj.append(rec)
        if best is None or (f > best[0] if maxmin else f < best[0]):
            best = (f, res.W, phase, rep, r)
        done = False
        if maxmin and f == 0.0 and cfg.power_budget == 0.0:
            done = True
        elif r >= 2:
            if maxmin:
                change = 0.0 if (f == 0.0 and f_prev == 0.0) else (f / f_prev - 1.0 if f_prev > 0 else math.inf)
            else:
                change = 1.0 - f / f_prev if f_prev > 0 else 0.0
            done = change <= opts.epsilon
        if done:
            rec.wall_ms = (time.perf_counter() - t0) * 1e3
            status, message = "converged", f"converged at iteration {r}"
            break
        t_scale = f if maxmin else 1.0
        try:
            new_phase, prep = find_phase(ch, res.W, cfg, t_scale, variant, scn.constraints, opts.trials,
                                         substream(opts.seed, restart, r, STEP_PHASE), opts.jobs,
                                         opts.tolerances, opts.path)
            rec.phase_step = prep.to_dict()
        except SolverFailure as exc:
            new_phase = Infeasible(str(exc))
            rec.phase_step = {"sdp_status": "solver_failure", "message": str(exc)}
        rec.wall_ms = (time.perf_counter() - t0) * 1e3
        if isinstance(new_phase, Infeasible):
            status, message = "phase_step_failed", f"phase step found no candidate at iteration {r} ({new_phase.reason})"
            break
        phase, W_prev, f_prev = new_phase, res.W, f
    if best is None:
        return SolveReport(status, opts.problem, traj, None, None, None, None, None, opts.seed, restart, message)
    f, W, ph, rep, it = best
    return SolveReport(status, opts.problem, traj, W, ph, f, rep, it, opts.seed, restart, message)


def _better(a: SolveReport, b: SolveReport | None, maxmin: bool) -> bool:
    if b is None or b.objective is None:
        return a.objective is not None or b is None
    if a.objective is None:
        return False
    return a.objective > b.objective if maxmin else a.objective < b.objective


def solve(scenario: Scenario) -> SolveReport:
    """Run every restart and return the best one; the others are summarized."""
    maxmin = scenario.options.problem == "maxmin_qos"
    best, summary = None, []
    for restart in range(scenario.options.restarts):
        rep = _run_once(scenario, restart)
        summary.append({"restart": restart, "status": rep.status, "objective": rep.objective,
                        "iterations": rep.iterations})
        if _better(rep, best, maxmin):
            best = rep
    best.restarts = summary
    return best


def solve_power_control(scenario: Scenario) -> SolveReport:
    if scenario.options.problem != "power_qos":
        scenario = replace(scenario, options=replace(scenario.options, problem="power_qos"))
    return solve(scenario)


def solve_maxmin(scenario: Scenario) -> SolveReport:
    if scenario.options.problem != "maxmin_qos":
        scenario = replace(scenario, options=replace(scenario.options, problem="maxmin_qos"))
    return solve(scenario)
