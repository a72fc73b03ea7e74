"""Command-line front end: ``irsbeam run`` and ``irsbeam sweep``.

Exit codes: 0 converged, 1 error (bad input or solver failure),
2 beamforming targets infeasible, 3 phase step found no candidate,
4 outer iteration cap reached.

Output files
------------
report.json
    ``scenario`` (the resolved input), ``report`` (status, objective,
    trajectory, final SINR report) and ``timing``.  Everything outside
    ``timing`` is reproducible for a fixed seed.
trajectory.csv
    ``iteration,objective,min_scaled_sinr,wall_ms``.
solution.json
    Beamformers ``W`` (per group, ``[re, im]`` pairs) and the phase profile
    (radians).
sweep.csv
    ``value,final_objective,iterations,status``, one row per swept value.
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from importlib import resources

import jsonschema

from . import kernels
from .alt_opt import AlgorithmOptions, Scenario, solve
from .channel_model import ChannelModelParams, ChannelSet, LinkStats, SystemConfig, generate_channels
from .errors import ConfigError, IrsBeamError
from .phase_opt import PhaseConstraints

log = logging.getLogger("irsbeam")

EXIT_CODES = {"converged": 0, "beamforming_infeasible": 2, "phase_step_failed": 3, "iteration_cap": 4}
SWEEP_AXES = ("N", "M", "K", "tau", "P", "trials")


def _schema():
    return json.loads(resources.files("irsbeam").joinpath("schema/scenario.schema.json").read_text())


def _dotted(parts) -> str:
    return ".".join(str(p) for p in parts)


def validate_document(doc: dict) -> None:
    """Schema check plus cross-field rules; raises ConfigError with a dotted path."""
    validator = jsonschema.Draft202012Validator(_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        path = list(err.absolute_path)
        if err.validator == "additionalProperties":
            extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
            path += extra[:1]
        raise ConfigError(err.message, _dotted(path) or "<root>")
    sysd = doc["system"]
    K = sum(len(g) for g in sysd["groups"])
    members = sorted(i for g in sysd["groups"] for i in g)
    if members != list(range(K)):
        raise ConfigError(f"groups must partition users 0..{K - 1}", "system.groups")
    for key in ("noise_powers", "sinr_targets", "mu_antennas"):
        v = sysd.get(key)
        if isinstance(v, list) and len(v) != K:
            raise ConfigError(f"expected {K} entries, got {len(v)}", f"system.{key}")
    traffic = sysd.get("traffic")
    if traffic == "unicast" and any(len(g) != 1 for g in sysd["groups"]):
        raise ConfigError("unicast needs singleton groups", "system.traffic")
    if traffic == "broadcast" and len(sysd["groups"]) != 1:
        raise ConfigError("broadcast needs a single group", "system.traffic")
    cons = doc.get("constraints", {})
    if cons.get("phase_mode") == "discrete" and "tau" not in cons:
        raise ConfigError("discrete phases need tau", "constraints.tau")
    if cons.get("amplitude_mode") == "fixed_values":
        n = sum(sysd["irs_sizes"])
        if len(cons.get("beta", [])) != n:
            raise ConfigError(f"expected {n} amplitude values", "constraints.beta")
    ch = doc.get("channel", {})
    if ch.get("model") == "inline" and "data" not in ch:
        raise ConfigError("inline channels need data", "channel.data")


def _per_user(v, K, default):
    if v is None:
        v = default
    return [v] * K if not isinstance(v, list) else list(v)


def build_config(doc: dict) -> SystemConfig:
    s = doc["system"]
    K = sum(len(g) for g in s["groups"])
    return SystemConfig(s["M"], s["irs_sizes"], s["groups"], _per_user(s.get("mu_antennas"), K, 1),
                        _per_user(s["noise_powers"], K, 1.0), _per_user(s["sinr_targets"], K, 1.0),
                        s.get("power_budget", 1.0))


def build_channels(doc: dict, config: SystemConfig) -> ChannelSet:
    ch = doc.get("channel", {})
    model = ch.get("model", "rayleigh")
    if model == "inline":
        try:
            channels = ChannelSet.from_dict(ch["data"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc), "channel.data") from exc
        channels.check(config)
        return channels
    gains = ch.get("gains", {})
    kf = ch.get("rician_k", {}) if model == "rician" else {}
    params = ChannelModelParams(*(LinkStats(gains.get(k, 1.0), kf.get(k, 0.0)) for k in ("bs_irs", "irs_mu", "bs_mu")))
    return generate_channels(config, params, ch.get("seed", 0))


def build_scenario(doc: dict, channels: ChannelSet | None = None, jobs: int = 1) -> Scenario:
    config = build_config(doc)
    if channels is None:
        channels = build_channels(doc, config)
    c = doc.get("constraints", {})
    tau = c.get("tau") if c.get("phase_mode", "continuous") == "discrete" else None
    beta = tuple(c["beta"]) if c.get("amplitude_mode") == "fixed_values" else None
    cons = PhaseConstraints(c.get("amplitude_mode", "fixed_unit"), tau, beta)
    a = doc.get("algorithm", {})
    opts = AlgorithmOptions(problem=a.get("problem", "power_qos"), epsilon=a.get("epsilon", 1e-3),
                            max_iter=a.get("max_iter", 50), trials=a.get("trials", 1000),
                            restarts=a.get("restarts", 1), residual_variant=a.get("residual_variant", False),
                            seed=a.get("seed", 0), path=a.get("path", "general"), jobs=jobs)
    return Scenario(config, channels, cons, opts)


def apply_override(doc: dict, assignment: str) -> None:
    """``key.sub=value`` with a JSON value (bare words are taken as strings)."""
    if "=" not in assignment:
        raise ConfigError("expected key=value", assignment)
    key, raw = assignment.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    parts = key.strip().split(".")
    node = doc
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError("cannot set a field inside a non-object", key)
    node[parts[-1]] = value


def load_document(path: str, overrides=(), seed=None) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(str(exc), "scenario") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}", "scenario") from exc
    if not isinstance(doc, dict):
        raise ConfigError("scenario must be a JSON object", "<root>")
    for item in overrides or ():
        apply_override(doc, item)
    if seed is not None:
        doc.setdefault("algorithm", {})["seed"] = int(seed)
    validate_document(doc)
    return doc


def _write_atomic(path: str, text: str) -> None:
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_outputs(out_dir: str, doc: dict, report, elapsed_ms: float) -> None:
    os.makedirs(out_dir, exist_ok=True)
    timing = report.timing()
    timing.update({"total_ms": elapsed_ms, "kernel_backend": kernels.BACKEND})
    _write_atomic(os.path.join(out_dir, "report.json"),
                  _dumps({"scenario": doc, "report": report.to_dict(), "timing": timing}))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iteration", "objective", "min_scaled_sinr", "wall_ms"])
    for rec in report.trajectory:
        w.writerow([rec.iteration, repr(rec.objective), repr(rec.sinr.min_scaled_sinr), f"{rec.wall_ms:.3f}"])
    _write_atomic(os.path.join(out_dir, "trajectory.csv"), buf.getvalue())
    solution = {
        "status": report.status,
        "objective": report.objective,
        "W": report.W.to_dict()["W"] if report.W is not None else None,
        "phase": report.phase.to_dict() if report.phase is not None else None,
    }
    _write_atomic(os.path.join(out_dir, "solution.json"), _dumps(solution))


def run(scenario_path: str, out_dir: str, overrides=(), seed=None, jobs: int = 1) -> int:
    try:
        doc = load_document(scenario_path, overrides, seed)
        scn = build_scenario(doc, jobs=jobs)
        t0 = time.perf_counter()
        report = solve(scn)
        write_outputs(out_dir, doc, report, (time.perf_counter() - t0) * 1e3)
    except IrsBeamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    log.info("%s after %d iterations, objective %s", report.status, report.iterations, report.objective)
    return EXIT_CODES.get(report.status, 1)


def _sweep_document(doc: dict, axis: str, value):
    d = copy.deepcopy(doc)
    s = d["system"]
    if axis == "N":
        s["irs_sizes"] = [int(value)] * len(s["irs_sizes"])
        beta = d.get("constraints", {}).get("beta")
        if beta is not None:
            d["constraints"]["beta"] = beta[:1] * sum(s["irs_sizes"])
    elif axis == "M":
        s["M"] = int(value)
    elif axis == "K":
        K = int(value)
        old = sum(len(g) for g in s["groups"])
        if len(s["groups"]) == 1 and old > 1:
            s["groups"] = [list(range(K))]
        elif all(len(g) == 1 for g in s["groups"]):
            s["groups"] = [[i] for i in range(K)]
        else:
            raise ConfigError("K sweeps need unicast or broadcast groups", "system.groups")
        for key in ("noise_powers", "sinr_targets", "mu_antennas"):
            if isinstance(s.get(key), list):
                if len(s[key]) < K:
                    raise ConfigError(f"needs at least {K} entries to sweep K", f"system.{key}")
                s[key] = s[key][:K]
    elif axis == "tau":
        d.setdefault("constraints", {}).update({"phase_mode": "discrete", "tau": int(value)})
    elif axis == "P":
        s["power_budget"] = float(value)
    elif axis == "trials":
        d.setdefault("algorithm", {})["trials"] = int(value)
    return d


def sweep(scenario_path: str, axis: str, values, out_dir: str, overrides=(), seed=None, jobs: int = 1) -> int:
    """One solve per value; channels for N, M and K are nested slices of one draw."""
    try:
        if axis not in SWEEP_AXES:
            raise ConfigError(f"axis must be one of {', '.join(SWEEP_AXES)}", "axis")
        if not values:
            raise ConfigError("no values to sweep", "values")
        doc = load_document(scenario_path, overrides, seed)
        docs = [_sweep_document(doc, axis, v) for v in values]
        for d in docs:
            validate_document(d)
        channels = [None] * len(docs)
        if axis in ("N", "M", "K"):
            big_doc = _sweep_document(doc, axis, max(values))
            big = build_channels(big_doc, build_config(big_doc))
            for j, d in enumerate(docs):
                cfg = build_config(d)
                channels[j] = big.subset(elements=cfg.irs_sizes, antennas=cfg.num_bs_antennas, users=cfg.num_mus)
        scenarios = [build_scenario(d, c) for d, c in zip(docs, channels)]
    except IrsBeamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    def point(j):
        t0 = time.perf_counter()
        rep = solve(scenarios[j])
        write_outputs(os.path.join(out_dir, f"{axis}_{values[j]}"), docs[j], rep, (time.perf_counter() - t0) * 1e3)
        return rep

    try:
        os.makedirs(out_dir, exist_ok=True)
        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                reports = list(pool.map(point, range(len(values))))
        else:
            reports = [point(j) for j in range(len(values))]
    except IrsBeamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["value", "final_objective", "iterations", "status"])
    for v, rep in zip(values, reports):
        w.writerow([v, repr(rep.objective), rep.iterations, rep.status])
    _write_atomic(os.path.join(out_dir, "sweep.csv"), buf.getvalue())
    return 0


def _number(text: str):
    v = float(text)
    return int(v) if v.is_integer() and "." not in text and "e" not in text.lower() else v


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="irsbeam", description="Joint BS beamforming and IRS phase optimization.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("run", "sweep"):
        sp = sub.add_parser(name)
        sp.add_argument("--scenario", required=True, help="scenario JSON file")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, help="override algorithm.seed")
        sp.add_argument("--jobs", type=int, default=1, help="worker threads")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a scenario field by dotted path (JSON value)")
        if name == "sweep":
            sp.add_argument("--axis", required=True, choices=SWEEP_AXES)
            sp.add_argument("--values", required=True, help="comma-separated values")
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("IRSBEAM_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = _parser().parse_args(argv)
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return 1
    if args.command == "run":
        return run(args.scenario, args.out, args.set, args.seed, args.jobs)
    try:
        values = [_number(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        print(f"error: values: cannot parse {args.values!r}", file=sys.stderr)
        return 1
    return sweep(args.scenario, args.axis, values, args.out, args.set, args.seed, args.jobs)


if __name__ == "__main__":
    sys.exit(main())
