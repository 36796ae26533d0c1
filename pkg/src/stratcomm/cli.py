"""Command-line front end.

Every command that writes files also writes a run manifest (JSON) recording the resolved
parameters, input digests, tool version and seed; ``replay`` re-runs a manifest and can
check the regenerated outputs against the recorded digests.

Exit codes: 0 success, 1 solver failure, 2 invalid input.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .coding import CSV_COLUMNS as TRIAL_COLUMNS, CodingConfig, TargetLaw, record_row, run_trials
from .dsbs import curve_rows, dsbs_solve, three_posterior_optimize, write_curve_csv
from .info import CapacityNotConverged, channel_capacity
from .problem import DsbsParams, ProblemFormatError, ProblemValidationError, load_problem, parse_channel, parse_strategy
from .simplex import LPError
from .splitting import SolverError, build_grid, lagrangian_value, solve_splitting, zero_capacity_value
from .svg import line_plot

log = logging.getLogger("stratcomm")

EXIT_OK, EXIT_SOLVER, EXIT_INPUT = 0, 1, 2
THREADS_ENV = "STRATCOMM_THREADS"
CROSS_CHECK_TOL = 1e-3
INPUT_KEYS = ("problem", "channel", "target")
OUTPUT_KEYS = ("output", "csv", "svg")


class InputError(ValueError):
    pass


# ---------------------------------------------------------------------------
# helpers


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _write_text(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8", newline="\n")


def _emit_record(args, record: dict) -> None:
    text = _dump_json(record)
    if args.output:
        _write_text(args.output, text)
    else:
        sys.stdout.write(text)


def parse_range(spec: str) -> list[float]:
    """``start:stop:step`` with the stop included; values are rounded to 12 decimals."""
    try:
        start, stop, step = (float(s) for s in spec.split(":"))
    except ValueError:
        raise InputError(f"range must look like start:stop:step, got {spec!r}") from None
    if step <= 0 or stop < start:
        raise InputError(f"range {spec!r} needs step > 0 and stop >= start")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + k * step, 12) for k in range(count)]


def _read(path, parser):
    try:
        return parser(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InputError(f"file not found: {path}") from None


def resolve_threads(value: int | None) -> int:
    if value is None:
        value = int(os.environ.get(THREADS_ENV, "1"))
    return value if value > 0 else (os.cpu_count() or 1)


def _curve_svg(path, xs, ys, label):
    _write_text(path, line_plot([(label, xs, ys)], xlabel="capacity C (bits)", ylabel="encoder distortion"))


def _capacity_for(args, problem) -> float:
    if args.capacity is not None:
        return args.capacity
    if args.channel:
        return channel_capacity(_read(args.channel, parse_channel)).capacity
    if problem.t_yx is not None:
        return channel_capacity(problem.t_yx).capacity
    if problem.capacity is not None:
        return problem.capacity
    raise InputError("no capacity: pass --capacity or --channel, or put one in the problem file")


# ---------------------------------------------------------------------------
# commands


def cmd_capacity(args) -> dict:
    result = channel_capacity(_read(args.channel, parse_channel), tol=args.tol)
    record = {"capacity_bits": result.capacity, "input_law": result.input_law.tolist(),
              "gap_bits": result.gap, "iterations": result.iterations}
    if not args.output:
        print(f"capacity {result.capacity:.6f} bits")
        print("input law " + " ".join(f"{p:.6f}" for p in result.input_law))
    else:
        _emit_record(args, record)
    return record


def cmd_solve(args) -> dict:
    problem = load_problem(args.problem)
    capacity = _capacity_for(args, problem)
    grid = build_grid(problem, args.grid_step, args.probe_eps)
    result = solve_splitting(problem, capacity, grid=grid)
    dual = lagrangian_value(problem, capacity, grid=grid)
    record = result.to_dict()
    record["support_size"] = len(result.splitting)
    record["lagrangian_value"] = dual
    record["cross_check_gap"] = abs(dual - result.value)
    record["zero_capacity_value"] = zero_capacity_value(problem)
    if record["cross_check_gap"] > CROSS_CHECK_TOL:
        log.warning("primal %.9f and dual %.9f differ by more than %g", result.value, dual, CROSS_CHECK_TOL)
    _emit_record(args, record)
    return record


def _dsbs_params(args, capacity) -> DsbsParams:
    if args.delta is not None:
        if args.delta0 is not None or args.delta1 is not None:
            raise InputError("give either --delta or --delta0/--delta1")
        d0 = d1 = args.delta
    elif args.delta0 is not None and args.delta1 is not None:
        d0, d1 = args.delta0, args.delta1
    else:
        raise InputError("need --delta, or both --delta0 and --delta1")
    return DsbsParams(args.p0, d0, d1, args.kappa, capacity)


def _solve_dsbs(params: DsbsParams):
    if params.p0 == 0.5 and params.is_symmetric:
        return dsbs_solve(params)
    return three_posterior_optimize(params)


def cmd_dsbs(args) -> dict:
    params = _dsbs_params(args, args.cap)
    sol = _solve_dsbs(params)
    record = {"params": {"p0": params.p0, "delta0": params.delta0, "delta1": params.delta1,
                         "kappa": params.kappa, "capacity": params.capacity},
              "regime": sol.regime, "value": sol.value, "posteriors": list(sol.posteriors),
              "weights": list(sol.weights), "alpha": list(sol.alpha), "beta": list(sol.beta),
              "q_star": sol.q_star, "c_threshold": sol.c_threshold}
    if args.curve:
        caps = parse_range(args.curve)
        rows = curve_rows(params, caps)
        if not args.csv:
            raise InputError("--curve needs --csv")
        _write_text(args.csv, write_curve_csv(rows))
        if args.svg:
            _curve_svg(args.svg, caps, [r["value"] for r in rows], "optimal distortion")
        record["curve_points"] = len(rows)
    _emit_record(args, record)
    return record


def cmd_curve(args) -> dict:
    problem = load_problem(args.problem)
    caps = parse_range(args.capacities)
    grid = build_grid(problem, args.grid_step, args.probe_eps)
    lines = ["capacity,value,support_size,slack_bits,infimum_flag"]
    values = []
    for c in caps:
        res = solve_splitting(problem, c, grid=grid)
        values.append(res.value)
        lines.append(f"{c!r},{res.value!r},{len(res.splitting)},{res.slack_bits!r},{int(res.infimum_flag)}")
    _write_text(args.csv, "\n".join(lines) + "\n")
    if args.svg:
        _curve_svg(args.svg, caps, values, "LP over belief grid")
    record = {"points": len(caps), "grid_step": grid.step, "grid_size": len(grid),
              "first_value": values[0], "last_value": values[-1]}
    _emit_record(args, record)
    return record


def cmd_simulate(args) -> dict:
    problem = load_problem(args.problem)
    if not args.target:
        raise InputError("--target is required")
    q = _read(args.target, parse_strategy)
    if q.shape[0] != problem.u_size:
        raise InputError(f"target has {q.shape[0]} source rows, problem has {problem.u_size}")
    channel = _read(args.channel, parse_channel) if args.channel else problem.t_yx
    if channel is None:
        raise InputError("simulation needs a channel table (--channel or [channel] in the problem)")
    target = TargetLaw(problem.p_uz, q)
    if args.n > args.n_max:
        raise InputError(f"blocklength {args.n} exceeds the exact-enumeration cap {args.n_max}")
    rate_l = args.rate_l if args.rate_l is not None else max(target.info_zw() - args.eta, 0.0)
    rate = args.rate if args.rate is not None else target.info_uw() + args.eta - rate_l
    config = CodingConfig(n=args.n, rate=rate, rate_l=rate_l, channel=channel, target=target, eta=args.eta,
                          delta_typ=args.delta_typ, alpha=args.alpha, seed=args.seed, trials=args.trials,
                          n_max=args.n_max)
    problems = config.rate_violations()
    if problems and not args.allow_rate_violation:
        raise InputError("; ".join(problems))
    stats = run_trials(config, problem, threads=resolve_threads(args.threads))
    if args.csv:
        lines = [",".join(TRIAL_COLUMNS)]
        for rec in stats.records:
            row = record_row(rec)
            lines.append(",".join(str(row[c]) for c in TRIAL_COLUMNS))
        _write_text(args.csv, "\n".join(lines) + "\n")
    record = stats.to_dict()
    record.update({"rate": rate, "rate_l": rate_l, "m_size": config.m_size, "l_size": config.l_size,
                   "info_uw": target.info_uw(), "info_zw": target.info_zw()})
    _emit_record(args, record)
    return record


def cmd_replay(args) -> dict:
    try:
        manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InputError(f"file not found: {args.manifest}") from None
    params = dict(manifest["params"])
    for key, digest in manifest.get("inputs", {}).items():
        if sha256_file(params[key]) != digest:
            raise InputError(f"input {params[key]} changed since the manifest was written")
    if args.output_dir:
        out_dir = Path(args.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for key in OUTPUT_KEYS:
            if params.get(key):
                params[key] = str(out_dir / Path(params[key]).name)
    argv = params_to_argv(manifest["command"], params)
    code = main(argv + ["--manifest", str(Path(args.output_dir or ".") / "replay.manifest.json")]
                if args.output_dir else argv, _replaying=True)
    mismatches = []
    if code == EXIT_OK:
        for key, digest in manifest.get("outputs", {}).items():
            if sha256_file(params[key]) != digest:
                mismatches.append(params[key])
    record = {"command": manifest["command"], "exit_code": code, "mismatched_outputs": mismatches}
    if mismatches:
        log.error("replayed outputs differ: %s", ", ".join(mismatches))
    if code != EXIT_OK or mismatches:
        raise SolverError("replay did not reproduce the recorded outputs")
    return record


# ---------------------------------------------------------------------------
# parser and manifest


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stratcomm", description="Encoder-optimal strategic communication tools.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True)

    def out_flags(p, csv=False, svg=False):
        p.add_argument("--output", help="write the JSON record here instead of stdout")
        p.add_argument("--manifest", help="manifest path (default: <output>.manifest.json)")
        if csv:
            p.add_argument("--csv")
        if svg:
            p.add_argument("--svg")

    p = sub.add_parser("capacity", help="capacity of a channel file")
    p.add_argument("--channel", required=True)
    p.add_argument("--tol", type=float, default=1e-9)
    out_flags(p)
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("solve", help="optimal encoder distortion for a problem file")
    p.add_argument("--problem", required=True)
    p.add_argument("--capacity", type=float)
    p.add_argument("--channel")
    p.add_argument("--grid-step", type=float)
    p.add_argument("--probe-eps", type=float, default=1e-7)
    out_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("dsbs", help="binary source with binary side information")
    p.add_argument("--p0", type=float, default=0.5)
    p.add_argument("--delta", type=float)
    p.add_argument("--delta0", type=float)
    p.add_argument("--delta1", type=float)
    p.add_argument("--kappa", type=float, default=0.0)
    p.add_argument("--cap", type=float, default=0.0)
    p.add_argument("--curve", help="capacity sweep start:stop:step")
    out_flags(p, csv=True, svg=True)
    p.set_defaults(func=cmd_dsbs)

    p = sub.add_parser("curve", help="capacity-distortion sweep of a problem file")
    p.add_argument("--problem", required=True)
    p.add_argument("--capacities", required=True, help="start:stop:step")
    p.add_argument("--grid-step", type=float)
    p.add_argument("--probe-eps", type=float, default=1e-7)
    p.add_argument("--csv", required=True)
    p.add_argument("--svg")
    p.add_argument("--output")
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("simulate", help="finite-blocklength coding trials")
    p.add_argument("--problem", required=True)
    p.add_argument("--target")
    p.add_argument("--channel")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eta", type=float, default=0.05)
    p.add_argument("--delta-typ", type=float, default=0.1)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--rate", type=float)
    p.add_argument("--rate-l", type=float)
    p.add_argument("--n-max", type=int, default=16)
    p.add_argument("--threads", type=int, help=f"0 = all cores; default from ${THREADS_ENV} or 1")
    p.add_argument("--allow-rate-violation", action="store_true")
    out_flags(p, csv=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("replay", help="re-run a manifest and compare outputs")
    p.add_argument("--manifest", required=True)
    p.add_argument("--output-dir", help="write regenerated outputs here instead of over the originals")
    p.set_defaults(func=cmd_replay)
    return parser


_NOT_PARAMS = ("func", "command", "manifest", "log_level")


def params_to_argv(command: str, params: dict) -> list[str]:
    """Rebuild a command line from resolved parameters."""
    parser = build_parser()
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices[command]
    argv = [command]
    for action in sub._actions:
        if not action.option_strings or action.dest not in params:
            continue
        value = params[action.dest]
        flag = action.option_strings[0]
        if isinstance(action, argparse._StoreTrueAction):
            if value:
                argv.append(flag)
        elif value is not None:
            argv += [flag, repr(value) if isinstance(value, float) else str(value)]
    return argv


def write_manifest(args, duration: float) -> str | None:
    outputs = {k: getattr(args, k) for k in OUTPUT_KEYS if getattr(args, k, None)}
    path = args.manifest or (args.output + ".manifest.json" if getattr(args, "output", None) else None)
    if path is None:
        return None
    params = {k: v for k, v in vars(args).items() if k not in _NOT_PARAMS}
    manifest = {
        "command": args.command,
        "params": params,
        "inputs": {k: sha256_file(params[k]) for k in INPUT_KEYS if params.get(k)},
        "outputs": {k: sha256_file(p) for k, p in outputs.items() if Path(p).exists()},
        "version": __version__,
        "seed": params.get("seed"),
        "duration_seconds": duration,
    }
    _write_text(path, _dump_json(manifest))
    return path


def main(argv=None, _replaying: bool = False) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(message)s")
    start = time.perf_counter()
    try:
        args.func(args)
    except (InputError, ProblemFormatError, ProblemValidationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SolverError, LPError, CapacityNotConverged, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    if args.command != "replay":
        write_manifest(args, time.perf_counter() - start)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
