"""Command-line entry point: ``diffgof {simulate,calibrate,test,study,defaults}``.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 1 unexpected
internal error.  Every failure prints exactly one line starting ``error:``.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from ._defaults import DEFAULTS
from .calibration import calibrate, check_table_grid, decide, load_table, save_table
from .config import (CalibrateCommand, SimulateCommand, StudyCommand, TestCommand, build_model,
                     load_study, parse_epsilons, parse_theta)
from .errors import NumericalError, ValidationError
from .limits import default_param_grid, parse_law_id
from .model import ParametricModel, Regime, classify_regime
from .registry import check_compatible, law_for
from .simulate import RngStream, Trajectory, simulate_path, simulate_stationary
from .statistics import StatisticKind, compute_statistics

EXIT_OK, EXIT_INTERNAL, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return v


def _int(text):
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="diffgof", description="Goodness-of-fit tests for ergodic diffusions.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="simulate a path and write it as CSV (t,x)")
    s.add_argument("--model", required=True)
    s.add_argument("--theta", help="alpha,beta (family models)")
    s.add_argument("--T", type=_positive_float, required=True)
    s.add_argument("--dt", type=_positive_float, default=DEFAULTS["dt"])
    s.add_argument("--seed", type=_int, required=True)
    s.add_argument("--x0", type=float, help="fixed start (default: stationary draw)")
    s.add_argument("--out", required=True)

    c = sub.add_parser("calibrate", help="Monte Carlo thresholds of a limit law")
    c.add_argument("--law", required=True)
    c.add_argument("--eps", required=True, help="comma-separated levels, e.g. 0.01,0.05,0.1")
    c.add_argument("--n", type=_int, required=True)
    c.add_argument("--seed", type=_int, required=True)
    c.add_argument("--model", help="simple model spec (needed for delta_S0 laws)")
    c.add_argument("--out", required=True)

    t = sub.add_parser("test", help="test one trajectory; prints a JSON verdict")
    t.add_argument("--traj", required=True)
    t.add_argument("--stat", required=True, help="Family:Norm, e.g. ParamEDF:CvM")
    t.add_argument("--model", required=True)
    t.add_argument("--table")
    t.add_argument("--eps", type=float, required=True)
    t.add_argument("--no-autocalibrate", action="store_true")
    t.add_argument("--calibration-n", type=_int, default=20_000)
    t.add_argument("--calibration-seed", type=_int, default=0)
    t.add_argument("--weighted-ks", action="store_true")

    st = sub.add_parser("study", help="run a study from a JSON config")
    st.add_argument("--config", required=True)
    st.add_argument("--out", required=True)

    d = sub.add_parser("defaults", help="print every effective default as JSON")
    d.add_argument("--gamma", default="0,0.3,1,2,3",
                   help="gammas for which to list the limit-sampler grid")
    return p


def _check_out(path):
    parent = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(parent):
        raise ValidationError(f"output directory {parent} does not exist")


def _check_in(path, what):
    if not os.path.exists(path):
        raise ValidationError(f"{what} {path} not found")


def parse_and_validate(argv):
    """argv -> validated command object (or ('defaults', gammas))."""
    args = build_parser().parse_args(argv)
    if args.command == "simulate":
        model = build_model(args.model)
        theta = None
        if isinstance(model, ParametricModel):
            if not args.theta:
                raise ValidationError("--theta is required for family models")
            theta = parse_theta(args.theta)
            model.require_supported()
            if not model.contains(theta):
                raise ValidationError(f"--theta {args.theta} outside the box {model.theta_box}")
            theta = theta.as_tuple()
        _check_out(args.out)
        return SimulateCommand(args.model, args.T, args.dt, args.seed, args.out, theta,
                               args.x0 is None, args.x0)
    if args.command == "calibrate":
        spec = parse_law_id(args.law)
        eps = tuple(parse_epsilons(args.eps))
        if spec.model_key is not None:
            if not args.model:
                raise ValidationError(f"--model is required for law {args.law!r}")
            model = build_model(args.model)
            if getattr(model, "key", None) != spec.model_key:
                raise ValidationError(f"--model key does not match law {args.law!r}")
        _check_out(args.out)
        return CalibrateCommand(args.law, eps, args.n, args.seed, args.out, args.model)
    if args.command == "test":
        _check_in(args.traj, "trajectory")
        kind = StatisticKind.parse(args.stat)
        model = build_model(args.model)
        law = law_for(kind, model)
        if args.table:
            _check_in(args.table, "calibration table")
            table = load_table(args.table)
            check_compatible(kind, table.law_id, model)
            check_table_grid(table, model)
        elif args.no_autocalibrate:
            raise ValidationError(f"--table is required with --no-autocalibrate (law {law})")
        if not 0.0 < args.eps < 1.0:
            raise ValidationError(f"--eps must lie in (0, 1), got {args.eps:g}")
        return TestCommand(args.traj, str(kind), args.model, args.eps, args.table,
                           not args.no_autocalibrate, args.calibration_n, args.calibration_seed,
                           args.weighted_ks)
    if args.command == "study":
        _check_in(args.config, "study config")
        load_study(args.config)
        return StudyCommand(args.config, args.out)
    return ("defaults", args.gamma)


def _run_simulate(cmd: SimulateCommand):
    model = build_model(cmd.model)
    law = model.at(cmd.theta) if isinstance(model, ParametricModel) else model
    rng = RngStream(cmd.seed)
    if cmd.stationary:
        traj = simulate_stationary(law, cmd.T, cmd.dt, rng)
    else:
        traj = simulate_path(law.drift, law.diffusion, cmd.x0, cmd.T, cmd.dt, rng)
    traj.to_csv(cmd.out)
    return {"out": cmd.out, "n_steps": traj.n_steps, "T": traj.horizon}


def _run_calibrate(cmd: CalibrateCommand):
    model = build_model(cmd.model) if cmd.model else None
    table = calibrate(cmd.law, cmd.eps, cmd.n, cmd.seed, model=model)
    save_table(table, cmd.out)
    return {"out": cmd.out, "law_id": table.law_id,
            "thresholds": dict(zip(map(str, table.epsilons), table.thresholds))}


def _run_test(cmd: TestCommand):
    traj = Trajectory.from_csv(cmd.traj)
    kind = StatisticKind.parse(cmd.stat)
    model = build_model(cmd.model)
    if cmd.table:
        table = load_table(cmd.table)
    else:
        table = calibrate(law_for(kind, model), [cmd.eps], cmd.calibration_n,
                          cmd.calibration_seed, model=model)
    (value,), theta_hat = compute_statistics(traj, [kind], model, weighted_ks=cmd.weighted_ks)
    decision = decide(value, table, cmd.eps, model=model)
    out = {"statistic": value.value, "stat_kind": str(kind), "law_id": table.law_id,
           "epsilon": cmd.eps, "threshold": table.threshold(cmd.eps),
           "decision": decision.value}
    if theta_hat is not None:
        out["theta_hat"] = [theta_hat.alpha, theta_hat.beta]
        out["boundary_hit"] = list(theta_hat.boundary_hit)
    return out


def _run_study(cmd: StudyCommand):
    from .harness import run_study

    cfg = load_study(cmd.config)
    report = run_study(cfg, out_dir=cmd.out)
    keep = {k: v for k, v in report.summary.items() if k in ("study", "rejection", "ks", "ladder")}
    return {"out": cmd.out, "wall_clock_seconds": report.wall_clock, **keep}


def _defaults(gammas):
    grids = {}
    for g in _gammas(gammas):
        if classify_regime(g) is Regime.UNSUPPORTED:
            continue
        grids[f"{g:g}"] = default_param_grid(g).as_dict()
    return {"defaults": dict(DEFAULTS), "limit_grids": grids}


def _gammas(text):
    return [float(t) for t in str(text).split(",") if t.strip()]


RUNNERS = {SimulateCommand: _run_simulate, CalibrateCommand: _run_calibrate,
           TestCommand: _run_test, StudyCommand: _run_study}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cmd = parse_and_validate(argv)
        if isinstance(cmd, tuple):
            result = _defaults(cmd[1])
        else:
            result = RUNNERS[type(cmd)](cmd)
        print(json.dumps(result, indent=2))
        return EXIT_OK
    except ValidationError as exc:
        _fail(exc)
        return EXIT_VALIDATION
    except NumericalError as exc:
        _fail(exc)
        return EXIT_NUMERICAL
    except (OSError, ValueError) as exc:
        _fail(exc)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001
        _fail(f"internal: {type(exc).__name__}: {exc}")
        return EXIT_INTERNAL


def _fail(message):
    text = " ".join(str(message).split())
    print(f"error: {text}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
