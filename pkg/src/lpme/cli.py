"""Command-line entry point: ``lpme <command> ...``.

Exit status is 0 exactly when every check embedded in the command passes.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import shlex
import sys

from . import bounds as bd
from . import channels as ch
from . import harness as hs
from .core import RngStream


def _global_flags(parser, suppress: bool):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=default, help="master seed (overrides the config)")
    parser.add_argument("--workers", type=int, default=default, help="worker processes for sweeps")
    parser.add_argument("--trials", type=int, default=default, help="replications per cell (overrides the config)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lpme", description="Locally private multinomial and density estimation.")
    _global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("multinomial", "density"):
        p = sub.add_parser(name, parents=[common], help=f"run a {name} sweep from a JSON config")
        p.add_argument("--config", required=True)
        p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("audit", parents=[common], help="audit a channel's privacy level")
    p.add_argument("--mechanism", required=True, choices=ch.MECHANISMS)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--dims", type=int, required=True)
    p.add_argument("--basis-bound", type=float, default=None)
    p.add_argument("--tolerance", type=float, default=1e-9)
    p.add_argument("--out", required=True)

    p = sub.add_parser("bounds", parents=[common], help="packings, information and Fano bounds, rate predictions")
    p.add_argument("--problem", required=True, choices=("multinomial", "density"))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--d", type=int)
    p.add_argument("--s", type=int, help="packing weight (multinomial; default max(1, d // 4))")
    p.add_argument("--delta", type=float, help="packing scale (multinomial; default min(1, sqrt(d/(n eps^2))))")
    p.add_argument("--beta", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("slope", parents=[common], help="fit the log-log slope of mse against n")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--mechanism", required=True)
    p.add_argument("--epsilon", type=float, default=None, help="omit for non-private baselines")
    p.add_argument("--expected", type=float, default=None)
    p.add_argument("--tolerance", type=float, default=0.1)
    return parser


def _write_json(path, payload):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, default=hs._json_default)
        fh.write("\n")


def cmd_sweep(args, argv) -> int:
    spec = hs.ExperimentSpec.from_json(args.config)
    if spec.problem != args.command:
        print(f"config problem is {spec.problem!r}, not {args.command!r}", file=sys.stderr)
        return 2
    data = spec.to_dict()
    if args.seed is not None:
        data["seed"] = args.seed
    if args.trials is not None:
        data["trials"] = args.trials
    spec = hs.ExperimentSpec.from_dict(data)
    rows = hs.run_sweep(spec, workers=args.workers or 1)
    checks = hs.evaluate_checks(spec, rows)
    command = "lpme " + " ".join(shlex.quote(a) for a in argv)
    summary = hs.emit_outputs(rows, hs.fits_for(rows), args.out, checks, spec, command)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: measured={c.measured}")
    return 0 if summary["all_pass"] else 1


def cmd_audit(args) -> int:
    kw = {}
    if args.mechanism in ch.SERIES_MECHANISMS and args.basis_bound is not None:
        kw["basis_bound"] = args.basis_bound
    cfg = ch.ChannelConfig(args.mechanism, args.epsilon, args.dims, **kw)
    report = ch.audit_channel(cfg, tolerance=args.tolerance)
    _write_json(args.out, report.to_dict())
    print(report.to_json())
    return 0 if report.passed else 1


def cmd_bounds(args) -> int:
    rng = RngStream(args.seed or 0, 0)
    eps = args.epsilon
    checks = []
    out = {"problem": args.problem, "n": args.n, "epsilon": eps, "c_epsilon": None}
    in_range = 0 < eps <= bd.EPS_VALIDITY
    if in_range:
        out["c_epsilon"] = bd.c_epsilon(eps)
    if args.problem == "multinomial":
        if args.d is None:
            print("--d is required for the multinomial problem", file=sys.stderr)
            return 2
        d = args.d
        s = args.s or max(1, d // 4)
        delta = args.delta if args.delta is not None else min(1.0, math.sqrt(d / (args.n * eps * eps)))
        pred = bd.predict_rates("multinomial", args.n, eps, d=d)
        packing = bd.build_weighted_packing(d, s, rng)
        # ||theta_nu - theta_nu'||^2 = (delta/s)^2 * l1(nu - nu') for binary vectors
        min_dist_sq = (delta / s) ** 2 * packing.min_l1_separation
        info = bd.info_bound_multinomial(args.n, eps, delta, s, packing) if in_range else None
        out.update({"d": d, "s": s, "delta": delta})
    else:
        if args.beta is None or args.k is None:
            print("--beta and --k are required for the density problem", file=sys.stderr)
            return 2
        pred = bd.predict_rates("density", args.n, eps, beta=args.beta)
        packing = bd.build_sign_packing(args.k, rng)
        dp = bd.DensityPacking(args.beta, args.k, packing)
        min_dist_sq = dp.min_distance_sq()
        bump = bd.bump_function(args.beta)
        info = bd.info_bound_density(args.n, eps, args.k, args.beta, packing, bump.c_half) if in_range else None
        out.update({"beta": args.beta, "k": args.k, "c_half": bump.c_half})
    fano = None
    if info is not None and packing.log_cardinality > math.log(2.0):
        fano = bd.fano_bound(min_dist_sq / 4.0, info, packing.log_cardinality)
    out.update(
        {
            "predict_rates": pred.to_dict(),
            "packing": packing.to_dict(),
            "min_pair_distance_sq": min_dist_sq,
            "info_bound": info,
            "fano_bound": fano,
        }
    )
    checks.append({"name": "packing_certified", "pass": packing.min_l1_separation > 0})
    checks.append({"name": "lower_below_upper", "pass": pred.private_lower <= pred.private_upper + 1e-15})
    if fano is not None:
        checks.append({"name": "fano_nonnegative", "pass": fano >= 0.0})
    out["checks"] = checks
    _write_json(args.out, out)
    ok = all(c["pass"] for c in checks)
    print(json.dumps({"info_bound": info, "fano_bound": fano, "pass": ok}))
    return 0 if ok else 1


def cmd_slope(args) -> int:
    rows = hs.read_results_csv(args.inp)
    fit = hs.fit_rows(rows, args.mechanism, args.epsilon)
    result = {"mechanism": args.mechanism, "epsilon": args.epsilon, **fit.to_dict()}
    ok = True
    if args.expected is not None:
        ok = abs(fit.slope - args.expected) <= args.tolerance
        result.update({"expected_exponent": args.expected, "tolerance": args.tolerance, "pass": ok})
    print(json.dumps(result))
    return 0 if ok else 1


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    try:
        if args.command in ("multinomial", "density"):
            return cmd_sweep(args, argv)
        if args.command == "audit":
            return cmd_audit(args)
        if args.command == "bounds":
            return cmd_bounds(args)
        return cmd_slope(args)
    except (ValueError, OSError, bd.PackingError) as err:
        print(f"lpme: error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
