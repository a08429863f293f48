"""``elldet`` command line: run suites, replay cases, list identities."""

import argparse
import json
import sys

from .harness import (
    ConfigError, RunConfig, parse_grid, parse_identities, replay, report_to_dict,
    run_suite)
from .report import ANCHORS, IdentityId


def _config_from_args(args):
    if args.config:
        with open(args.config) as fh:
            cfg = RunConfig.from_json(fh.read())
        over = {}
        if args.format:
            over["output_format"] = args.format
        return RunConfig(**{**cfg.__dict__, **over}) if over else cfg
    kw = {}
    try:
        if args.identities:
            kw["identities"] = parse_identities(args.identities)
        if args.grid:
            kw["grid"] = parse_grid(args.grid)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    for name, key in (("draws", "draws_per_cell"), ("seed", "seed"), ("tol", "tolerance"),
                      ("pmax", "p_modulus_max"), ("format", "output_format")):
        v = getattr(args, name)
        if v is not None:
            kw[key] = v
    return RunConfig(**kw)


def cmd_run(args):
    try:
        cfg = _config_from_args(args)
    except (ConfigError, OSError) as e:
        print(f"elldet: config error: {e}", file=sys.stderr)
        return 2
    out = open(args.output, "w") if args.output else sys.stdout
    try:
        summary = run_suite(cfg, out, jobs=args.jobs)
    finally:
        if args.output:
            out.close()
    print(f"{summary.passed}/{summary.total} passed, worst residual "
          f"{summary.worst_residual:.3e}, wall time {summary.wall_time:.1f} s",
          file=sys.stderr)
    return 0 if summary.passed == summary.total else 1


def cmd_replay(args):
    try:
        rec, rep = replay(args.report, args.case)
    except (KeyError, ValueError, OSError) as e:
        print(f"elldet: {e}", file=sys.stderr)
        return 2
    fresh = report_to_dict(rep)
    same = fresh["rel_residual"] == rec.get("rel_residual")
    print(json.dumps({"case": args.case, "stored_residual": rec.get("rel_residual"),
                      "replayed": fresh, "identical_residual": same}, sort_keys=True))
    return 0 if rep.passed else 1


def cmd_list(args):
    width = max(len(i.value) for i in IdentityId)
    for ident in IdentityId:
        print(f"{ident.value:<{width}}  {ANCHORS[ident]}")
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="elldet", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run identity checks over a grid of block sizes")
    run.add_argument("--config", help="JSON file mirroring RunConfig")
    run.add_argument("--identities", help="comma separated ids, or 'all'")
    run.add_argument("--grid", help="comma separated r1xr2 cells, or n<=N")
    run.add_argument("--draws", type=int, help="draws per cell")
    run.add_argument("--seed", type=int)
    run.add_argument("--tol", type=float, help="relative residual tolerance")
    run.add_argument("--pmax", type=float, help="largest sampled |p|")
    run.add_argument("--format", choices=("json", "csv", "text"))
    run.add_argument("--jobs", type=int, default=1, help="worker processes")
    run.add_argument("--output", "-o", help="write the report here instead of stdout")
    run.set_defaults(func=cmd_run)

    rp = sub.add_parser("replay", help="re-evaluate one case of a JSON report")
    rp.add_argument("--report", required=True)
    rp.add_argument("--case", type=int, required=True)
    rp.set_defaults(func=cmd_replay)

    ls = sub.add_parser("list", help="identity ids and what they check")
    ls.set_defaults(func=cmd_list)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
