"""Command-line front end: analyze, reproduce, diffusion, birkhoff.

Reports are written as JSON (tables also as CSV) into ``--out``; the
exit code is 0 exactly when every requested check passed its tolerance.
"""

import argparse
import json
import os
import sys
from importlib import resources

from . import reporting
from .errors import ReactimeError
from .kernel import kernel_from_dict

_PARAM_FLAGS = ("p", "q", "r", "a", "b", "c", "d")


def _load_kernel_spec(path):
    if os.path.exists(path):
        with open(path) as fh:
            return json.load(fh)
    bundled = resources.files("reactime.data").joinpath(os.path.basename(path))
    if bundled.is_file():
        return json.loads(bundled.read_text())
    raise FileNotFoundError(f"kernel file {path!r} not found (and no bundled "
                            "kernel has that name)")


def _collect_params(args):
    params = {}
    for name in _PARAM_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            params[name] = value
    for item in args.param or []:
        name, _, value = item.partition("=")
        if not value:
            raise ValueError(f"--param expects name=value, got {item!r}")
        params[name] = float(value)
    return params


def _emit(report, args, stem, tables=None):
    out_dir = args.out
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        reporting.write_report(report, os.path.join(out_dir, f"{stem}.json"))
        for name, rows in (tables or {}).items():
            reporting.write_csv(rows, os.path.join(out_dir, f"{stem}_{name}.csv"))
    if args.format == "json" or not out_dir:
        json.dump(report, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    for check in report["checks"]:
        status = "PASS" if check["passed"] else "FAIL"
        print(f"[{status}] {check['name']}: {check['value']:.6g}"
              + (f" (tol {check['tolerance']:g})" if check["tolerance"] else ""),
              file=sys.stderr)
    return 0 if report["passed"] else 1


def _cmd_analyze(args):
    spec = _load_kernel_spec(args.kernel)
    kernel = kernel_from_dict(spec, params=_collect_params(args))
    report = reporting.analyze_kernel(kernel, seed=args.seed,
                                      tol=args.tol or reporting.DEFAULT_TOL)
    return _emit(report, args, "analyze")


def _cmd_reproduce(args):
    grid = None
    if args.grid:
        grid = [float(v) for v in args.grid.split(",")]
    report = reporting.reproduce_table(args.scenario, grid=grid, seed=args.seed)
    return _emit(report, args, f"reproduce_{args.scenario}",
                 tables={"table": report["results"]["rows"]})


def _cmd_diffusion(args):
    with open(args.config) as fh:
        config = json.load(fh)
    report, traces = reporting.run_diffusion_experiment(config, seed=args.seed)
    return _emit(report, args, "diffusion", tables=traces)


def _cmd_birkhoff(args):
    spec = _load_kernel_spec(args.kernel)
    kernel = kernel_from_dict(spec, params=_collect_params(args))
    report = reporting.run_birkhoff(kernel, target_tv=args.target_tv,
                                    trials=args.trials, seed=args.seed)
    trace = report["results"].get("certified_qsd", {}).get("bound_trace", [])
    return _emit(report, args, "birkhoff",
                 tables={"bound_trace": [{"iteration": i, "bound": b}
                                         for i, b in enumerate(trace)]})


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed")
    common.add_argument("--tol", type=float, default=None,
                        help="identity tolerance override")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--format", choices=("json", "csv"), default="json")

    parser = argparse.ArgumentParser(
        prog="reactime",
        description="Mean reaction times of metastable Markov processes",
        parents=[common],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", parents=[common],
                             help="full exact analysis of a kernel")
    analyze.add_argument("kernel", help="kernel JSON file (or bundled name, "
                         "e.g. toy_a1.json)")
    for name in _PARAM_FLAGS:
        analyze.add_argument(f"--{name}", type=float, default=None)
    analyze.add_argument("--param", action="append",
                         help="extra parameter as name=value")
    analyze.set_defaults(fn=_cmd_analyze)

    reproduce = sub.add_parser("reproduce", parents=[common],
                               help="closed-form comparison tables")
    reproduce.add_argument("scenario", choices=("A1", "A1rev", "A2", "B"))
    reproduce.add_argument("--grid", default=None,
                           help="comma-separated grid values")
    reproduce.set_defaults(fn=_cmd_reproduce)

    diffusion = sub.add_parser("diffusion", parents=[common],
                              help="run a diffusion experiment")
    diffusion.add_argument("config", help="experiment config JSON")
    diffusion.set_defaults(fn=_cmd_diffusion)

    birk = sub.add_parser("birkhoff", parents=[common],
                          help="certified QSD of the killed block")
    birk.add_argument("kernel")
    for name in _PARAM_FLAGS:
        birk.add_argument(f"--{name}", type=float, default=None)
    birk.add_argument("--param", action="append")
    birk.add_argument("--target-tv", type=float, default=1e-8)
    birk.add_argument("--trials", type=int, default=1000)
    birk.set_defaults(fn=_cmd_birkhoff)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ReactimeError, FileNotFoundError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
