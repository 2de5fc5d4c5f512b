"""Command-line interface.

Exit codes: 0 on success, 1 when a verification verdict fails, 2 on usage,
configuration or input errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .beta import beta_minmax, beta_pca_bound
from .energy import EnergySpec, EstimatorConfig, curve_energy, estimate_energy
from .errors import BudgetExceededError, ConfigError, InvalidInputError, ParseError
from .experiments import EXPERIMENTS, ExperimentConfig, run_experiment
from .manifold import generate, load_point_cloud, save_point_cloud
from .seminorms import besov_second_difference, gagliardo_seminorm, load_grid_function

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _param(text: str):
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


def _emit(obj: dict, output: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if output:
        Path(output).write_text(text, encoding="utf-8")
    sys.stdout.write(text)


def _cmd_generate(args) -> int:
    params = dict(args.param or [])
    res = int(args.resolution) if float(args.resolution).is_integer() and args.shape != "graph_alpha" \
        else args.resolution
    M = generate(args.shape, res, **params)
    save_point_cloud(M, args.output)
    print(json.dumps({"output": str(args.output), "N": M.N, "m": M.m, "n": M.n, "label": M.label}))
    return EXIT_OK


def _estimator(args) -> EstimatorConfig:
    method = {"mc": "monte_carlo"}.get(args.method, args.method)
    return EstimatorConfig(method=method, samples=args.samples, seed=args.seed, lam=args.lam,
                           rho=args.rho, sup_candidates=args.sup_candidates, workers=args.workers,
                           chunk_size=args.chunk_size, max_tuples=args.max_tuples)


def _cmd_energy(args) -> int:
    M = load_point_cloud(args.input, m=args.m)
    if M.m != args.m:
        raise ConfigError(f"--m {args.m} disagrees with the file's intrinsic dimension {M.m}")
    est = _estimator(args)
    if args.variant:
        result = curve_energy(M, args.variant, args.p, est)
    else:
        if args.k is None:
            raise ConfigError("--k is required unless --variant is given")
        result = estimate_energy(M, EnergySpec(M.m, M.n, args.k, args.p), est)
    _emit(result.to_dict(), args.output)
    return EXIT_OK


def _cmd_beta(args) -> int:
    M = load_point_cloud(args.input, m=args.m)
    if args.x is not None:
        x = M.points[args.x]
    else:
        x = np.array(args.center, dtype=float)
    fn = beta_minmax if args.method == "minmax" else beta_pca_bound
    results = [fn(M, x, r).to_dict() for r in args.r]
    _emit({"input": str(args.input), "results": results}, args.output)
    return EXIT_OK


def _cmd_seminorm(args) -> int:
    g = load_grid_function(args.grid)
    if args.order == 1:
        if args.s is None:
            raise ConfigError("--order 1 needs --s")
        value = gagliardo_seminorm(g, args.s, args.p)
        out = {"order": 1, "s": args.s}
    else:
        if args.sigma is None:
            raise ConfigError("--order 2 needs --sigma")
        value = besov_second_difference(g, args.sigma, args.p)
        out = {"order": 2, "sigma": args.sigma}
    out.update({"p": args.p, "seminorm_p": value, "m": g.m, "h": g.h, "nodes": len(g.grid),
                "kind": g.kind})
    _emit(out, args.output)
    return EXIT_OK


def _print_verdicts(verdicts) -> None:
    for v in verdicts:
        print(f"{v['status']}  {v['name']}: {v['rule']}")


def _cmd_verify(args) -> int:
    try:
        data = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    data.setdefault("experiment", args.experiment)
    if data["experiment"] != args.experiment:
        raise ConfigError(f"config is for {data['experiment']!r}, not {args.experiment!r}")
    if args.output:
        data["output"] = args.output
    report = run_experiment(ExperimentConfig.from_dict(data))
    _print_verdicts(report.verdicts)
    if report.config.get("output"):
        print(f"report written to {Path(report.config['output']).with_suffix('.json')}")
    return EXIT_OK if report.passed else EXIT_FAIL


def _cmd_report(args) -> int:
    try:
        data = json.loads(Path(args.input).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read report {args.input}: {exc}") from None
    missing = {"experiment", "config", "table", "exponents", "verdicts", "environment"} - set(data)
    if missing:
        raise ConfigError(f"not a report: missing {sorted(missing)}")
    print(f"experiment: {data['experiment']}")
    for label, ex in sorted(data["exponents"].items()):
        print(f"  {label}: {json.dumps(ex, sort_keys=True)}")
    _print_verdicts(data["verdicts"])
    ok = all(v["status"] == "PASS" for v in data["verdicts"])
    return EXIT_OK if ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="integral-menger",
                                 description="Discrete Menger-type energies, beta numbers and seminorms.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a sampled manifold to CSV")
    g.add_argument("--shape", required=True)
    g.add_argument("--resolution", type=float, required=True,
                   help="node count, or grid spacing for graph_alpha")
    g.add_argument("--param", type=_param, action="append", metavar="KEY=VALUE")
    g.add_argument("--output", required=True)
    g.set_defaults(func=_cmd_generate)

    e = sub.add_parser("compute-energy", help="estimate E_p^k or a curve energy")
    e.add_argument("--input", required=True)
    e.add_argument("--m", type=int, required=True)
    e.add_argument("--k", type=int)
    e.add_argument("--p", type=float, required=True)
    e.add_argument("--variant", choices=["U_p", "I_p", "M_p"])
    e.add_argument("--method", choices=["exhaustive", "mc", "monte_carlo"], default="exhaustive")
    e.add_argument("--samples", type=int, default=100_000)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--lambda", dest="lam", type=float)
    e.add_argument("--rho", type=float)
    e.add_argument("--sup-candidates", default="auto")
    e.add_argument("--workers", type=int, default=1)
    e.add_argument("--chunk-size", type=int, default=10_000)
    e.add_argument("--max-tuples", type=float, default=1e8)
    e.add_argument("--output")
    e.set_defaults(func=_cmd_energy)

    b = sub.add_parser("beta", help="Jones beta numbers at one centre")
    b.add_argument("--input", required=True)
    b.add_argument("--m", type=int)
    where = b.add_mutually_exclusive_group(required=True)
    where.add_argument("--x", type=int, help="index of the centre sample point")
    where.add_argument("--center", type=float, nargs="+")
    b.add_argument("--r", type=float, nargs="+", required=True)
    b.add_argument("--method", choices=["minmax", "pca_bound"], default="minmax")
    b.add_argument("--output")
    b.set_defaults(func=_cmd_beta)

    s = sub.add_parser("seminorm", help="fractional seminorm (to the power p) of a grid function")
    s.add_argument("--grid", required=True)
    s.add_argument("--order", type=int, choices=[1, 2], required=True)
    s.add_argument("--s", type=float)
    s.add_argument("--sigma", type=float)
    s.add_argument("--p", type=float, required=True)
    s.add_argument("--output")
    s.set_defaults(func=_cmd_seminorm)

    v = sub.add_parser("verify", help="run an experiment and judge it")
    v.add_argument("--experiment", choices=EXPERIMENTS, required=True)
    v.add_argument("--config", required=True)
    v.add_argument("--output", help="report path prefix (.json and .csv are written)")
    v.set_defaults(func=_cmd_verify)

    r = sub.add_parser("report", help="summarise a report JSON")
    r.add_argument("--input", required=True)
    r.set_defaults(func=_cmd_report)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except (ConfigError, InvalidInputError, ParseError, BudgetExceededError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
