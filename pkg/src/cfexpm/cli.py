"""Command line front end: ``cfexpm run | bench SUITE | verify CHECK``.

Exit codes: 0 success, 1 failed checks or benchmark thresholds, 2 bad
parameters, 3 solver non-convergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

from .action import (
    STATS_VERSION,
    ParameterError,
    RunConfig,
    dumps,
    run_expm_action,
    stats_document,
)
from .arnoldi import ArnoldiError
from .cf import CfError
from .inverse import FactorizationError
from .mmio import MatrixMarketError, write_matrix_market
from .solver import NonConvergence, RunStats
from .toeplitz import ToeplitzError
from .verify import VERIFY_CHECKS

__all__ = ["main", "build_parser", "run_benchmark_suite", "load_suite"]

EXIT_OK, EXIT_FAIL, EXIT_PARAM, EXIT_NONCONV = 0, 1, 2, 3
REPORT_SCHEMA = "cfexpm.bench-report"

_PARAM_ERRORS = (ParameterError, MatrixMarketError, CfError, FactorizationError, ToeplitzError, ValueError)


def _rhs_random(text):
    try:
        p, seed = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected p,SEED, e.g. 3,0") from None
    return (p, seed)


def _json_object(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise argparse.ArgumentTypeError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise argparse.ArgumentTypeError("expected a JSON object")
    return doc


def _add_run_options(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--matrix", metavar="PATH", help="Matrix Market file holding A")
    src.add_argument("--generator", metavar="NAME", help="built-in test operator")
    p.add_argument("--gen-args", type=_json_object, default={}, metavar="JSON",
                   help='generator keyword arguments, e.g. \'{"k": 31}\'')
    rhs = p.add_mutually_exclusive_group(required=True)
    rhs.add_argument("--rhs", metavar="PATH", help="Matrix Market array holding B")
    rhs.add_argument("--rhs-random", type=_rhs_random, metavar="p,SEED", help="seeded standard normal B")
    rhs.add_argument("--rhs-generator", metavar="NAME", help="built-in right-hand side (fde_onesided_initial)")
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--nu", type=int, default=14)
    p.add_argument("--m", type=int, default=30)
    p.add_argument("--k", type=int, default=30)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-cycles", type=int, default=100)
    p.add_argument("--mode", choices=["sbfom", "psbfom"], default="psbfom")
    p.add_argument("--backend", choices=["sparse-lu", "toeplitz-gsf"], default="sparse-lu")
    p.add_argument("--oracle", action="store_true", help="compare with the dense exponential (n <= 2000)")
    p.add_argument("--out", metavar="PATH", help="write Z as a Matrix Market array")
    p.add_argument("--stats", metavar="PATH", help="write run statistics as JSON")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfexpm", description="exp(tA) B by CF rational approximation")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="compute exp(tA) B")
    _add_run_options(run)
    bench = sub.add_parser("bench", help="run a benchmark suite")
    bench.add_argument("suite", help="suite JSON file or a built-in suite name (acceptance)")
    bench.add_argument("--out", metavar="PATH", help="write the JSON report here")
    verify = sub.add_parser("verify", help="numerical checks of the solver identities")
    verify.add_argument("check", choices=[*VERIFY_CHECKS, "all"])
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--out", metavar="PATH", help="write the JSON report here")
    return parser


def _config_from_args(args) -> RunConfig:
    return RunConfig(
        matrix=args.matrix, generator=args.generator, gen_args=args.gen_args,
        rhs=args.rhs, rhs_random=args.rhs_random, rhs_generator=args.rhs_generator,
        t=args.t, nu=args.nu, m=args.m, k=args.k, tol=args.tol, max_cycles=args.max_cycles,
        mode=args.mode, backend=args.backend, oracle=args.oracle,
    )


def _write(path, text):
    if path:
        Path(path).write_text(text)


def _cmd_run(args) -> int:
    config = _config_from_args(args)
    try:
        Z, stats, error = run_expm_action(config)
    except NonConvergence as exc:
        _write(args.stats, dumps(stats_document(config, exc.stats, status="not-converged")))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONV
    except _PARAM_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAM
    except ArnoldiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    if args.out:
        write_matrix_market(args.out, Z)
    _write(args.stats, dumps(stats_document(config, stats)))
    msg = f"converged in {stats.cycles} cycles, {stats.operator_applies} operator applications"
    if error is not None:
        msg += f", error {error:.3e}"
    print(msg)
    return EXIT_OK


def load_suite(name_or_path) -> dict:
    path = Path(name_or_path)
    if path.exists():
        return json.loads(path.read_text())
    try:
        text = resources.files("cfexpm").joinpath(f"data/{name_or_path}_suite.json").read_text()
    except FileNotFoundError:
        raise ParameterError(f"no suite file or built-in suite named {name_or_path!r}") from None
    return json.loads(text)


def _threshold_failures(expect: dict, stats: RunStats, error) -> list:
    out = []
    if "max_cycles" in expect and stats.cycles > expect["max_cycles"]:
        out.append(f"cycles {stats.cycles} > {expect['max_cycles']}")
    if "max_error" in expect:
        if error is None:
            out.append("error threshold declared but oracle is off")
        elif not error <= expect["max_error"]:
            out.append(f"error {error:.3e} > {expect['max_error']:.1e}")
    if "ffts_per_inverse" in expect:
        per = stats.fft_count / stats.inverse_applies if stats.inverse_applies else float("nan")
        if per != expect["ffts_per_inverse"]:
            out.append(f"FFTs per inverse application {per} != {expect['ffts_per_inverse']}")
    return out


def run_benchmark_suite(suite: dict) -> dict:
    """Run every config in ``suite``; failures are recorded and the suite continues."""
    results = []
    for entry in suite.get("configs", []):
        name = entry.get("name", f"config-{len(results)}")
        row = {"name": name, "passed": False, "status": "ok", "failures": [], "stats": None, "error": None}
        try:
            config = RunConfig.from_dict(entry["config"])
            row["config"] = config.to_dict()
            Z, stats, error = run_expm_action(config)
            row["stats"], row["error"] = stats.to_dict(), error
            row["failures"] = _threshold_failures(entry.get("expect", {}), stats, error)
        except NonConvergence as exc:
            row["status"], row["stats"] = "not-converged", exc.stats.to_dict()
            row["failures"] = [str(exc)]
        except (*_PARAM_ERRORS, ArnoldiError, KeyError, TypeError) as exc:
            row["status"], row["failures"] = "error", [f"{type(exc).__name__}: {exc}"]
        row["passed"] = row["status"] == "ok" and not row["failures"]
        results.append(row)
    return {
        "schema": REPORT_SCHEMA,
        "version": STATS_VERSION,
        "suite": suite.get("name", "unnamed"),
        "results": results,
        "passed": all(r["passed"] for r in results),
    }


def format_report(report: dict) -> str:
    lines = [f"suite {report['suite']}: {len(report['results'])} configs"]
    lines.append(f"{'name':<28} {'result':<6} {'cycles':>6} {'applies':>8} {'error':>10}  notes")
    for r in report["results"]:
        cycles = r["stats"]["cycles"] if r["stats"] else "-"
        applies = r["stats"]["operator_applies"] if r["stats"] else "-"
        err = f"{r['error']:.2e}" if r["error"] is not None else "-"
        lines.append(f"{r['name']:<28} {'pass' if r['passed'] else 'FAIL':<6} {cycles:>6} {applies:>8} {err:>10}  "
                     + "; ".join(r["failures"]))
    return "\n".join(lines)


def _cmd_bench(args) -> int:
    try:
        suite = load_suite(args.suite)
    except (ParameterError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAM
    report = run_benchmark_suite(suite)
    _write(args.out, dumps(report))
    print(format_report(report))
    return EXIT_OK if report["passed"] else EXIT_FAIL


def _cmd_verify(args) -> int:
    names = list(VERIFY_CHECKS) if args.check == "all" else [args.check]
    reports = []
    for name in names:
        fn = VERIFY_CHECKS[name]
        reports.append(fn(seed=args.seed) if name != "cf" else fn())
    doc = {"schema": "cfexpm.verify-report", "version": STATS_VERSION, "seed": args.seed,
           "checks": reports, "passed": all(r["passed"] for r in reports)}
    text = dumps(doc)
    _write(args.out, text)
    print(text)
    return EXIT_OK if doc["passed"] else EXIT_FAIL


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "bench": _cmd_bench, "verify": _cmd_verify}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
