"""Command-line entry point: solve, semigroup, transport, entropy, verify, sweep.

Exit status: 0 when every check passes, 1 when one fails, 2 on a
configuration or usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .checks import (
    ALL_CHECKS,
    CheckSpec,
    _clean,
    main_theorem_pipeline,
    run_suite,
    solve_case,
)
from .config import RunConfig, load_config
from .entropy import OrliczContext, entropy_alpha, luxemburg_norm
from .errors import AlphaRangeError, ConfigError, FpkError
from .measure import DensityFn, integrate
from .semigroup import SemigroupParams, apply_Tt
from .transport import w1_probability

log = logging.getLogger("fpkverify")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
SWEEP_ALPHAS = (0.05, 0.1, 0.15, 0.2, 0.24)
EXPLORE_ALPHAS = (0.3, 0.4, 0.45)
CSV_FIELDS = ("name", "drift", "lhs", "rhs", "margin", "discretization_error", "tolerance", "passed")


def _dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True)


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig.default()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.order is not None:
        cfg.grids.order_1d = args.order
    return cfg


def _out_dir(args, cfg: RunConfig) -> Path:
    return Path(args.out or cfg.output_dir)


def _solution(args, cfg: RunConfig):
    case = cfg.find_drift(args.drift)
    return case, solve_case(case, cfg.grids)


def cmd_solve(args) -> int:
    cfg = _load(args)
    case, sol = _solution(args, cfg)
    path = _out_dir(args, cfg) / f"solution_{case.name}.json"
    _write(path, _dumps(sol.to_dict()) + "\n")
    print(_dumps({"drift": case.name, "residual": sol.residual, "v_l1_mu": sol.v_l1_mu, "file": str(path)}))
    return EXIT_OK


def cmd_semigroup(args) -> int:
    cfg = _load(args)
    case, sol = _solution(args, cfg)
    Tf = apply_Tt(sol.f, SemigroupParams(args.t))
    change = integrate(sol.f.grid, np.abs(Tf.values - sol.f.values))
    path = _out_dir(args, cfg) / f"semigroup_{case.name}_t{args.t:g}.json"
    _write(path, _dumps({"t": args.t, "drift": case.name, "grid": sol.f.grid.to_dict(), "values": Tf.values,
                         "l1_change": change}) + "\n")
    print(_dumps({"drift": case.name, "t": args.t, "l1_change": change, "file": str(path)}))
    return EXIT_OK


def cmd_transport(args) -> int:
    cfg = _load(args)
    case, sol = _solution(args, cfg)
    one = DensityFn.constant(sol.f.grid, 1.0, probability=True)
    if sol.dim == 1:
        r = w1_probability(sol.f, one)
    else:
        r = w1_probability(sol.f, one, cfg.grids.transport_method, cfg.grids.coarse_cells)
    print(_dumps({"drift": case.name, "kantorovich": r.value, "method": r.method,
                  "error_estimate": r.error_estimate, "v_l1_mu": sol.v_l1_mu}))
    return EXIT_OK


def cmd_entropy(args) -> int:
    cfg = _load(args)
    case, sol = _solution(args, cfg)
    alpha = args.alpha if args.alpha is not None else 0.2
    ctx = OrliczContext(alpha, sol.f.grid)
    print(_dumps({"drift": case.name, "alpha": alpha, "entropy": entropy_alpha(sol.f, alpha),
                  "luxemburg": luxemburg_norm(sol.f, ctx)}))
    return EXIT_OK


def _selected_checks(args, cfg: RunConfig) -> list:
    specs = list(cfg.checks)
    if args.check:
        unknown = [c for c in args.check if c not in ALL_CHECKS]
        if unknown:
            raise ConfigError(f"unknown check {unknown[0]!r}")
        by_name = {s.name: s for s in specs}
        specs = [by_name.get(name, CheckSpec(name)) for name in dict.fromkeys(args.check)]
    for spec in specs:
        if spec.name == "main_theorem":
            if args.alpha is not None:
                spec.alpha = args.alpha
            spec.explore = spec.explore or args.explore
            if spec.alpha is not None and spec.alpha >= 0.25 and not spec.explore:
                raise AlphaRangeError(f"alpha={spec.alpha} >= 1/4 requires --explore")
    return specs


def _reports_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in reports:
        d = r.to_dict()
        w.writerow([d[k] for k in CSV_FIELDS])
    return buf.getvalue()


def cmd_verify(args) -> int:
    cfg = _load(args)
    cfg.checks = _selected_checks(args, cfg)
    reports = run_suite(cfg)
    out = _out_dir(args, cfg)
    lines = []
    for r in reports:
        d = r.to_dict()
        if not args.timings:
            d.pop("runtime_ms")
        lines.append(_dumps(d))
    if "jsonl" in cfg.formats:
        _write(out / "reports.jsonl", "".join(line + "\n" for line in lines))
    if "csv" in cfg.formats:
        _write(out / "summary.csv", _reports_csv(reports))
    for r in reports:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.name} {r.drift} margin={r.margin:.3e} ({r.runtime_ms:.0f} ms)"
              + (f" error={r.error}" if r.error else ""))
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def _alphas(args) -> list[float]:
    if args.alphas:
        try:
            return [float(a) for a in args.alphas.split(",") if a.strip()]
        except ValueError:
            raise ConfigError(f"cannot parse --alphas {args.alphas!r}") from None
    if args.alpha is not None:
        return [args.alpha]
    return list(SWEEP_ALPHAS + (EXPLORE_ALPHAS if args.explore else ()))


def cmd_sweep(args) -> int:
    cfg = _load(args)
    alphas = _alphas(args)
    if any(a >= 0.25 for a in alphas) and not args.explore:
        raise AlphaRangeError("alpha >= 1/4 requires --explore")
    if any(not 0.0 < a < 0.5 for a in alphas):
        raise ConfigError("alphas must lie in (0, 1/2)")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("drift", "alpha", "beta", "V", "entropy", "ratio", "N"))
    for case in cfg.drift_cases():
        if case.dim != 1 or case.precision is not None:
            continue
        sol = solve_case(case, cfg.grids)
        for a in alphas:
            res = main_theorem_pipeline(sol, a, explore=args.explore)
            w.writerow((case.name, repr(a), repr(res["beta"]), repr(res["V"]), repr(res["entropy"]),
                        repr(res["ratio"]), res["N"]))
    path = _out_dir(args, cfg) / "sweep.csv"
    _write(path, buf.getvalue())
    sys.stdout.write(buf.getvalue())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, help="TOML run configuration (default: built-in suite)")
    common.add_argument("--out", type=str, help="output directory")
    common.add_argument("--seed", type=int, help="seed for sampled checks")
    common.add_argument("--order", type=int, help="Gauss-Hermite order for 1D solutions")
    common.add_argument("--alpha", type=float, help="entropy exponent")
    common.add_argument("--explore", action="store_true", help="allow alpha >= 1/4 (ratios only)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="fpkverify", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="solve the stationary equation for one drift")
    p.add_argument("--drift", required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("semigroup", parents=[common], help="apply T_t to a stationary density")
    p.add_argument("--drift", required=True)
    p.add_argument("--t", type=float, required=True)
    p.set_defaults(func=cmd_semigroup)

    p = sub.add_parser("transport", parents=[common], help="Kantorovich distance to the Gaussian")
    p.add_argument("--drift", required=True)
    p.set_defaults(func=cmd_transport)

    p = sub.add_parser("entropy", parents=[common], help="entropy functional and Luxemburg norm")
    p.add_argument("--drift", required=True)
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("verify", parents=[common], help="run the verification suite")
    p.add_argument("--check", action="append", help="restrict to this check (repeatable)")
    p.add_argument("--timings", action="store_true", help="include runtimes in the JSONL reports")
    p.add_argument("--report", dest="out", help="report directory (same as --out)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", parents=[common], help="empirical entropy-bound ratios as CSV")
    p.add_argument("--alphas", type=str, help="comma-separated alpha values")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, AlphaRangeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FpkError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
