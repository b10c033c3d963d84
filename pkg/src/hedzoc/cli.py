"""Command line entry point with run, sweep, constants, and check commands."""
from __future__ import annotations

import argparse
import sys

from .harness import (
    ConfigError,
    check_experiment,
    constants_for_config,
    parse_config,
    run_experiment,
    sweep,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


def _fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _cmd_run(args) -> int:
    cfg = parse_config(args.config)
    trace, path = run_experiment(cfg, out_dir=args.out_dir)
    last = len(trace.k) - 1
    print(f"wrote {path}")
    print(
        f"k={int(trace.k[last])} grad_norm_sq={_fmt(float(trace.grad_norm_sq[last]))} "
        f"consensus_err={_fmt(float(trace.consensus_err[last]))} "
        f"opt_gap={_fmt(float(trace.opt_gap[last]))} "
        f"bits={int(trace.bits_cum[last])} fn_evals={int(trace.fn_evals_cum[last])}"
    )
    if trace.diverged:
        print(f"diverged: {trace.divergence_info}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


def _parse_values(axis: str, raw: str) -> list:
    parts = [part.strip() for part in raw.split(",") if part.strip()]
    if not parts:
        raise ConfigError("sweep needs at least one value")
    if axis in ("n", "T"):
        return [int(part) for part in parts]
    if axis == "rho_h":
        return [float(part) for part in parts]
    return parts


def _cmd_sweep(args) -> int:
    cfg = parse_config(args.config)
    values = _parse_values(args.axis, args.values)
    result = sweep(
        cfg, args.axis, values, seeds=args.seeds,
        out_dir=args.out_dir, summary_name=args.summary,
    )
    print(f"wrote {result.csv_path}")
    for pt in result.points:
        print(
            f"{args.axis}={pt.value} avg_grad_norm_sq={_fmt(pt.avg_grad_norm_sq)} "
            f"final_opt_gap={_fmt(pt.final_opt_gap)} total_bits={_fmt(pt.total_bits)} "
            f"failures={pt.failures}/{pt.seeds}"
        )
    if result.exponent is not None:
        print(f"fitted exponent {_fmt(result.exponent)} (stderr {_fmt(result.exponent_stderr)})")
    for value, offset, msg in result.failures:
        print(f"failure at {args.axis}={value} seed offset {offset}: {msg}", file=sys.stderr)
    total_runs = len(values) * args.seeds
    if len(result.failures) == total_runs:
        return EXIT_FAILURE
    return EXIT_OK


def _cmd_constants(args) -> int:
    cfg = parse_config(args.config)
    out = constants_for_config(cfg)
    for name, value in out.as_dict().items():
        print(f"{name}={_fmt(value)}")
    return EXIT_OK


def _cmd_check(args) -> int:
    cfg = parse_config(args.config)
    report = check_experiment(cfg)
    for line in report.lines:
        status = "ok  " if line.passed else "FAIL"
        print(f"{status} {line.name}: {line.detail}")
    print("all checks passed" if report.passed else "some checks failed")
    return EXIT_OK if report.passed else EXIT_FAILURE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hedzoc",
        description="Compressed decentralized zeroth-order optimization experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment and write its trace CSV")
    p_run.add_argument("config", help="config file path (sectioned key=value or JSON)")
    p_run.add_argument("--out-dir", default=None, help="directory for relative output paths")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a grid along one axis and summarize")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--axis", required=True, choices=("n", "T", "compressor", "rho_h"))
    p_sweep.add_argument("--values", required=True, help="comma-separated grid values")
    p_sweep.add_argument("--seeds", type=int, default=1, help="ensemble size per grid value")
    p_sweep.add_argument("--summary", default="sweep_summary.csv", help="summary CSV name")
    p_sweep.add_argument("--out-dir", default=None)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_const = sub.add_parser("constants", help="print the derived constants roster")
    p_const.add_argument("config")
    p_const.set_defaults(func=_cmd_constants)

    p_check = sub.add_parser("check", help="audit assumptions, graph, compressor, and invariants")
    p_check.add_argument("config")
    p_check.set_defaults(func=_cmd_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
