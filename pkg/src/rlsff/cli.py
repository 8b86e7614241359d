"""Command-line front end.

Exit codes: 0 success, 1 a check failed (or the data is not exciting),
2 configuration or usage error, 3 file system error, 4 malformed CSV.
"""

import argparse
import logging
import os
import sys

import numpy as np

from . import formats
from .batch import History
from .checks import DEFAULT_SEARCH_MAX, run_verification
from .errors import InvalidConfigurationError, NumericalDegeneracyError
from .excitation import min_window_for_pe, pe_analyze
from .simulation import generate, trace_from_data

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_CSV = 4


class _Exit(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _load_config(path):
    try:
        return formats.load_config(path)
    except InvalidConfigurationError as exc:
        raise _Exit(EXIT_CONFIG, f"invalid configuration: {exc}") from None
    except OSError as exc:
        raise _Exit(EXIT_IO, f"cannot read config: {exc}") from None


def _load_data(path):
    try:
        return formats.read_data_csv(path)
    except formats.CSVFormatError as exc:
        raise _Exit(EXIT_CSV, f"malformed data file {path}: {exc}") from None
    except UnicodeDecodeError as exc:
        raise _Exit(EXIT_CSV, f"malformed data file {path}: {exc}") from None
    except OSError as exc:
        raise _Exit(EXIT_IO, f"cannot read data: {exc}") from None


def _write(path, text):
    try:
        formats.atomic_write(path, text)
    except OSError as exc:
        raise _Exit(EXIT_IO, f"cannot write {path}: {exc}") from None


def _check_dims(config, history):
    if (history.m, history.n) != (config.m, config.n):
        raise _Exit(
            EXIT_CONFIG,
            f"data dimensions m={history.m}, n={history.n} do not match "
            f"config m={config.m}, n={config.n}",
        )


def _estimate(config, history, theta_true=None):
    try:
        return trace_from_data(config, history.psis, history.ys, theta_true)
    except NumericalDegeneracyError as exc:
        raise _Exit(EXIT_FAILED, f"estimator failed at sample {exc.step}: {exc}") from None


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {value}")
    return value


def _nonnegative_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be nonnegative, got {value}")
    return value


def _default_trace_path(out):
    root, ext = os.path.splitext(out)
    return f"{root}.trace{ext or '.csv'}"


def cmd_simulate(args):
    config, scenario = _load_config(args.config)
    if scenario is None:
        raise _Exit(EXIT_CONFIG, "invalid configuration: scenario: missing")
    try:
        spec = formats.parse_scenario(
            scenario, config.m, config.n, args.steps, args.noise_bound, args.seed
        )
    except InvalidConfigurationError as exc:
        raise _Exit(EXIT_CONFIG, f"invalid configuration: {exc}") from None
    psis, ys = generate(spec)
    trace = _estimate(config, History(psis, ys), spec.theta_true)
    _write(args.out, formats.format_data_csv(psis, ys))
    _write(args.trace_out or _default_trace_path(args.out), formats.format_trace_csv(trace))
    return EXIT_OK


def cmd_estimate(args):
    config, _ = _load_config(args.config)
    history = _load_data(args.data)
    _check_dims(config, history)
    trace = _estimate(config, history)
    _write(args.out, formats.format_estimate_csv(trace))
    return EXIT_OK


def cmd_analyze_pe(args):
    history = _load_data(args.data)
    if args.window is not None:
        S = args.window
    else:
        S = min_window_for_pe(history.psis, args.search_max)
        if S is None:
            print(f"S = none (searched up to {args.search_max})")
            print("satisfied = False")
            return EXIT_FAILED
    if len(history) < S + 1:
        raise _Exit(EXIT_CSV, f"data has {len(history)} rows, too few for window S={S}")
    report = pe_analyze(history.psis, S)
    print(f"S = {report.S}")
    print(f"alpha = {formats.fmt(report.alpha)}")
    print(f"beta = {formats.fmt(report.beta)}")
    print(f"satisfied = {report.satisfied}")
    return EXIT_OK if report.satisfied else EXIT_FAILED


def _parse_theta(text, m):
    try:
        theta = np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise _Exit(EXIT_CONFIG, f"--theta-true is not a comma-separated list: {text!r}") from None
    if theta.shape != (m,):
        raise _Exit(EXIT_CONFIG, f"--theta-true needs {m} values, got {theta.size}")
    return theta


def cmd_verify(args):
    config, _ = _load_config(args.config)
    if args.theta_true is None:
        raise _Exit(EXIT_CONFIG, "--theta-true is required")
    theta_true = _parse_theta(args.theta_true, config.m)
    history = _load_data(args.data)
    _check_dims(config, history)
    trace = _estimate(config, history, theta_true)
    result = run_verification(
        trace.states, history, theta_true, S=args.window, strict=args.strict,
        search_max=args.search_max,
    )

    pe, cert = result.pe_report, result.certificate
    if pe is not None:
        print(f"S = {pe.S}")
        print(f"alpha = {formats.fmt(pe.alpha)}")
        print(f"beta = {formats.fmt(pe.beta)}")
    if cert is not None:
        print(f"gamma = {formats.fmt(cert.gamma)}")
        print(f"p_inv_lower_bound = {formats.fmt(cert.p_inv_lower_bound)}")
    print(f"{'check':<22} {'status':<6} {'gating':<6} {'worst_margin':>24} first_violation")
    for item in result.results:
        r = item.report
        status = "PASS" if r.passed else "FAIL"
        first = "-" if r.first_violation is None else str(r.first_violation)
        line = (
            f"{r.name:<22} {status:<6} {'yes' if item.gating else 'no':<6} "
            f"{formats.fmt(r.worst_margin):>24} {first}"
        )
        if r.reason:
            line += f"  ({r.reason})"
        print(line)
    print("overall = " + ("PASS" if result.passed else "FAIL"))
    return EXIT_OK if result.passed else EXIT_FAILED


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rlsff", description="Recursive least squares with forgetting factor"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate data from the config's scenario and estimate")
    p.add_argument("--config", required=True)
    p.add_argument("--steps", required=True, type=_positive_int)
    p.add_argument("--out", required=True, help="data CSV path")
    p.add_argument("--trace-out", help="trace CSV path (default: <out>.trace.csv)")
    p.add_argument("--noise-bound", type=float)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="run the estimator over a data CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("analyze-pe", help="persistence-of-excitation constants of a data CSV")
    p.add_argument("--data", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--window", type=_nonnegative_int)
    group.add_argument("--search-max", type=_nonnegative_int)
    p.set_defaults(func=cmd_analyze_pe)

    p = sub.add_parser("verify", help="run the convergence and consistency checks")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--theta-true", help="comma-separated true parameter vector")
    p.add_argument("--window", type=_nonnegative_int, help="excitation window S")
    p.add_argument("--search-max", type=_nonnegative_int, default=DEFAULT_SEARCH_MAX)
    p.add_argument("--strict", action="store_true",
                   help="let the noise-free convergence checks decide the exit code")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _Exit as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
