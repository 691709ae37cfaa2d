"""Command line driver: decompose, verify, sample, deriv.

Every run reads one JSON config, writes artifacts into an existing
output directory, and exits 0 only if all enabled checks pass.  Failing
checks are named on standard error.  Outputs are byte-identical across
runs and thread counts for a fixed config and seed.
"""

import argparse
import os
import sys

import numpy as np

from .analyticity import (
    contour_derivatives,
    derivative_bound_check,
    derivative_sum_residual,
    fd_agreement,
    fd_derivative,
    radius_agreement,
)
from .config import parse_config
from .decomposition import build_schedule, decompose
from .errors import FrdError, InsufficientScales, ParseError, ValidationError
from .output import (
    decay_csv_text,
    envelope_csv_text,
    kernel_csv_text,
    samples_csv_text,
    write_json,
    write_kernel_csv,
    write_text,
)
from .sampling import build_sampler, covariance_deviation, run_sampling_suite, sample_total
from .spectral import multiplier_to_kernel
from .verification import (
    ORACLE_LIMIT,
    brute_force_green,
    check_finite_range,
    check_psd,
    check_sum,
    check_symmetry,
    decay_table,
    envelope_report,
)

EXIT_OK = 0
EXIT_CHECK = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4

ORACLE_TOL = 1e-10
SYMMETRY_TOL = 1e-10
CONTRACTION_TOL = 1.0 + 1e-12
FD_TOL = 1e-5
RADIUS_TOL = 1e-8
DERIV_SUM_TOL = 1e-10
RATIO_LIMIT = 10.0
SE_LIMIT = 5.0

EPILOG = """\
exit codes:
  0  run completed and every enabled check passed
  1  run completed but at least one check failed (named on stderr)
  2  usage or configuration error
  3  I/O error (unreadable config, missing output directory)
  4  numerical or domain error (schedule, factorization, quadrature)
"""


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="frdlat",
        description="Finite range decomposition of lattice Green functions.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("decompose", "build scale kernels and diagnostics"),
        ("verify", "decompose plus oracle, invariant, decay, envelope checks"),
        ("sample", "draw scale fields and test empirical covariances"),
        ("deriv", "contour coefficient derivatives with convergence checks"),
    ):
        p = sub.add_parser(name, help=help_text, epilog=EPILOG,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", required=True, metavar="PATH", help="JSON run configuration")
        p.add_argument("--out", metavar="DIR", help="output directory (overrides config)")
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1, metavar="K",
                       help="worker thread bound (sampling only)")
        p.add_argument("--seed", type=int, metavar="U64", help="stream seed (overrides config)")
        p.add_argument("--samples", type=int, metavar="N", help="sample count (overrides config)")
    return parser


class CheckSet:
    def __init__(self):
        self.rows = []

    def add(self, name, passed, detail=""):
        self.rows.append((name, bool(passed), detail))

    def as_dict(self):
        return {name: passed for name, passed, _ in self.rows}

    def failures(self):
        return [(name, detail) for name, passed, detail in self.rows if not passed]


def _report_failures(checks: CheckSet) -> int:
    failures = checks.failures()
    for name, detail in failures:
        msg = "check failed: %s" % name
        if detail:
            msg += " (%s)" % detail
        print(msg, file=sys.stderr)
    return EXIT_CHECK if failures else EXIT_OK


def _decomposition_checks(result, tols, checks: CheckSet):
    diag = result.diagnostics
    checks.add(
        "sum_residual",
        diag["sum_residual"] <= tols["sum"],
        "%.3g > %.3g" % (diag["sum_residual"], tols["sum"]),
    )
    for k, res in enumerate(diag["range_residual"], start=1):
        if res is None:
            checks.add("range_residual_k%d" % k, True, "far region empty")
        else:
            checks.add(
                "range_residual_k%d" % k,
                res <= tols["range"],
                "%.3g > %.3g" % (res, tols["range"]),
            )
    for k, lo in enumerate(diag["min_psd_eig"], start=1):
        checks.add(
            "psd_min_k%d" % k, lo >= -tols["psd"], "%.3g < -%.3g" % (lo, tols["psd"])
        )
    checks.add(
        "imag_residue",
        diag["imag_residue"] <= tols["imag"],
        "%.3g > %.3g" % (diag["imag_residue"], tols["imag"]),
    )


def _write_decomposition(result, out_dir):
    for k in range(1, result.n_scales + 1):
        write_kernel_csv(os.path.join(out_dir, "kernel_k%d.csv" % k), result.kernel(k))
    write_json(os.path.join(out_dir, "diagnostics.json"), result.diagnostics)


def run_decompose(cfg, out_dir, threads) -> int:
    g = cfg.geometry()
    A = cfg.elliptic_map()
    sched = build_schedule(g, cfg.schedule)
    result = decompose(A, g, sched)
    _write_decomposition(result, out_dir)
    checks = CheckSet()
    _decomposition_checks(result, cfg.tolerances, checks)
    return _report_failures(checks)


def run_verify(cfg, out_dir, threads) -> int:
    g = cfg.geometry()
    A = cfg.elliptic_map()
    sched = build_schedule(g, cfg.schedule)
    result = decompose(A, g, sched)
    _write_decomposition(result, out_dir)
    checks = CheckSet()
    _decomposition_checks(result, cfg.tolerances, checks)

    report = {"tolerances": dict(cfg.tolerances), "diagnostics": result.diagnostics}
    if g.site_count * g.m <= ORACLE_LIMIT:
        oracle = brute_force_green(A, g)
        spectral = multiplier_to_kernel(result.green_table)
        diff = float(np.max(np.abs(oracle.values - spectral.values)))
        checks.add("oracle_green", diff <= ORACLE_TOL, "%.3g > %.3g" % (diff, ORACLE_TOL))
        report["oracle"] = {"performed": True, "max_abs_diff": diff}
    else:
        report["oracle"] = {"performed": False, "max_abs_diff": None}

    sum_residual = check_sum(result)
    checks.add(
        "recomputed_sum_residual",
        sum_residual <= cfg.tolerances["sum"],
        "%.3g > %.3g" % (sum_residual, cfg.tolerances["sum"]),
    )
    report["sum_residual"] = sum_residual
    report["range_residual"] = check_finite_range(result)
    report["psd_min"] = check_psd(result)
    sym = check_symmetry(result)
    checks.add("kernel_symmetry", sym <= SYMMETRY_TOL, "%.3g > %.3g" % (sym, SYMMETRY_TOL))
    report["symmetry"] = sym

    try:
        decay = decay_table(result)
    except InsufficientScales as exc:
        report["decay"] = {"performed": False, "reason": str(exc)}
    else:
        write_text(os.path.join(out_dir, "decay.csv"), decay_csv_text(decay))
        finite = all(np.isfinite(row.sup_norm) for row in decay.rows)
        checks.add("decay_finite", finite, "non-finite sup norm")
        report["decay"] = {
            "performed": True,
            "slopes": {
                ",".join(str(a) for a in alpha): val for alpha, val in decay.slopes.items()
            },
            "constants": {
                ",".join(str(a) for a in alpha): val
                for alpha, val in decay.fitted_constants.items()
            },
        }

    env = envelope_report(result)
    write_text(os.path.join(out_dir, "envelope.csv"), envelope_csv_text(env))
    checks.add(
        "contraction_bound",
        env.contraction_max <= CONTRACTION_TOL,
        "%.17g > 1 + 1e-12" % env.contraction_max,
    )
    finite_consts = all(
        np.isfinite(v) for v in (env.c_product, env.c_tm, env.c_low, env.c_high)
    )
    checks.add("envelope_constants_finite", finite_consts, "non-finite envelope constant")
    report["envelope"] = {
        "c_product": env.c_product,
        "c_tm": env.c_tm,
        "c_low": env.c_low,
        "c_high": env.c_high,
        "t_max": {str(k): v for k, v in env.level_t_max.items()},
        "r_max": {str(k): v for k, v in env.level_r_max.items()},
        "annulus_counts": env.annulus_counts,
    }

    report["checks"] = checks.as_dict()
    write_json(os.path.join(out_dir, "verify_report.json"), report)
    return _report_failures(checks)


def run_sample(cfg, out_dir, threads) -> int:
    g = cfg.geometry()
    A = cfg.elliptic_map()
    sched = build_schedule(g, cfg.schedule)
    result = decompose(A, g, sched)
    state = build_sampler(result, cfg.seed)
    n = cfg.samples
    suite = run_sampling_suite(state, n, threads)

    checks = CheckSet()
    report = {"n": n, "seed": cfg.seed, "root_residual": state.root_residual}
    green_kernel = multiplier_to_kernel(result.green_table)

    comp = {}
    for k in range(1, state.n_scales + 1):
        est = suite["component"][k]
        dev = covariance_deviation(est, result.kernel(k).values)
        checks.add(
            "covariance_k%d" % k, dev <= SE_LIMIT, "%.3g SE > %.3g SE" % (dev, SE_LIMIT)
        )
        comp[str(k)] = dev
        write_text(
            os.path.join(out_dir, "covariance_k%d.csv" % k), kernel_csv_text(est.mean, g)
        )
        write_text(
            os.path.join(out_dir, "covariance_k%d_se.csv" % k), kernel_csv_text(est.se, g)
        )
    report["component_deviation"] = comp

    total = suite["total"]
    dev = covariance_deviation(total, green_kernel.values)
    checks.add("covariance_total", dev <= SE_LIMIT, "%.3g SE > %.3g SE" % (dev, SE_LIMIT))
    report["total_deviation"] = dev
    write_text(os.path.join(out_dir, "covariance_total.csv"), kernel_csv_text(total.mean, g))
    write_text(
        os.path.join(out_dir, "covariance_total_se.csv"), kernel_csv_text(total.se, g)
    )

    grad = {}
    for k, rep in suite["gradient"].items():
        if rep is None:
            checks.add("gradient_range_k%d" % k, True, "far region empty")
            grad[str(k)] = None
            continue
        checks.add(
            "gradient_range_k%d" % k,
            rep.max_se_ratio <= SE_LIMIT,
            "%.3g SE > %.3g SE" % (rep.max_se_ratio, SE_LIMIT),
        )
        grad[str(k)] = {
            "r": rep.r,
            "far_sites": rep.far_sites,
            "max_abs": rep.max_abs,
            "max_se_ratio": rep.max_se_ratio,
            "trivial": rep.trivial,
        }
    report["gradient"] = grad

    if cfg.write_samples:
        values = [sample_total(state, i).values for i in range(n)]
        write_text(os.path.join(out_dir, "samples.csv"), samples_csv_text(values, g))

    report["checks"] = checks.as_dict()
    write_json(os.path.join(out_dir, "sample_report.json"), report)
    return _report_failures(checks)


def run_deriv(cfg, out_dir, threads) -> int:
    g = cfg.geometry()
    A = cfg.elliptic_map()
    sched = build_schedule(g, cfg.schedule)
    result = decompose(A, g, sched)
    path = cfg.derivative_path(A)
    order = cfg.derivative["order"]
    r = cfg.derivative["r"]
    n_half = cfg.derivative["nodes"]

    orders = sorted(set(range(0, max(order, 3) + 1)))
    ders = contour_derivatives(path, g, sched, orders, r=r, n_half=n_half)
    main_res = ders[order]
    alt = contour_derivatives(path, g, sched, [order], r=0.5 * r, n_half=n_half)[order]
    fd_kernels, fd_green = fd_derivative(path, g, sched)

    checks = CheckSet()
    fd_diff = fd_agreement(ders[1], fd_kernels, fd_green)
    checks.add("fd_agreement", fd_diff <= FD_TOL, "%.3g > %.3g" % (fd_diff, FD_TOL))
    r_diff = radius_agreement(main_res, alt)
    checks.add("radius_invariance", r_diff <= RADIUS_TOL, "%.3g > %.3g" % (r_diff, RADIUS_TOL))
    sum_res = derivative_sum_residual(main_res)
    checks.add(
        "derivative_telescoping",
        sum_res <= DERIV_SUM_TOL,
        "%.3g > %.3g" % (sum_res, DERIV_SUM_TOL),
    )
    bound = derivative_bound_check(result, [ders[j] for j in orders if j >= 1])
    checks.add(
        "derivative_ratios",
        bound.max_ratio <= RATIO_LIMIT,
        "%.3g > %.3g" % (bound.max_ratio, RATIO_LIMIT),
    )

    for k in range(1, result.n_scales + 1):
        write_kernel_csv(os.path.join(out_dir, "deriv_k%d.csv" % k), main_res.kernel(k))
    write_kernel_csv(os.path.join(out_dir, "deriv_green.csv"), main_res.green_kernel)

    report = {
        "order": order,
        "r": r,
        "nodes": main_res.n_nodes,
        "convergence": main_res.convergence,
        "fd_diff": fd_diff,
        "radius_diff": r_diff,
        "sum_residual": sum_res,
        "max_ratio": bound.max_ratio,
        "ratios": [
            {"k": row.k, "order": row.order, "ratio": row.ratio}
            for row in bound.rows
        ],
    }
    report["checks"] = checks.as_dict()
    write_json(os.path.join(out_dir, "deriv_report.json"), report)
    return _report_failures(checks)


RUNNERS = {
    "decompose": run_decompose,
    "verify": run_verify,
    "sample": run_sample,
    "deriv": run_deriv,
}


def main(argv=None) -> int:
    parser = build_arg_parser()
    args = parser.parse_args(argv)

    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print("cannot read config: %s" % exc, file=sys.stderr)
        return EXIT_IO
    try:
        cfg = parse_config(text)
    except (ParseError, ValidationError) as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG

    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            print("config error: seed must fit in 64 bits", file=sys.stderr)
            return EXIT_CONFIG
        cfg.seed = args.seed
    if args.samples is not None:
        if args.samples < 1:
            print("config error: samples must be >= 1", file=sys.stderr)
            return EXIT_CONFIG
        cfg.samples = args.samples
    if args.out is not None:
        cfg.output = args.out
    if cfg.output is None:
        print(
            "config error: no output directory (set output in config or pass --out)",
            file=sys.stderr,
        )
        return EXIT_CONFIG
    if not os.path.isdir(cfg.output):
        print("output directory does not exist: %s" % cfg.output, file=sys.stderr)
        return EXIT_IO
    threads = max(1, args.threads)

    try:
        return RUNNERS[args.command](cfg, cfg.output, threads)
    except OSError as exc:
        print("I/O error: %s" % exc, file=sys.stderr)
        return EXIT_IO
    except (FrdError, ValueError) as exc:
        print("%s: %s" % (type(exc).__name__, exc), file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
