"""Command-line interface: ``fwdboot {fit,predict,interval,benchmark}``.

Exit codes: 0 success, 1 usage error, 2 bad input data, 3 numerical failure.
"""
import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import __version__
from .bench import PRESET_HELP, PRESETS, emit_table, load_config, preset_config, run_experiment, with_overrides
from .engine import fit_forecaster, ppi_from_fit, qpi_from_fit
from .exceptions import DataError, EmptyFile, FwdbootError, NumericalError, ParseError
from .kernel_regress import KernelSpec

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def ingest_csv(path):
    """Read a one-column CSV of numbers; a non-numeric first row is a header.

    Blank lines are ignored. Rows are numbered from 1 as in a text editor.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        text = fh.read()
    values = []
    for row, line in enumerate(text.splitlines(), start=1):
        cell = line.strip()
        if not cell:
            continue
        try:
            v = float(cell)
        except ValueError:
            if row == 1:
                continue
            raise ParseError(row, f"not a number: {cell!r}") from None
        if not math.isfinite(v):
            raise ParseError(row, f"non-finite value {cell!r}")
        values.append(v)
    if not values:
        raise EmptyFile(f"{path}: no data rows")
    return np.array(values)


def _preset_epilog():
    lines = ["benchmark presets:"]
    for name in PRESETS:
        family = name.split("-")[0]
        lines.append(f"  {name:<14} {PRESET_HELP.get(family, '')}")
    return "\n".join(lines)


def build_parser():
    p = _Parser(prog="fwdboot", description="Nonparametric forward-bootstrap forecasting of "
                "nonlinear autoregressions.", epilog=_preset_epilog(),
                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    def common(sp, randomized=True):
        sp.add_argument("input", help="CSV file, one value per row (optional header)")
        sp.add_argument("--residuals", choices=("fitted", "predictive"), default="fitted",
                        help="residual kind (default: fitted)")
        sp.add_argument("--strategy", choices=("B1", "B2", "opv"), default="B2",
                        help="bandwidth strategy (default: B2)")
        sp.add_argument("--kernel", choices=("epanechnikov", "gaussian"), default="epanechnikov",
                        help="kernel (default: epanechnikov)")
        sp.add_argument("--homoscedastic", action="store_true",
                        help="constant volatility instead of a kernel fit")
        sp.add_argument("--residual-bandwidth", choices=("optimal", "strategy"),
                        default="optimal",
                        help="fit giving the residuals: the cross-validated one or the "
                             "strategy's own (default: optimal)")
        sp.add_argument("--bandwidth", type=float, default=None,
                        help="use this h_op instead of cross-validation")
        sp.add_argument("--output", "-o", default="-", help="output file (default: stdout)")
        if randomized:
            sp.add_argument("-k", "--horizon", type=int, default=1, help="steps ahead (default: 1)")
            sp.add_argument("-M", "--paths", type=int, default=1000,
                            help="simulated paths (default: 1000)")
            sp.add_argument("--alpha", type=float, default=0.05, help="level (default: 0.05)")
            sp.add_argument("--seed", type=int, default=None,
                            help="master seed (default: drawn from entropy and reported)")
            sp.add_argument("--format", choices=("json", "csv", "markdown"), default="json",
                            help="output format (default: json)")
            sp.add_argument("--threads", type=int, default=1,
                            help="worker cap; results do not depend on it (default: 1)")

    sp = sub.add_parser("fit", help="select bandwidths and fit the model")
    common(sp, randomized=False)

    sp = sub.add_parser("predict", help="L2 and L1 point predictions")
    common(sp)

    sp = sub.add_parser("interval", help="point predictions with QPI and optionally PPI")
    common(sp)
    sp.add_argument("-B", "--replicates", type=int, default=None,
                    help="bootstrap replicates; enables the PPI (default: off)")
    sp.add_argument("--inner-paths", type=int, default=100,
                    help="paths per PPI replicate (default: 100)")

    sp = sub.add_parser("benchmark", help="run a Monte-Carlo study",
                        epilog=_preset_epilog(), formatter_class=argparse.RawDescriptionHelpFormatter)
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=sorted(PRESETS), metavar="NAME",
                     help="named study, see the list below")
    src.add_argument("--config", help="JSON configuration file")
    sp.add_argument("--n", type=int, default=None, help="replications (default: preset's 500)")
    sp.add_argument("-B", "--replicates", type=int, default=None, help="PPI replicates")
    sp.add_argument("--seed", type=int, default=None,
                    help="master seed (default: drawn from entropy and reported)")
    sp.add_argument("--paper-scale", action="store_true", help="N=5000 and B=500")
    sp.add_argument("--threads", type=int, default=1, help="worker processes (default: 1)")
    sp.add_argument("--format", choices=("markdown", "csv", "json"), default="markdown",
                    help="output format (default: markdown)")
    sp.add_argument("--output", "-o", default="-", help="output file (default: stdout)")
    return p


def _resolve_seed(seed, err):
    if seed is None:
        seed = int(np.random.SeedSequence().entropy % 2**63)
        print(f"seed: {seed}", file=err)
    return seed


def _fit(args):
    x = ingest_csv(args.input)
    return fit_forecaster(x, args.strategy, args.residuals, kernel=KernelSpec(args.kernel),
                          homoscedastic=args.homoscedastic, h_op=args.bandwidth,
                          residual_bandwidth=args.residual_bandwidth)


def _fit_summary(fit):
    bw = fit.bandwidth
    b = fit.model.bounds
    r = fit.dist.centered_values
    return {
        "n": int(fit.sample.size),
        "h_op": fit.h_op,
        "bandwidth": {"strategy": bw.strategy, "h": bw.h_est, "g": bw.g_gen, "h_var": bw.h_var},
        "bounds": {"mean_cap": b.mean_cap, "sd_floor": b.sd_floor, "sd_cap": b.sd_cap},
        "residuals": {
            "kind": fit.residual_kind,
            "bandwidth": fit.residual_bandwidth,
            "count": int(r.size),
            "excluded": int(fit.dist.diagnostics.get("excluded_residuals", 0)),
            "sd": float(np.std(r)),
            "min": float(r[0]),
            "q25": float(np.quantile(r, 0.25)),
            "median": float(np.median(r)),
            "q75": float(np.quantile(r, 0.75)),
            "max": float(r[-1]),
        },
        "diagnostics": fit.diagnostics,
    }


def _render_prediction(data, fmt):
    if fmt == "json":
        return json.dumps(data, indent=2) + "\n"
    cols = ["step", "l2_point", "l1_point"]
    extra = [c for c in ("qpi", "ppi_l2", "ppi_l1") if data["steps"] and c in data["steps"][0]]
    header = cols + [f"{c}_{s}" for c in extra for s in ("lower", "upper")]
    rows = [[row["step"], row["l2_point"], row["l1_point"]] + [v for c in extra for v in row[c]]
            for row in data["steps"]]
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows([[repr(v) if isinstance(v, float) else v for v in r] for r in rows])
        return buf.getvalue()
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    for r in rows:
        lines.append("| " + " | ".join(f"{v:.4f}" if isinstance(v, float) else str(v) for v in r) + " |")
    return "\n".join(lines) + "\n"


def _write(text, path, out):
    if path == "-":
        out.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def dispatch(args, out=None, err=None):
    """Run a parsed command; returns the exit code."""
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    if args.verb == "fit":
        _write(json.dumps(_fit_summary(_fit(args)), indent=2) + "\n", args.output, out)
        return EXIT_OK

    if args.verb in ("predict", "interval"):
        if args.horizon < 1:
            raise UsageError("horizon must be at least 1")
        if args.paths < 2:
            raise UsageError("need at least 2 paths")
        if not 0 < args.alpha < 1:
            raise UsageError("alpha must lie in (0, 1)")
        B = getattr(args, "replicates", None)
        if B is not None and B < 1:
            raise UsageError("replicates must be positive")
        seed = _resolve_seed(args.seed, err)
        fit = _fit(args)
        rng = np.random.default_rng(seed)
        if B is not None:
            if fit.sample.size < 20:
                raise DataError("PPI needs at least 20 observations")
            res = ppi_from_fit(fit, args.horizon, B, args.inner_paths, args.alpha, rng)
            # the QPI uses the full path budget, not the PPI's inner paths
            res.qpi = qpi_from_fit(fit, args.horizon, args.paths, args.alpha,
                                   np.random.default_rng([seed, 1])).qpi
        else:
            res = qpi_from_fit(fit, args.horizon, args.paths, args.alpha, rng)
        data = res.to_dict(intervals=args.verb == "interval")
        data["seed"] = seed
        _write(_render_prediction(data, args.format), args.output, out)
        return EXIT_OK

    # benchmark
    if args.n is not None and args.n < 1:
        raise UsageError("--n must be positive")
    if args.threads < 1:
        raise UsageError("--threads must be positive")
    seed = _resolve_seed(args.seed, err)
    if args.preset:
        config = preset_config(args.preset, paper_scale=args.paper_scale, N=args.n,
                               B=args.replicates, seed=seed)
    else:
        try:
            config = load_config(args.config)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, (FileNotFoundError, json.JSONDecodeError)):
                raise
            raise UsageError(f"bad config {args.config}: {exc}") from None
        if args.paper_scale:
            config = with_overrides(config, N=5000, B=500)
        config = with_overrides(config, N=args.n, B=args.replicates, seed=seed)
    table = run_experiment(config, workers=args.threads)
    _write(emit_table(table, args.format), args.output, out)
    return EXIT_OK


def main(argv=None, out=None, err=None):
    err = sys.stderr if err is None else err
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return dispatch(args, out, err)
    except UsageError as exc:
        print(f"fwdboot: usage error: {exc}", file=err)
        return EXIT_USAGE
    except (FileNotFoundError, IsADirectoryError, UnicodeDecodeError) as exc:
        print(f"fwdboot: cannot read input: {exc}", file=err)
        return EXIT_DATA
    except (DataError, json.JSONDecodeError) as exc:
        print(f"fwdboot: data error: {exc}", file=err)
        return EXIT_DATA
    except (NumericalError, ArithmeticError) as exc:
        print(f"fwdboot: numerical failure: {exc}", file=err)
        return EXIT_NUMERIC
    except (FwdbootError, ValueError) as exc:
        print(f"fwdboot: {exc}", file=err)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
