"""Command-line surface for the toolkit.

Subcommands: ingest, metrics, forecast, estimate, fit-arrival, report.
Outputs are byte-deterministic for fixed inputs (and seed, for the
Monte Carlo path); diagnostics go to stderr.  Exit codes: 0 success,
1 validation or domain error, 2 I/O error, 3 numerical
non-convergence.  Rate flags take fractions (0.07, not 7); outputs
print both forms.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from collections.abc import Sequence
from datetime import timedelta
from pathlib import Path

from . import charts, ledger, metrics, rayleigh, revisions, sizing
from .errors import DivergenceError, NonConvergenceError, ValidationError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_NUMERIC = 3


class _CliError(Exception):
    """Argument-grammar violation; maps to the validation exit code."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: ANN201 - argparse signature
        raise _CliError(message)


def _read_text(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _write_text(path: str, text: str) -> None:
    # Text is always fully computed before this point, so a failed
    # command never leaves a half-written output file behind.
    Path(path).write_text(text, encoding="utf-8")


def emit_table(grid: revisions.RevisionGrid) -> str:
    """Grid as CSV, efficiency rows by injection-rate columns."""
    return revisions.grid_to_csv(grid)


def emit_chart(data: object) -> str:
    """Render whichever chartable object this is to SVG."""
    if isinstance(data, ledger.ArrivalSeries):
        return charts.arrival_chart(data.counts)
    if isinstance(data, revisions.RevisionTrajectory):
        return charts.line_chart(data.expected_defects)
    if isinstance(data, rayleigh.RayleighFit):
        buckets = max(3, math.ceil(4.0 * data.sigma))
        return charts.line_chart(
            rayleigh.expected_bucket_counts(data.k_total, data.sigma, buckets),
            title="Fitted defect arrivals",
            x_label="bucket",
            y_label="expected defects",
        )
    if (
        isinstance(data, (list, tuple))
        and data
        and all(isinstance(p, sizing.SizePoint) for p in data)
    ):
        return charts.scatter_chart([(p.uf, p.issues) for p in data])
    raise ValidationError(f"no chart form for {type(data).__name__}")


def _build_parser() -> _Parser:
    parser = _Parser(prog="defectlab", description="Defect analytics toolkit")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("ingest", help="validate a defect CSV and product JSON into a ledger")
    p.add_argument("--defects", required=True, help="defect log CSV path")
    p.add_argument("--products", required=True, help="product registry JSON path")
    p.add_argument("--out", required=True, help="ledger JSON output path")

    p = sub.add_parser("metrics", help="quality metrics per product from a ledger")
    p.add_argument("--ledger", required=True, help="ledger JSON path")
    p.add_argument("--product", help="restrict to one product id")
    p.add_argument("--format", choices=("json", "csv"), default="json")

    p = sub.add_parser("forecast", help="revisions to sign-off from injection/removal rates")
    p.add_argument("--units", required=True, type=int, help="units of work in the build")
    p.add_argument("--dir", type=float, help="defect injection rate, as a fraction")
    p.add_argument("--dre", type=float, help="defect removal efficiency, as a fraction")
    p.add_argument("--threshold", type=float, default=revisions.SIGNOFF_THRESHOLD,
                   help="sign-off threshold on expected residual defects")
    p.add_argument("--monte-carlo", action="store_true", help="simulate instead of recurring")
    p.add_argument("--trials", type=int, help="Monte Carlo trial count")
    p.add_argument("--seed", type=int, help="Monte Carlo seed (required with --monte-carlo)")
    p.add_argument("--table", action="store_true",
                   help="emit the full rate grid instead of a single forecast")
    p.add_argument("--format", choices=("json", "csv"), default="json",
                   help="output form for --table")

    p = sub.add_parser("estimate", help="expected issues from model size")
    p.add_argument("--uf", type=int, help="unique formula count to estimate for")
    p.add_argument("--model", choices=("linear", "sqrt", "both"), default="both")
    p.add_argument("--fit", help="scatter CSV (uf,issues) to fit models to")

    p = sub.add_parser("fit-arrival", help="fit the arrival model to a bucketed series")
    p.add_argument("--series", required=True, help="CSV with columns bucket_start,count")
    p.add_argument("--bucket-days", type=float, help="expected bucket width in days")
    p.add_argument("--out", help="write fit JSON here instead of stdout")

    p = sub.add_parser("report", help="arrival chart (SVG) with fitted overlay from a ledger")
    p.add_argument("--ledger", required=True, help="ledger JSON path")
    p.add_argument("--svg", required=True, help="SVG output path")
    p.add_argument("--product", help="restrict to one product id")
    p.add_argument("--bucket-days", type=float, default=7.0, help="arrival bucket width in days")

    return parser


def _cmd_ingest(args: argparse.Namespace) -> int:
    records = ledger.parse_defect_log(_read_text(args.defects))
    profiles = ledger.parse_product_registry(_read_text(args.products))
    text = ledger.dump_ledger(profiles, records)
    _write_text(args.out, text)
    print(json.dumps({"products": len(profiles), "defects": len(records), "out": args.out}))
    return EXIT_OK


def _cmd_metrics(args: argparse.Namespace) -> int:
    profiles, records = ledger.load_ledger(_read_text(args.ledger))
    if args.product is not None:
        profiles = [p for p in profiles if p.product_id == args.product]
        if not profiles:
            raise ValidationError(f"unknown product {args.product!r}")
    by_product: dict[str, list[ledger.DefectRecord]] = {}
    for record in records:
        by_product.setdefault(record.product_id, []).append(record)
    summaries = [
        metrics.summarize(by_product.get(p.product_id, []), p) for p in profiles
    ]
    if args.format == "csv":
        sys.stdout.write(metrics.summaries_to_csv(summaries))
    else:
        sys.stdout.write(metrics.summaries_to_json(summaries))
    return EXIT_OK


def _rates_payload(params: revisions.ProcessParams) -> dict:
    return {
        "units": params.units,
        "injection_rate": params.injection_rate,
        "injection_rate_pct": params.injection_rate * 100.0,
        "removal_efficiency": params.removal_efficiency,
        "removal_efficiency_pct": params.removal_efficiency * 100.0,
        "threshold": params.threshold,
    }


def _cmd_forecast(args: argparse.Namespace) -> int:
    if args.table:
        if args.monte_carlo:
            raise ValidationError("--table and --monte-carlo are mutually exclusive")
        grid = revisions.revision_table(args.units, threshold=args.threshold)
        sys.stdout.write(
            emit_table(grid) if args.format == "csv" else revisions.grid_to_json(grid)
        )
        return EXIT_OK
    if args.format == "csv":
        raise ValidationError("--format csv applies only to --table output")
    if args.dir is None or args.dre is None:
        raise ValidationError("forecast needs --dir and --dre (or --table)")
    params = revisions.ProcessParams(
        units=args.units,
        injection_rate=args.dir,
        removal_efficiency=args.dre,
        threshold=args.threshold,
    )
    if args.monte_carlo:
        if args.trials is None or args.seed is None:
            raise ValidationError("--monte-carlo needs --trials and --seed")
        outcome = revisions.simulate_monte_carlo(params, args.trials, args.seed)
        payload = _rates_payload(params) | {
            "trials": outcome.trials,
            "seed": outcome.seed,
            "mean_revisions": outcome.mean_revisions,
            "censored": outcome.censored,
            "histogram": outcome.histogram,
        }
    else:
        trajectory = revisions.revisions_to_signoff(params)
        payload = _rates_payload(params) | {
            "revisions": trajectory.revisions,
            "expected_defects": list(trajectory.expected_defects),
        }
    print(json.dumps(payload, indent=2))
    return EXIT_OK


def _cmd_estimate(args: argparse.Namespace) -> int:
    if (args.uf is None) == (args.fit is None):
        raise ValidationError("estimate needs exactly one of --uf or --fit")
    if args.uf is not None:
        payload: dict = {"uf": args.uf}
        if args.model in ("linear", "both"):
            model = sizing.DEFAULT_LINEAR_MODEL
            payload["linear"] = {
                "intercept": model.intercept,
                "slope": model.slope,
                "estimate": sizing.linear_estimate(args.uf, model),
            }
        if args.model in ("sqrt", "both"):
            sqrt_model = sizing.DEFAULT_SQRT_MODEL
            payload["sqrt"] = {
                "coefficient": sqrt_model.coefficient,
                "estimate": sizing.sqrt_estimate(args.uf, sqrt_model),
            }
    else:
        points = sizing.parse_scatter(_read_text(args.fit))
        payload = {"points": len(points)}
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            if args.model in ("linear", "both"):
                linear = sizing.fit_linear(points)
                payload["linear"] = {
                    "intercept": linear.intercept,
                    "slope": linear.slope,
                    "rss": sizing.residual_sum_of_squares(
                        points, lambda uf: sizing.linear_estimate(uf, linear)
                    ),
                }
            if args.model in ("sqrt", "both"):
                sqrt_fit = sizing.fit_sqrt(points)
                payload["sqrt"] = {
                    "coefficient": sqrt_fit.coefficient,
                    "rss": sizing.residual_sum_of_squares(
                        points, lambda uf: sizing.sqrt_estimate(uf, sqrt_fit)
                    ),
                }
        for caught_warning in caught:
            print(f"warning: {caught_warning.message}", file=sys.stderr)
    print(json.dumps(payload, indent=2))
    return EXIT_OK


def _parse_series_csv(text: str) -> tuple[list[int], float | None]:
    """Parse bucket_start,count rows; return counts and inferred width.

    Starts may be ISO UTC timestamps or plain numbers (day offsets).
    Spacing must be uniform; the inferred width is in days, or None
    when a single row leaves it undetermined.
    """
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ValidationError("series file is empty; expected a header row")
    if tuple(rows[0]) != ("bucket_start", "count"):
        raise ValidationError(
            f"series header mismatch: expected bucket_start,count, got {','.join(rows[0])}"
        )
    starts: list[float] = []
    counts: list[int] = []
    diagnostics: list[str] = []
    for row_no, row in enumerate(rows[1:], start=1):
        if not row:
            continue
        if len(row) != 2:
            diagnostics.append(f"row {row_no}: expected 2 fields, got {len(row)}")
            continue
        raw_start, raw_count = (field.strip() for field in row)
        try:
            try:
                start_days = float(raw_start)
                if not math.isfinite(start_days):
                    raise ValidationError(f"bucket_start must be finite, got {raw_start!r}")
            except ValueError:
                stamp = ledger.parse_timestamp(raw_start)
                start_days = stamp.timestamp() / 86400.0
        except ValidationError as exc:
            diagnostics.append(f"row {row_no}: {exc}")
            continue
        try:
            count = int(raw_count)
        except ValueError:
            diagnostics.append(f"row {row_no}: count must be an integer, got {raw_count!r}")
            continue
        if count < 0:
            diagnostics.append(f"row {row_no}: count must be >= 0, got {count}")
            continue
        starts.append(start_days)
        counts.append(count)
    if diagnostics:
        raise ValidationError("series file failed validation", diagnostics)
    if not counts:
        raise ValidationError("series file has no data rows")
    if len(starts) == 1:
        return counts, None
    width = starts[1] - starts[0]
    if width <= 0:
        raise ValidationError("bucket_start values must be strictly increasing")
    for i in range(1, len(starts) - 1):
        gap = starts[i + 1] - starts[i]
        if abs(gap - width) > 1e-6 * max(1.0, abs(width)):
            raise ValidationError(
                f"bucket spacing is not uniform: gap after row {i + 1} is {gap:g} "
                f"days, expected {width:g}"
            )
    return counts, width


def _cmd_fit_arrival(args: argparse.Namespace) -> int:
    counts, inferred = _parse_series_csv(_read_text(args.series))
    bucket_days = args.bucket_days
    if bucket_days is not None and (not math.isfinite(bucket_days) or bucket_days <= 0):
        raise ValidationError(f"--bucket-days must be positive, got {bucket_days}")
    if bucket_days is not None and inferred is not None:
        if abs(bucket_days - inferred) > 1e-6 * max(1.0, abs(inferred)):
            raise ValidationError(
                f"--bucket-days {bucket_days:g} does not match the file's "
                f"spacing of {inferred:g} days"
            )
    if bucket_days is None:
        bucket_days = inferred
    fit = rayleigh.fit_arrival(counts)
    payload = {
        "k_total": fit.k_total,
        "sigma": fit.sigma,
        "sigma_days": None if bucket_days is None else fit.sigma * bucket_days,
        "bucket_days": bucket_days,
        "sse": fit.sse,
        "buckets_used": fit.buckets_used,
        "cumulative_at_peak": fit.k_total * rayleigh.PEAK_FRACTION,
    }
    text = json.dumps(payload, indent=2) + "\n"
    if args.out:
        _write_text(args.out, text)
        print(json.dumps({"out": args.out}))
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    profiles, records = ledger.load_ledger(_read_text(args.ledger))
    scope = "all products"
    if args.product is not None:
        if not any(p.product_id == args.product for p in profiles):
            raise ValidationError(f"unknown product {args.product!r}")
        records = [r for r in records if r.product_id == args.product]
        scope = args.product
    if not records:
        raise ValidationError("no defect records to chart")
    if not math.isfinite(args.bucket_days) or args.bucket_days <= 0:
        raise ValidationError(f"--bucket-days must be positive, got {args.bucket_days}")
    series = ledger.arrival_series(records, timedelta(days=args.bucket_days))

    fitted = None
    fit_payload = None
    fit_note = None
    if len(series.counts) >= 3:
        try:
            fit = rayleigh.fit_arrival(series)
            fitted = rayleigh.expected_bucket_counts(fit.k_total, fit.sigma, len(series.counts))
            fit_payload = {
                "k_total": fit.k_total,
                "sigma": fit.sigma,
                "sigma_days": fit.sigma * args.bucket_days,
                "sse": fit.sse,
                "buckets_used": fit.buckets_used,
            }
        except (NonConvergenceError, ValidationError) as exc:
            fit_note = str(exc)
    else:
        fit_note = "too few buckets for an arrival fit (need 3)"

    svg = charts.arrival_chart(series.counts, fitted, title=f"Defect arrivals: {scope}")
    _write_text(args.svg, svg)
    print(json.dumps({
        "defects": len(records),
        "buckets": len(series.counts),
        "bucket_days": args.bucket_days,
        "fit": fit_payload,
        "fit_note": fit_note,
        "svg": args.svg,
    }, indent=2))
    return EXIT_OK


_HANDLERS = {
    "ingest": _cmd_ingest,
    "metrics": _cmd_metrics,
    "forecast": _cmd_forecast,
    "estimate": _cmd_estimate,
    "fit-arrival": _cmd_fit_arrival,
    "report": _cmd_report,
}


def run(argv: Sequence[str] | None = None) -> int:
    """Parse argv, dispatch, and map errors to exit codes."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_VALIDATION
    try:
        return _HANDLERS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (DivergenceError, NonConvergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


def main() -> None:
    sys.exit(run(sys.argv[1:]))
