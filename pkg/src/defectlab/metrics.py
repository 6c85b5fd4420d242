"""Quality metrics over defect ledgers.

Defect density, injection rate, removal efficiency, and removal rate,
plus a per-product summary that aggregates them.  Metrics that cannot
be computed from the available inputs are reported as absent, never as
zero: zero is a quality claim, absence is honesty.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from datetime import datetime, timedelta
from enum import Enum

from .errors import ValidationError
from .ledger import DefectRecord, ProductProfile, Status

#: Field order for MetricsSummary serialization (JSON and CSV).
SUMMARY_FIELDS = (
    "product_id",
    "defect_count",
    "density_per_uf",
    "density_per_kloc",
    "injection_rate",
    "removal_efficiency",
    "removal_rate",
)

#: How the injection rate is estimated when true injected counts are
#: unknown (they almost always are; you can only estimate them).
#: Recorded in JSON output so consumers know what the number means.
INJECTION_RATE_BASIS = (
    "recorded defects per unique formula; residual undiscovered defects assumed zero"
)

#: Default trailing window for the removal rate in a summary.
DEFAULT_RATE_WINDOW = timedelta(days=7)


class SizeUnit(str, Enum):
    """Denominator unit for defect density."""

    PER_UF = "per_uf"
    PER_KLOC = "per_kloc"
    PER_FP = "per_fp"


@dataclass(frozen=True)
class MetricsSummary:
    """Computed quality metrics for one product.

    Optional fields are None when their inputs were absent (for
    example no KLOC size on the profile, or no fixed records).
    """

    product_id: str
    defect_count: int
    density_per_uf: float | None = None
    density_per_kloc: float | None = None
    injection_rate: float | None = None
    removal_efficiency: float | None = None
    removal_rate: float | None = None

    def __post_init__(self) -> None:
        problems = []
        if self.defect_count < 0:
            problems.append(f"defect_count must be >= 0, got {self.defect_count}")
        for name in ("injection_rate", "removal_efficiency"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                problems.append(f"{name} must be within [0, 1], got {value}")
        for name in ("density_per_uf", "density_per_kloc", "removal_rate"):
            value = getattr(self, name)
            if value is not None and value < 0.0:
                problems.append(f"{name} must be >= 0, got {value}")
        if problems:
            raise ValidationError(f"invalid metrics summary for {self.product_id!r}", problems)


def defect_density(defects: int, size: float, unit: SizeUnit | str) -> float:
    """Defects per size unit (unique formulas, KLOC, or function points)."""
    unit = SizeUnit(unit)
    if defects < 0:
        raise ValidationError(f"defects must be >= 0, got {defects}")
    if not math.isfinite(size) or size <= 0:
        raise ValidationError(f"size must be positive, got {size}")
    return defects / size


def injection_rate(defects_injected: int, units_of_work: int) -> float:
    """Fraction of produced units of work that are defective.

    A result above 1 contradicts the definition (more defective units
    than units) and is rejected rather than clamped.
    """
    if units_of_work <= 0:
        raise ValidationError(f"units_of_work must be positive, got {units_of_work}")
    if defects_injected < 0:
        raise ValidationError(f"defects_injected must be >= 0, got {defects_injected}")
    rate = defects_injected / units_of_work
    if rate > 1.0:
        raise ValidationError(
            f"injection rate {rate:.4g} exceeds 1: "
            f"{defects_injected} defects against {units_of_work} units of work"
        )
    return rate


def removal_efficiency(removed_by_process: int, total_present: int) -> float:
    """Fraction of the defects present that a find-and-fix pass removed."""
    if total_present <= 0:
        raise ValidationError(f"total_present must be positive, got {total_present}")
    if removed_by_process < 0:
        raise ValidationError(f"removed_by_process must be >= 0, got {removed_by_process}")
    if removed_by_process > total_present:
        raise ValidationError(
            f"removed_by_process {removed_by_process} exceeds total_present {total_present}"
        )
    return removed_by_process / total_present


def removal_rate(
    records: Sequence[DefectRecord],
    window: timedelta,
    as_of: datetime | None = None,
) -> float | None:
    """Defects fixed per day over a trailing window.

    The window ends at ``as_of``, defaulting to the latest timestamp
    anywhere in the records (the ledger's observation horizon), and is
    half-open: a fix exactly at the horizon counts, one exactly
    ``window`` before it does not.  Returns None when no fixes fall
    inside the window; a rate of zero is never fabricated.
    """
    if window <= timedelta(0):
        raise ValidationError(f"window must be positive, got {window}")
    fix_times = [r.fixed_at for r in records if r.fixed_at is not None]
    if not fix_times:
        return None
    if as_of is None:
        as_of = max(max(fix_times), max(r.found_at for r in records))
    start = as_of - window
    fixes_in_window = sum(1 for t in fix_times if start < t <= as_of)
    if fixes_in_window == 0:
        return None
    return fixes_in_window / (window / timedelta(days=1))


def summarize(
    records: Sequence[DefectRecord],
    profile: ProductProfile,
    window: timedelta = DEFAULT_RATE_WINDOW,
) -> MetricsSummary:
    """Aggregate the single metrics over one product's records.

    With no records at all, every optional metric is absent: nothing
    can be claimed about a product that was never measured.
    """
    strangers = sorted({r.id for r in records if r.product_id != profile.product_id})
    if strangers:
        raise ValidationError(
            f"records do not belong to product {profile.product_id!r}: "
            + ", ".join(repr(s) for s in strangers)
        )
    count = len(records)
    if count == 0:
        return MetricsSummary(product_id=profile.product_id, defect_count=0)

    density_uf = None
    rate_injected = None
    if profile.unique_formulas is not None:
        density_uf = defect_density(count, profile.unique_formulas, SizeUnit.PER_UF)
        rate_injected = injection_rate(count, profile.unique_formulas)
    density_kloc = None
    if profile.kloc is not None:
        density_kloc = defect_density(count, profile.kloc, SizeUnit.PER_KLOC)
    fixed = sum(1 for r in records if r.status is Status.FIXED)
    return MetricsSummary(
        product_id=profile.product_id,
        defect_count=count,
        density_per_uf=density_uf,
        density_per_kloc=density_kloc,
        injection_rate=rate_injected,
        removal_efficiency=removal_efficiency(fixed, count),
        removal_rate=removal_rate(records, window),
    )


def summary_to_dict(summary: MetricsSummary) -> dict:
    """Summary as a dict in fixed field order, plus estimator metadata."""
    out = {name: getattr(summary, name) for name in SUMMARY_FIELDS}
    if summary.injection_rate is not None:
        out["injection_rate_basis"] = INJECTION_RATE_BASIS
    return out


def summaries_to_json(summaries: Iterable[MetricsSummary]) -> str:
    return json.dumps([summary_to_dict(s) for s in summaries], indent=2) + "\n"


def summaries_to_csv(summaries: Iterable[MetricsSummary]) -> str:
    """CSV with one row per product; absent metrics are empty cells."""
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(SUMMARY_FIELDS)
    for s in summaries:
        writer.writerow([
            "" if (v := getattr(s, name)) is None else v for name in SUMMARY_FIELDS
        ])
    return out.getvalue()
