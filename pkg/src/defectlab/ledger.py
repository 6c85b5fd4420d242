"""Defect ledger model and file ingestion.

A ledger is a set of product profiles plus the defect records logged
against them.  Defect logs travel as CSV, product registries as JSON,
and the two combine into a single ledger JSON document that the rest
of the toolkit consumes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from enum import Enum

from .errors import ValidationError

#: Column order for defect-log CSV files.  Header row is mandatory.
DEFECT_CSV_COLUMNS = (
    "id",
    "product_id",
    "phase_injected",
    "phase_found",
    "found_at",
    "fixed_at",
    "severity",
    "status",
    "fix_changes",
)

#: Key order for product registry JSON entries.
PRODUCT_JSON_KEYS = (
    "product_id",
    "unique_formulas",
    "kloc",
    "function_points",
    "description",
)

SEVERITY_RANGE = (1, 4)


class Phase(str, Enum):
    """Lifecycle phase in which a defect can be injected or found."""

    REQUIREMENTS = "requirements"
    DESIGN = "design"
    BUILD = "build"
    REVIEW = "review"
    TEST = "test"
    USE = "use"
    UNKNOWN = "unknown"


class Status(str, Enum):
    """Workflow state of a defect record."""

    OPEN = "open"
    FIXED = "fixed"
    DEFERRED = "deferred"


def parse_timestamp(text: str) -> datetime:
    """Parse an ISO 8601 timestamp that carries an explicit UTC marker.

    Accepts the trailing ``Z`` designator as well as ``+00:00``.  Naive
    timestamps and non-UTC offsets are rejected so that records from
    different sources always compare on the same clock.
    """
    raw = text.strip()
    normalised = raw[:-1] + "+00:00" if raw.endswith(("Z", "z")) else raw
    try:
        stamp = datetime.fromisoformat(normalised)
    except ValueError:
        raise ValidationError(f"invalid timestamp {text!r}") from None
    if stamp.tzinfo is None:
        raise ValidationError(f"timestamp {text!r} must carry a UTC offset")
    if stamp.utcoffset() != timedelta(0):
        raise ValidationError(f"timestamp {text!r} must be UTC, not a local offset")
    return stamp


def format_timestamp(stamp: datetime) -> str:
    """Render a timestamp as ISO 8601 with the ``Z`` designator."""
    return stamp.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


@dataclass(frozen=True)
class DefectRecord:
    """One logged defect.

    ``fixed_at`` is present exactly when ``status`` is FIXED; a record
    cannot be fixed before it was found.  ``fix_changes`` counts the
    cells or components touched by the fix, when that was recorded.
    """

    id: str
    product_id: str
    phase_injected: Phase
    phase_found: Phase
    found_at: datetime
    fixed_at: datetime | None
    severity: int
    status: Status
    fix_changes: int | None = None

    def __post_init__(self) -> None:
        problems = []
        if not self.id:
            problems.append("id must be non-empty")
        if not self.product_id:
            problems.append("product_id must be non-empty")
        if self.phase_found is Phase.UNKNOWN:
            problems.append("phase_found may not be 'unknown'")
        if self.found_at.tzinfo is None or self.found_at.utcoffset() != timedelta(0):
            problems.append("found_at must be a UTC timestamp")
        lo, hi = SEVERITY_RANGE
        if not lo <= self.severity <= hi:
            problems.append(f"severity must be in {lo}..{hi}, got {self.severity}")
        if (self.status is Status.FIXED) != (self.fixed_at is not None):
            problems.append(
                f"status {self.status.value!r} is inconsistent with "
                f"fixed_at {'present' if self.fixed_at else 'absent'}"
            )
        if self.fixed_at is not None:
            if self.fixed_at.tzinfo is None or self.fixed_at.utcoffset() != timedelta(0):
                problems.append("fixed_at must be a UTC timestamp")
            elif self.fixed_at < self.found_at:
                problems.append(
                    f"fixed_at {format_timestamp(self.fixed_at)} is earlier than "
                    f"found_at {format_timestamp(self.found_at)}"
                )
        if self.fix_changes is not None and self.fix_changes < 0:
            problems.append(f"fix_changes must be >= 0, got {self.fix_changes}")
        if problems:
            raise ValidationError(f"invalid defect record {self.id!r}", problems)


@dataclass(frozen=True)
class ProductProfile:
    """Size and identity of one audited product.

    At least one size measure must be present.  Spreadsheet-style
    products are usually sized in unique formulas; conventional code
    in KLOC or function points.
    """

    product_id: str
    unique_formulas: int | None = None
    kloc: float | None = None
    function_points: int | None = None
    description: str = ""

    def __post_init__(self) -> None:
        problems = []
        if not self.product_id:
            problems.append("product_id must be non-empty")
        sizes = (self.unique_formulas, self.kloc, self.function_points)
        if all(s is None for s in sizes):
            problems.append("at least one size measure is required")
        for name, value in (
            ("unique_formulas", self.unique_formulas),
            ("kloc", self.kloc),
            ("function_points", self.function_points),
        ):
            if value is not None and (not math.isfinite(value) or value <= 0):
                problems.append(f"{name}: size must be positive, got {value}")
        if problems:
            raise ValidationError(f"invalid product profile {self.product_id!r}", problems)


@dataclass(frozen=True)
class TimeRecord:
    """Time spent in one lifecycle phase of one product."""

    product_id: str
    phase: Phase
    started_at: datetime
    ended_at: datetime

    def __post_init__(self) -> None:
        if not self.product_id:
            raise ValidationError("product_id must be non-empty")
        if self.ended_at <= self.started_at:
            raise ValidationError(
                f"ended_at {format_timestamp(self.ended_at)} must be after "
                f"started_at {format_timestamp(self.started_at)}"
            )

    @property
    def duration(self) -> timedelta:
        return self.ended_at - self.started_at


@dataclass(frozen=True)
class ArrivalSeries:
    """Defect discoveries bucketed onto a uniform time grid.

    ``counts[i]`` holds the number of defects found in
    ``[origin + i*bucket_width, origin + (i+1)*bucket_width)``.  A
    series built from zero records has empty counts.
    """

    origin: datetime
    bucket_width: timedelta
    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.bucket_width <= timedelta(0):
            raise ValidationError(f"bucket_width must be positive, got {self.bucket_width}")
        if any(c < 0 for c in self.counts):
            raise ValidationError("arrival counts must be >= 0")

    @property
    def total(self) -> int:
        return sum(self.counts)


def _parse_optional_int(text: str, column: str) -> int | None:
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        raise ValidationError(f"{column} must be an integer, got {text!r}") from None


def parse_defect_log(text: str) -> list[DefectRecord]:
    """Parse a defect-log CSV document into records.

    The header row must match :data:`DEFECT_CSV_COLUMNS` exactly.  All
    problems are collected and reported together, each diagnostic
    prefixed with the 1-based data row it came from.
    """
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows:
        raise ValidationError("defect log is empty; expected a header row")
    header = tuple(rows[0])
    if header != DEFECT_CSV_COLUMNS:
        raise ValidationError(
            "defect log header mismatch: expected "
            f"{','.join(DEFECT_CSV_COLUMNS)}, got {','.join(header)}"
        )

    records: list[DefectRecord] = []
    diagnostics: list[str] = []
    seen_ids: set[str] = set()
    for row_no, row in enumerate(rows[1:], start=1):
        if not row:
            continue
        if len(row) != len(DEFECT_CSV_COLUMNS):
            diagnostics.append(
                f"row {row_no}: expected {len(DEFECT_CSV_COLUMNS)} fields, got {len(row)}"
            )
            continue
        raw = dict(zip(DEFECT_CSV_COLUMNS, (field.strip() for field in row)))
        try:
            record = DefectRecord(
                id=raw["id"],
                product_id=raw["product_id"],
                phase_injected=_parse_phase(raw["phase_injected"], "phase_injected"),
                phase_found=_parse_phase(raw["phase_found"], "phase_found"),
                found_at=parse_timestamp(raw["found_at"]),
                fixed_at=parse_timestamp(raw["fixed_at"]) if raw["fixed_at"] else None,
                severity=_parse_severity(raw["severity"]),
                status=_parse_status(raw["status"]),
                fix_changes=_parse_optional_int(raw["fix_changes"], "fix_changes"),
            )
        except ValidationError as exc:
            detail = exc.diagnostics if exc.diagnostics else (str(exc),)
            diagnostics.extend(f"row {row_no}: {d}" for d in detail)
            continue
        if record.id in seen_ids:
            diagnostics.append(f"row {row_no}: duplicate defect id {record.id!r}")
            continue
        seen_ids.add(record.id)
        records.append(record)
    if diagnostics:
        raise ValidationError("defect log failed validation", diagnostics)
    return records


def _parse_phase(text: str, column: str) -> Phase:
    try:
        return Phase(text)
    except ValueError:
        raise ValidationError(f"unknown {column} {text!r}") from None


def _parse_status(text: str) -> Status:
    try:
        return Status(text)
    except ValueError:
        raise ValidationError(f"unknown status {text!r}") from None


def _parse_severity(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        # Pass an out-of-range sentinel through so the record validator
        # does not double-report; a non-integer is its own diagnostic.
        raise ValidationError(f"severity must be an integer, got {text!r}") from None


def serialize_defect_log(records: Iterable[DefectRecord]) -> str:
    """Render records back to defect-log CSV.

    Parsing the output yields records equal to the input.
    """
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(DEFECT_CSV_COLUMNS)
    for r in records:
        writer.writerow([
            r.id,
            r.product_id,
            r.phase_injected.value,
            r.phase_found.value,
            format_timestamp(r.found_at),
            format_timestamp(r.fixed_at) if r.fixed_at else "",
            r.severity,
            r.status.value,
            "" if r.fix_changes is None else r.fix_changes,
        ])
    return out.getvalue()


def parse_product_registry(text: str) -> list[ProductProfile]:
    """Parse a product registry JSON array into profiles."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"product registry is not valid JSON: {exc}") from None
    if not isinstance(data, list):
        raise ValidationError("product registry must be a JSON array of objects")

    profiles: list[ProductProfile] = []
    diagnostics: list[str] = []
    seen: set[str] = set()
    for index, entry in enumerate(data):
        if not isinstance(entry, dict):
            diagnostics.append(f"entry {index}: expected an object")
            continue
        unknown = sorted(set(entry) - set(PRODUCT_JSON_KEYS))
        if unknown:
            diagnostics.append(f"entry {index}: unknown keys {', '.join(unknown)}")
            continue
        try:
            profile = _profile_from_dict(entry)
        except ValidationError as exc:
            detail = exc.diagnostics if exc.diagnostics else (str(exc),)
            diagnostics.extend(f"entry {index}: {d}" for d in detail)
            continue
        if profile.product_id in seen:
            diagnostics.append(f"entry {index}: duplicate product_id {profile.product_id!r}")
            continue
        seen.add(profile.product_id)
        profiles.append(profile)
    if diagnostics:
        raise ValidationError("product registry failed validation", diagnostics)
    return profiles


def _require(entry: dict, key: str, kinds: tuple[type, ...], label: str) -> object:
    value = entry.get(key)
    if value is not None and (isinstance(value, bool) or not isinstance(value, kinds)):
        raise ValidationError(f"{key} must be {label}, got {value!r}")
    return value


def _profile_from_dict(entry: dict) -> ProductProfile:
    product_id = _require(entry, "product_id", (str,), "a string")
    if product_id is None:
        raise ValidationError("product_id is required")
    uf = _require(entry, "unique_formulas", (int,), "an integer")
    kloc = _require(entry, "kloc", (int, float), "a number")
    fp = _require(entry, "function_points", (int,), "an integer")
    description = _require(entry, "description", (str,), "a string") or ""
    return ProductProfile(
        product_id=product_id,
        unique_formulas=uf,
        kloc=None if kloc is None else float(kloc),
        function_points=fp,
        description=description,
    )


def _profile_to_dict(profile: ProductProfile) -> dict:
    return {
        "product_id": profile.product_id,
        "unique_formulas": profile.unique_formulas,
        "kloc": profile.kloc,
        "function_points": profile.function_points,
        "description": profile.description,
    }


def serialize_product_registry(profiles: Iterable[ProductProfile]) -> str:
    """Render profiles as a product registry JSON array with fixed key order."""
    return json.dumps([_profile_to_dict(p) for p in profiles], indent=2) + "\n"


def _record_to_dict(record: DefectRecord) -> dict:
    return {
        "id": record.id,
        "product_id": record.product_id,
        "phase_injected": record.phase_injected.value,
        "phase_found": record.phase_found.value,
        "found_at": format_timestamp(record.found_at),
        "fixed_at": format_timestamp(record.fixed_at) if record.fixed_at else None,
        "severity": record.severity,
        "status": record.status.value,
        "fix_changes": record.fix_changes,
    }


def _record_from_dict(entry: dict) -> DefectRecord:
    if not isinstance(entry, dict):
        raise ValidationError("defect entry must be an object")
    missing = [k for k in DEFECT_CSV_COLUMNS if k not in entry]
    if missing:
        raise ValidationError(f"defect entry missing keys: {', '.join(missing)}")
    for key in ("id", "product_id", "phase_injected", "phase_found", "found_at", "status"):
        if not isinstance(entry[key], str):
            raise ValidationError(f"{key} must be a string, got {entry[key]!r}")
    severity = entry["severity"]
    if isinstance(severity, bool) or not isinstance(severity, int):
        raise ValidationError(f"severity must be an integer, got {severity!r}")
    fixed_at = entry["fixed_at"]
    fix_changes = entry["fix_changes"]
    if fix_changes is not None and (isinstance(fix_changes, bool) or not isinstance(fix_changes, int)):
        raise ValidationError(f"fix_changes must be an integer or null, got {fix_changes!r}")
    return DefectRecord(
        id=entry["id"],
        product_id=entry["product_id"],
        phase_injected=_parse_phase(entry["phase_injected"], "phase_injected"),
        phase_found=_parse_phase(entry["phase_found"], "phase_found"),
        found_at=parse_timestamp(entry["found_at"]),
        fixed_at=parse_timestamp(fixed_at) if fixed_at else None,
        severity=severity,
        status=_parse_status(entry["status"]),
        fix_changes=fix_changes,
    )


def build_ledger(
    profiles: Sequence[ProductProfile], records: Sequence[DefectRecord]
) -> dict:
    """Combine profiles and records into one ledger document.

    Every record must reference a registered product; the set of
    record ids must be unique.
    """
    known = {p.product_id for p in profiles}
    diagnostics = []
    seen: set[str] = set()
    for record in records:
        if record.product_id not in known:
            diagnostics.append(
                f"defect {record.id!r} references unknown product {record.product_id!r}"
            )
        if record.id in seen:
            diagnostics.append(f"duplicate defect id {record.id!r}")
        seen.add(record.id)
    if diagnostics:
        raise ValidationError("ledger failed validation", diagnostics)
    return {
        "products": [_profile_to_dict(p) for p in profiles],
        "defects": [_record_to_dict(r) for r in records],
    }


def dump_ledger(profiles: Sequence[ProductProfile], records: Sequence[DefectRecord]) -> str:
    """Serialize a validated ledger to JSON text."""
    return json.dumps(build_ledger(profiles, records), indent=2) + "\n"


def load_ledger(text: str) -> tuple[list[ProductProfile], list[DefectRecord]]:
    """Parse and validate a ledger JSON document."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"ledger is not valid JSON: {exc}") from None
    if not isinstance(data, dict) or set(data) != {"products", "defects"}:
        raise ValidationError("ledger must be an object with 'products' and 'defects' keys")
    if not isinstance(data["products"], list) or not isinstance(data["defects"], list):
        raise ValidationError("ledger 'products' and 'defects' must be arrays")

    diagnostics: list[str] = []
    profiles: list[ProductProfile] = []
    seen_products: set[str] = set()
    for index, entry in enumerate(data["products"]):
        try:
            if not isinstance(entry, dict):
                raise ValidationError("expected an object")
            profile = _profile_from_dict(entry)
            if profile.product_id in seen_products:
                raise ValidationError(f"duplicate product_id {profile.product_id!r}")
            seen_products.add(profile.product_id)
            profiles.append(profile)
        except ValidationError as exc:
            detail = exc.diagnostics if exc.diagnostics else (str(exc),)
            diagnostics.extend(f"products[{index}]: {d}" for d in detail)

    records: list[DefectRecord] = []
    seen_ids: set[str] = set()
    for index, entry in enumerate(data["defects"]):
        try:
            record = _record_from_dict(entry)
            if record.id in seen_ids:
                raise ValidationError(f"duplicate defect id {record.id!r}")
            if record.product_id not in seen_products:
                raise ValidationError(
                    f"defect {record.id!r} references unknown product {record.product_id!r}"
                )
            seen_ids.add(record.id)
            records.append(record)
        except ValidationError as exc:
            detail = exc.diagnostics if exc.diagnostics else (str(exc),)
            diagnostics.extend(f"defects[{index}]: {d}" for d in detail)
    if diagnostics:
        raise ValidationError("ledger failed validation", diagnostics)
    return profiles, records


def arrival_series(
    records: Sequence[DefectRecord],
    bucket_width: timedelta,
    origin: datetime | None = None,
) -> ArrivalSeries:
    """Bucket defect discovery times onto a uniform grid.

    ``origin`` defaults to the earliest ``found_at``.  Records found
    before the origin are an error.  The counts always sum to the
    number of records.
    """
    if bucket_width <= timedelta(0):
        raise ValidationError(f"bucket_width must be positive, got {bucket_width}")
    if not records:
        if origin is None:
            origin = datetime(1970, 1, 1, tzinfo=timezone.utc)
        return ArrivalSeries(origin=origin, bucket_width=bucket_width, counts=())
    if origin is None:
        origin = min(r.found_at for r in records)
    early = [r.id for r in records if r.found_at < origin]
    if early:
        raise ValidationError(
            f"records found before series origin {format_timestamp(origin)}: "
            + ", ".join(repr(i) for i in sorted(early))
        )
    indices = [(r.found_at - origin) // bucket_width for r in records]
    counts = [0] * (max(indices) + 1)
    for i in indices:
        counts[i] += 1
    return ArrivalSeries(origin=origin, bucket_width=bucket_width, counts=tuple(counts))
