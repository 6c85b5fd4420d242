"""Issue-count estimators from model size, and fits to scatter data.

Two model forms: a straight line in the unit count, and a square-root
curve through the origin.  Defaults reproduce a published audit of 30
spreadsheet models averaging 2,182 unique formulas and 151 issues.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from collections.abc import Callable, Sequence
from dataclasses import dataclass

from .errors import ValidationError

#: Intercept of the default linear model, in issues.
DEFAULT_LINEAR_INTERCEPT = 62.0

#: Slope of the default linear model.  Forced by the regression line
#: passing through the sample means: (151 - 62) / 2182 = 0.0408.
DERIVED_LINEAR_SLOPE = 0.0408

#: The slope printed alongside the published audit is 0.41, which is
#: inconsistent with that audit's own averages (it would predict about
#: 957 issues for the average 2,182-formula model against a reported
#: 151).  Treated as a typographic slip and kept only as a named
#: constant; the default model uses the derived slope above.
PUBLISHED_LINEAR_SLOPE = 0.41

#: Coefficient of the default square-root model.
DEFAULT_SQRT_COEFFICIENT = 2.6


class NegativeInterceptWarning(UserWarning):
    """A fitted line predicts negative issues for small models.

    Issue counts cannot be negative, but the fit is descriptive, so
    the intercept is reported as-is rather than clamped silently.
    """


@dataclass(frozen=True)
class LinearSizeModel:
    """issues = intercept + slope * uf"""

    intercept: float
    slope: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.intercept) or not math.isfinite(self.slope):
            raise ValidationError("model parameters must be finite")
        if self.slope < 0:
            raise ValidationError(f"slope must be >= 0, got {self.slope}")


@dataclass(frozen=True)
class SqrtSizeModel:
    """issues = coefficient * sqrt(uf)"""

    coefficient: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.coefficient) or self.coefficient < 0:
            raise ValidationError(f"coefficient must be >= 0, got {self.coefficient}")


@dataclass(frozen=True)
class SizePoint:
    """One observed (unique formulas, issues) pair."""

    uf: int
    issues: int

    def __post_init__(self) -> None:
        if self.uf <= 0:
            raise ValidationError(f"uf must be positive, got {self.uf}")
        if self.issues < 0:
            raise ValidationError(f"issues must be >= 0, got {self.issues}")


DEFAULT_LINEAR_MODEL = LinearSizeModel(
    intercept=DEFAULT_LINEAR_INTERCEPT, slope=DERIVED_LINEAR_SLOPE
)
DEFAULT_SQRT_MODEL = SqrtSizeModel(coefficient=DEFAULT_SQRT_COEFFICIENT)


def _check_uf(uf: int) -> None:
    if uf <= 0:
        raise ValidationError(f"uf must be positive, got {uf}")


def linear_estimate(uf: int, model: LinearSizeModel = DEFAULT_LINEAR_MODEL) -> float:
    """Expected issues for a model of the given size, linear form."""
    _check_uf(uf)
    return model.intercept + model.slope * uf


def sqrt_estimate(uf: int, model: SqrtSizeModel = DEFAULT_SQRT_MODEL) -> float:
    """Expected issues for a model of the given size, square-root form."""
    _check_uf(uf)
    return model.coefficient * math.sqrt(uf)


def fit_linear(points: Sequence[SizePoint]) -> LinearSizeModel:
    """Ordinary least squares line through the scatter.

    Needs at least two distinct sizes.  The fitted line always passes
    through the sample means.  A negative fitted intercept triggers
    NegativeInterceptWarning but is reported unchanged.
    """
    if len({p.uf for p in points}) < 2:
        raise ValidationError("linear fit needs at least 2 distinct uf values")
    n = len(points)
    mean_x = sum(p.uf for p in points) / n
    mean_y = sum(p.issues for p in points) / n
    sxx = sum((p.uf - mean_x) ** 2 for p in points)
    sxy = sum((p.uf - mean_x) * (p.issues - mean_y) for p in points)
    slope = sxy / sxx
    intercept = mean_y - slope * mean_x
    if intercept < 0:
        warnings.warn(
            f"fitted intercept {intercept:.6g} is negative; reported as-is",
            NegativeInterceptWarning,
            stacklevel=2,
        )
    return LinearSizeModel(intercept=intercept, slope=slope)


def fit_sqrt(points: Sequence[SizePoint]) -> SqrtSizeModel:
    """Least squares through the origin in sqrt(uf).

    coefficient = sum(issues * sqrt(uf)) / sum(uf), since sum(uf) is
    the sum of squared regressors.
    """
    if not points:
        raise ValidationError("sqrt fit needs at least 1 point")
    numerator = sum(p.issues * math.sqrt(p.uf) for p in points)
    return SqrtSizeModel(coefficient=numerator / sum(p.uf for p in points))


def residual_sum_of_squares(
    points: Sequence[SizePoint], predict: Callable[[int], float]
) -> float:
    return sum((p.issues - predict(p.uf)) ** 2 for p in points)


def parse_scatter(text: str) -> list[SizePoint]:
    """Parse scatter CSV with columns ``uf,issues``."""
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows:
        raise ValidationError("scatter file is empty; expected a header row")
    if tuple(rows[0]) != ("uf", "issues"):
        raise ValidationError(
            f"scatter header mismatch: expected uf,issues, got {','.join(rows[0])}"
        )
    points: list[SizePoint] = []
    diagnostics: list[str] = []
    for row_no, row in enumerate(rows[1:], start=1):
        if not row:
            continue
        if len(row) != 2:
            diagnostics.append(f"row {row_no}: expected 2 fields, got {len(row)}")
            continue
        try:
            uf, issues = (int(field.strip()) for field in row)
        except ValueError:
            diagnostics.append(f"row {row_no}: uf and issues must be integers, got {row}")
            continue
        try:
            points.append(SizePoint(uf=uf, issues=issues))
        except ValidationError as exc:
            detail = exc.diagnostics if exc.diagnostics else (str(exc),)
            diagnostics.extend(f"row {row_no}: {d}" for d in detail)
    if diagnostics:
        raise ValidationError("scatter file failed validation", diagnostics)
    return points
