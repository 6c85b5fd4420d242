"""Rayleigh defect-arrival model: fitting, projection, readiness.

Defect discoveries over time tend to rise to a peak and tail off; the
Rayleigh family models the cumulative count as
K * (1 - exp(-t^2 / (2*sigma^2))).  The discovery rate peaks at
t = sigma, which is also the cumulative curve's inflection point, and
about 39.35% of lifetime defects have been found by then.  Fitting K
and sigma to early arrival data projects the lifetime total and when
the remaining count falls low enough to release.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Sequence
from dataclasses import dataclass

from .errors import NonConvergenceError, ValidationError
from .ledger import ArrivalSeries

#: Fraction of lifetime defects discovered by t = sigma: 1 - e^(-1/2).
PEAK_FRACTION = 1.0 - math.exp(-0.5)

#: Golden-section ratio for the one-dimensional sigma search.
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

#: Sigma search interval: [SIGMA_FLOOR, SIGMA_SPAN_FACTOR * last edge].
SIGMA_FLOOR = 0.1
SIGMA_SPAN_FACTOR = 3.0

DEFAULT_REL_TOL = 1e-6


@dataclass(frozen=True)
class RayleighFit:
    """Fitted arrival model.

    ``sigma`` is the peak-discovery time in bucket units; ``k_total``
    the projected lifetime defect count.  ``k_total`` may undershoot
    the observed cumulative count on noisy data; that is the fit being
    honest, not a bug.  ``sse`` is measured on cumulative counts.
    """

    k_total: float
    sigma: float
    sse: float
    buckets_used: int

    def __post_init__(self) -> None:
        problems: list[str] = []
        if not math.isfinite(self.k_total) or self.k_total <= 0:
            problems.append(f"k_total must be positive, got {self.k_total}")
        if not math.isfinite(self.sigma) or self.sigma <= 0:
            problems.append(f"sigma must be positive, got {self.sigma}")
        if not math.isfinite(self.sse) or self.sse < 0:
            problems.append(f"sse must be >= 0, got {self.sse}")
        if self.buckets_used < 3:
            problems.append(f"buckets_used must be >= 3, got {self.buckets_used}")
        if problems:
            raise ValidationError("invalid arrival fit", problems)


def rayleigh_cdf(t: float, k_total: float, sigma: float) -> float:
    """Cumulative defects discovered by time t."""
    if t < 0:
        raise ValidationError(f"t must be >= 0, got {t}")
    if sigma <= 0:
        raise ValidationError(f"sigma must be positive, got {sigma}")
    if k_total <= 0:
        raise ValidationError(f"k_total must be positive, got {k_total}")
    return k_total * -math.expm1(-(t * t) / (2.0 * sigma * sigma))


def expected_bucket_counts(k_total: float, sigma: float, buckets: int) -> list[float]:
    """Per-bucket expected discoveries implied by the model."""
    if buckets < 1:
        raise ValidationError(f"buckets must be >= 1, got {buckets}")
    edges = [rayleigh_cdf(float(i), k_total, sigma) for i in range(buckets + 1)]
    return [b - a for a, b in zip(edges, edges[1:])]


def _closed_form_k(cumulative: Sequence[float], shape: Sequence[float]) -> float:
    # For fixed sigma the SSE is quadratic in K; its minimizer is the
    # projection of the cumulative data onto the unit-K curve.
    return sum(c * g for c, g in zip(cumulative, shape)) / sum(g * g for g in shape)


def _sse_at(sigma: float, cumulative: Sequence[float], edges: Sequence[float]) -> tuple[float, float]:
    shape = [-math.expm1(-(t * t) / (2.0 * sigma * sigma)) for t in edges]
    k = _closed_form_k(cumulative, shape)
    sse = sum((c - k * g) ** 2 for c, g in zip(cumulative, shape))
    return sse, k


def fit_arrival(
    series: ArrivalSeries | Sequence[float],
    rel_tol: float = DEFAULT_REL_TOL,
) -> RayleighFit:
    """Least-squares Rayleigh fit to an arrival series.

    Works on the cumulative counts evaluated at bucket right-edges
    (bucket i covers (i, i+1] in bucket units): cumulative data is
    monotone, which stabilizes the fit on short series.  For each
    candidate sigma the optimal K has a closed form, so only sigma is
    searched, by golden section over [0.1, 3 x last edge].  The true
    peak must lie strictly inside that interval; a search that
    converges onto either end is reported as non-convergence rather
    than returned as a pretend-optimum.

    Accepts a plain sequence of per-bucket counts (possibly
    fractional) in place of an ArrivalSeries.
    """
    counts = list(series.counts) if isinstance(series, ArrivalSeries) else [float(c) for c in series]
    if len(counts) < 3:
        raise ValidationError(f"fit needs at least 3 buckets, got {len(counts)}")
    if any(not math.isfinite(c) or c < 0 for c in counts):
        raise ValidationError("bucket counts must be finite and >= 0")
    if not any(counts):
        raise ValidationError("fit needs at least one non-zero bucket")
    if not 0 < rel_tol < 1:
        raise ValidationError(f"rel_tol must be in (0, 1), got {rel_tol}")

    cumulative = list(itertools.accumulate(counts))
    edges = [float(i + 1) for i in range(len(counts))]
    lo, hi = SIGMA_FLOOR, SIGMA_SPAN_FACTOR * edges[-1]

    a, b = lo, hi
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, _ = _sse_at(x1, cumulative, edges)
    f2, _ = _sse_at(x2, cumulative, edges)
    while (b - a) > rel_tol * (abs(a) + abs(b)) / 2.0:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1, _ = _sse_at(x1, cumulative, edges)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2, _ = _sse_at(x2, cumulative, edges)
    sigma = (a + b) / 2.0

    if sigma - lo <= 2.0 * rel_tol * max(1.0, lo):
        raise NonConvergenceError(
            f"sigma search collapsed onto the lower boundary {lo}; the data "
            f"peak too early for an interior fit"
        )
    if hi - sigma <= 2.0 * rel_tol * hi:
        raise NonConvergenceError(
            f"sigma search collapsed onto the upper boundary {hi:g}; the data "
            f"show no interior peak within the observed span"
        )
    sse, k = _sse_at(sigma, cumulative, edges)
    return RayleighFit(k_total=k, sigma=sigma, sse=sse, buckets_used=len(counts))


def projected_total_from_peak(cumulative_at_peak: float) -> float:
    """Lifetime total implied by the count observed at peak discovery.

    By t = sigma a fraction 1 - e^(-1/2) of the total has appeared, so
    the total is the observed cumulative divided by that constant.
    """
    if not math.isfinite(cumulative_at_peak) or cumulative_at_peak <= 0:
        raise ValidationError(f"cumulative_at_peak must be positive, got {cumulative_at_peak}")
    return cumulative_at_peak / PEAK_FRACTION


def remaining_defects(fit: RayleighFit, t: float) -> float:
    """Defects not yet discovered at time t (bucket units)."""
    return fit.k_total - rayleigh_cdf(t, fit.k_total, fit.sigma)


def time_to_threshold(fit: RayleighFit, residual_threshold: float) -> float:
    """Time at which the undiscovered count falls to the threshold.

    Closed-form inversion: t = sigma * sqrt(2 * ln(K / threshold)).
    """
    if not math.isfinite(residual_threshold) or residual_threshold <= 0:
        raise ValidationError(f"residual_threshold must be positive, got {residual_threshold}")
    if residual_threshold >= fit.k_total:
        raise ValidationError(
            f"residual_threshold {residual_threshold} must be below k_total {fit.k_total}"
        )
    return fit.sigma * math.sqrt(2.0 * math.log(fit.k_total / residual_threshold))
