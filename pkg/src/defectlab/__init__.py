"""defectlab: defect ledgers, quality metrics, revision forecasts,
size-based issue estimators, and Rayleigh arrival fitting."""

from .charts import arrival_chart, line_chart, scatter_chart
from .cli import emit_chart, emit_table, run
from .errors import DefectLabError, DivergenceError, NonConvergenceError, ValidationError
from .ledger import (
    ArrivalSeries,
    DefectRecord,
    Phase,
    ProductProfile,
    Status,
    TimeRecord,
    arrival_series,
    build_ledger,
    dump_ledger,
    load_ledger,
    parse_defect_log,
    parse_product_registry,
    serialize_defect_log,
    serialize_product_registry,
)
from .metrics import (
    MetricsSummary,
    SizeUnit,
    defect_density,
    injection_rate,
    removal_efficiency,
    removal_rate,
    summaries_to_csv,
    summaries_to_json,
    summarize,
)
from .rayleigh import (
    PEAK_FRACTION,
    RayleighFit,
    expected_bucket_counts,
    fit_arrival,
    projected_total_from_peak,
    rayleigh_cdf,
    remaining_defects,
    time_to_threshold,
)
from .revisions import (
    PRESETS,
    SIGNOFF_THRESHOLD,
    McOutcome,
    ProcessParams,
    RevisionGrid,
    RevisionTrajectory,
    divergence_report,
    grid_to_csv,
    grid_to_json,
    infer_efficiency,
    initial_defects,
    revision_step,
    revision_table,
    revisions_to_signoff,
    simulate_monte_carlo,
)
from .sizing import (
    DEFAULT_LINEAR_MODEL,
    DEFAULT_SQRT_MODEL,
    LinearSizeModel,
    NegativeInterceptWarning,
    SizePoint,
    SqrtSizeModel,
    fit_linear,
    fit_sqrt,
    linear_estimate,
    parse_scatter,
    residual_sum_of_squares,
    sqrt_estimate,
)

__version__ = "0.1.0"

__all__ = [
    "ArrivalSeries",
    "DefectLabError",
    "DefectRecord",
    "DivergenceError",
    "DEFAULT_LINEAR_MODEL",
    "DEFAULT_SQRT_MODEL",
    "LinearSizeModel",
    "McOutcome",
    "MetricsSummary",
    "NegativeInterceptWarning",
    "NonConvergenceError",
    "PEAK_FRACTION",
    "PRESETS",
    "Phase",
    "ProcessParams",
    "ProductProfile",
    "RayleighFit",
    "RevisionGrid",
    "RevisionTrajectory",
    "SIGNOFF_THRESHOLD",
    "SizePoint",
    "SizeUnit",
    "SqrtSizeModel",
    "Status",
    "TimeRecord",
    "ValidationError",
    "arrival_chart",
    "arrival_series",
    "build_ledger",
    "defect_density",
    "divergence_report",
    "dump_ledger",
    "emit_chart",
    "emit_table",
    "expected_bucket_counts",
    "fit_arrival",
    "fit_linear",
    "fit_sqrt",
    "grid_to_csv",
    "grid_to_json",
    "infer_efficiency",
    "initial_defects",
    "injection_rate",
    "line_chart",
    "linear_estimate",
    "load_ledger",
    "parse_defect_log",
    "parse_product_registry",
    "parse_scatter",
    "projected_total_from_peak",
    "rayleigh_cdf",
    "remaining_defects",
    "removal_efficiency",
    "removal_rate",
    "residual_sum_of_squares",
    "revision_step",
    "revision_table",
    "revisions_to_signoff",
    "run",
    "scatter_chart",
    "serialize_defect_log",
    "serialize_product_registry",
    "simulate_monte_carlo",
    "sqrt_estimate",
    "summaries_to_csv",
    "summaries_to_json",
    "summarize",
    "time_to_threshold",
]
