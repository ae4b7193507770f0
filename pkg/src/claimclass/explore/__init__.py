"""Exploratory statistics and SVG figures."""
from .stats import (
    CONTINUOUS_FEATURES,
    DEFAULT_BINS,
    DEFAULT_LEVEL_FEATURES,
    CorrelationMatrix,
    DepartmentAggregate,
    ProportionRow,
    Summary,
    aggregate_by_department,
    claim_proportion_by_level,
    department_code,
    department_table,
    departments_frame,
    pearson_correlation_matrix,
    rate_ci,
    summary_stats,
    wald_ci,
    wilson_ci,
    z_value,
)
from .svg import (
    GeoJSONError,
    render_bar_with_ci,
    render_choropleth,
    render_heatmap,
    render_line,
    save,
)
