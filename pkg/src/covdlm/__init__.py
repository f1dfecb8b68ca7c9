"""On-line covariance estimation and forecasting for multivariate
Gaussian state-space models, with VAR/TVVAR builders, a
forward-filtering backward-sampling Gibbs oracle, and a Monte Carlo
replication harness."""

from ._kernels import backend_name
from .dlm import (
    FilterRun,
    FilterState,
    ForecastResult,
    ModelSpec,
    covariance_sum_form,
    filter_step,
    forecast,
    init_state,
    run_filter,
    standardized_errors,
)
from .matops import (
    duplication_matrix,
    kron,
    symmetric_inv_sqrt,
    symmetric_sqrt,
    vec,
    vech,
)
from .mcmc import (
    ForwardFiltered,
    GibbsConfig,
    GibbsDraw,
    GibbsResult,
    backward_sample,
    forward_filter,
    gibbs_run,
    gibbs_sweep,
    invwishart_draw,
    sigma_draw,
)
from .metrics import MetricsReport, correlations, mape, msse
from .models import (
    StationarityResult,
    VarSpec,
    companion_matrix,
    dwr_model,
    dwr_prior,
    linear_trend,
    local_level,
    mvdlm_cov_update,
    seasonal,
    stationarity_check,
    tvvar_model,
    var_design,
    var_model,
)
from .simulate import (
    SimConfig,
    StudyReport,
    generate,
    merge_reports,
    replication_study,
)

__version__ = "0.1.0"

__all__ = [
    "FilterRun",
    "FilterState",
    "ForecastResult",
    "ForwardFiltered",
    "GibbsConfig",
    "GibbsDraw",
    "GibbsResult",
    "MetricsReport",
    "ModelSpec",
    "SimConfig",
    "StationarityResult",
    "StudyReport",
    "VarSpec",
    "backend_name",
    "backward_sample",
    "companion_matrix",
    "correlations",
    "covariance_sum_form",
    "duplication_matrix",
    "dwr_model",
    "dwr_prior",
    "filter_step",
    "forecast",
    "forward_filter",
    "generate",
    "gibbs_run",
    "gibbs_sweep",
    "init_state",
    "invwishart_draw",
    "kron",
    "linear_trend",
    "local_level",
    "mape",
    "merge_reports",
    "msse",
    "mvdlm_cov_update",
    "replication_study",
    "run_filter",
    "seasonal",
    "sigma_draw",
    "standardized_errors",
    "stationarity_check",
    "symmetric_inv_sqrt",
    "symmetric_sqrt",
    "tvvar_model",
    "var_design",
    "var_model",
    "vec",
    "vech",
]
