"""Autoregressive neural-network forecasting with an ARIMAX baseline."""

from .arima import ArimaFit, ArimaParams, ArimaSpec, css_objective, fit_css, forecast_arima, nelder_mead
from .evaluation import ComparisonRow, ComparisonTable, compare, r_squared, sse
from .ffnet import (
    NetConfig,
    TrainConfig,
    TrainedNet,
    backprop_gradient,
    count_parameters,
    forecast,
    forward,
    init_weights,
    momentum_step,
    train,
)
from .select import (
    Candidate,
    FitReport,
    Leaderboard,
    SearchSpec,
    bic,
    contiguous_orders,
    hidden_sizes,
    make_candidates,
    multi_restart_fit,
    parse_order,
    run_search,
)
from .timeseries import (
    CALL_VOLUME_TAR,
    ARMAProcess,
    ARProcess,
    DesignMatrix,
    ExogEffect,
    LagSpec,
    Scaler,
    ThresholdAR,
    TimeSeries,
    build_design_matrix,
    difference,
    fit_scaler,
    load_csv,
    simulate,
    split_train_test,
)

__version__ = "0.1.0"
