"""Cross-pair spectral forecasting and backtesting toolkit."""

from .backtest import (
    AccountConfig,
    BacktestReport,
    EquityCurve,
    ModelSpec,
    NonlinearSpec,
    SsaForecaster,
    Trade,
    max_drawdown,
    profit,
    run_backtest,
    run_sweep,
    sharpe,
)
from .eigen import (
    EigenDecomposition,
    JacobiConfig,
    SymmetricMatrix,
    jacobi_eigen,
    reconstruct,
    rotation_angle,
)
from .nonlinear import (
    MlpNetwork,
    PolyFilter,
    TrainConfig,
    gradient_check,
    mlp_forward,
    mlp_train,
    nonlinear_forecast,
    polyfit,
)
from .quotes import (
    GapPolicy,
    PanelConfig,
    PricePanel,
    PriceScheme,
    QuoteBar,
    ReturnPanel,
    build_panel,
    build_panels,
    parse_quote_csv,
    rolling_correlation,
    smooth_panel,
    weighted_price,
)
from .ssa import (
    CorrelationMatrix,
    ForecastModel,
    ForecastRule,
    InfoMatrix,
    LagMatrix,
    Mode,
    build_info_matrix,
    build_lag_matrix,
    correlation_matrix,
    current_window,
    fit,
    forecast,
    predict_returns,
)
from .strategy import (
    Direction,
    ExitRule,
    Intent,
    Signal,
    StrategyConfig,
    generate_signals,
    next_position,
)

__version__ = "0.1.0"
