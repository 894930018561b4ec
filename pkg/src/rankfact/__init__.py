"""rankfact: factorization of equity returns in a ranked market.

Splits relative log returns into distributional, rank and dividend components,
estimates cumulative local times at rank boundaries, and simulates
random-price null markets in which small-over-large outperformance is purely
mechanical.
"""

from .errors import CapabilityError, CoverageError, PanelParseError, PanelValidationError
from .factorization import (
    ComponentDecomposition,
    ComponentSeries,
    PortfolioSpec,
    SizeEffectResult,
    StockComponents,
    decimate,
    decompose_portfolio_series,
    decompose_portfolio_vs_market,
    decompose_portfolio_vs_portfolio,
    decompose_stock,
    decompose_stock_series,
    decompose_stocks,
    market_dividend_rate,
    pair_view,
    portfolio_value,
    series_from_csv,
    series_to_csv,
    series_to_json,
    size_effect_check,
)
from .generating import (
    CovarianceEstimate,
    GeneratingFunction,
    bottom_sum,
    entropy_function,
    entropy_portfolio,
    estimate_covariances,
    excess_growth_rate,
    distributional_increment,
    fgp_weights,
    linear_function,
    market_entropy,
    market_sum,
    smooth_drift_increment,
    top_m_sum,
)
from .localtime import (
    LocalTimePath,
    localtime_portfolio,
    localtime_profile,
    localtime_tanaka,
    paths_to_csv,
    profile_to_matrix_csv,
    tanaka_increment,
)
from .panel import (
    MarketPanel,
    WeightVector,
    load_exclusions,
    load_panel,
    market_weights,
    save_panel,
    total_market_cap,
)
from .ranking import RankPermutation, gap, rank, ranked_weights
from .report import (
    AggregateTable,
    RunConfig,
    build_table_from_files,
    emit_rolling,
    run_decomposition,
    run_localtimes,
    run_report,
)
from .simulate import NullExperimentResult, SimConfig, null_size_experiment, simulate

__version__ = "0.1.0"
