"""Two-asset variance-gamma models coupled through self-decomposable
gamma clocks: exact simulation, closed-form characteristic functions,
Fourier and Monte Carlo pricing, and two-step calibration for energy
forward markets."""

from .models import (
    BBSDDependence,
    BBSDInternal,
    ChfStripError,
    FeasibilityError,
    LSSDDependence,
    MartingaleError,
    ModelSpec,
    SSDDependence,
    ValidationReport,
    VGMarginal,
    bbsd_correlation_from_components,
    derive_bbsd_internal,
    drift_correction,
    gamma_chf,
    joint_chf,
    marginal_vg_chf,
    model_correlation,
    validate,
    za_chf,
)
from .sampling import (
    PathBatch,
    RngStream,
    TimeGrid,
    read_path_dump,
    sample_a_remainder,
    sample_gamma,
    sample_polya,
    sample_sd_subordinator_pair,
    simulate_paths,
    simulate_terminals,
    to_forward_prices,
    write_path_dump,
)
from .pricing import (
    FourierGrid,
    MarketFrame,
    PriceResult,
    carr_madan_calls,
    cf_spread_lower_bound,
    mc_spread_price,
    mc_spread_prices,
    mc_vanilla_price,
)
from .calibration import (
    CalibrationResult,
    DependenceFit,
    MarginalFit,
    OptionQuote,
    fit_dependence,
    fit_marginal_vg,
    historical_correlation,
    max_attainable_correlation,
)
from .market_data import (
    ForwardHistory,
    QuoteSet,
    generate_synthetic_dataset,
    load_calibration,
    load_forward_history,
    load_option_quotes,
    save_calibration,
)

__version__ = "0.1.0"
