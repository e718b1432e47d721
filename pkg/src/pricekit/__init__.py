"""Option pricing and short-rate toolkit: Heston/Bates Fourier pricing,
price-MSE calibration, Asian-option Monte Carlo, and CIR term-structure
analytics with a reproducible CLI front end."""

__version__ = "0.1.0"

from .market_data import (MarketContext, OptionKind, OptionQuote, QuoteSet,
                          load_option_chain, put_to_synthetic_call, year_fraction)
from .models import (BatesParams, CfArgument, HestonParams, JumpParams,
                     bates_cf, bs_price, cf_handle, heston_cf, jump_compensator)
from .fourier_pricing import (FftConfig, IntegrationConfig, ProbPair,
                              carr_madan_grid, carr_madan_price,
                              european_call_fourier, european_put_fourier,
                              heston_probabilities)
from .calibration import (Bounds, CalibrationResult, OptimizerConfig, PricerChoice,
                          calibrate_bates_sequential, calibrate_heston,
                          differential_evolution, local_refine, price_mse)
from .montecarlo import (FeeSchedule, McEstimate, PathConfig, asian_price,
                         convergence_scan, mc_report, simulate_equity_paths)
from .rates_cir import (CirParams, RateDistribution, ZeroCurve, build_zero_curve,
                        calibrate_cir, cir_bond_price, discount_stats,
                        sample_cir_exact, simulate_cir_euler, simulate_cir_exact)
