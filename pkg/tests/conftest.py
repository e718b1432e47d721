import numpy as np
import pytest

from pricekit.calibration import PricerChoice, make_chain_pricer
from pricekit.market_data import MarketContext, OptionKind, OptionQuote, QuoteSet
from pricekit.models import BatesParams, HestonParams, JumpParams
from pricekit.rates_cir import CirParams


@pytest.fixture
def ctx():
    """SM Energy market snapshot used by the calibrated-parameter fixtures."""
    return MarketContext(spot=232.90, risk_free_rate=0.015, trading_days_per_year=250)


@pytest.fixture
def short_tenor_params():
    """Short-tenor Heston fit: vol-of-vol collapsed to ~0, positive correlation."""
    return HestonParams(kappa=0.3981, theta=0.08748, sigma=1e-8, rho=0.9906, v0=0.1016)


@pytest.fixture
def fast_reversion_params():
    """Mid-tenor Heston fit: fast mean reversion, near-deterministic variance."""
    return HestonParams(kappa=15.53, theta=0.1589, sigma=0.00103, rho=-0.00819, v0=0.04806)


@pytest.fixture
def calibrated_bates_params():
    """Mid-tenor Bates fit: jumps effectively switched off."""
    return BatesParams(
        heston=HestonParams(kappa=15.562, theta=0.15865, sigma=0.000017,
                            rho=-0.00571, v0=0.04832),
        jumps=JumpParams(intensity=0.0, mean_log_jump=-0.00592, vol_log_jump=0.0000548),
    )


@pytest.fixture
def alt_heston_params():
    """Heston fit on the parity-converted quote set."""
    return HestonParams(kappa=6.011, theta=0.2027, sigma=0.020265,
                        rho=-0.04184, v0=0.0027255)


@pytest.fixture
def euribor_cir_params():
    """CIR fit to the money-market curve: kappa=2, theta~4.22%, Feller marginal."""
    return CirParams(kappa=2.0, theta=0.0422, sigma=0.4110, r0=0.00404)


def synthetic_chain(params, ctx, maturities=(15, 60, 120), moneyness=None,
                    noise=None, rng=None) -> QuoteSet:
    """Chain of model-priced calls, optionally with additive noise."""
    if moneyness is None:
        moneyness = np.linspace(0.8, 1.2, 9)
    quotes = []
    for days in maturities:
        strikes = np.round(np.asarray(moneyness) * ctx.spot, 4)
        skeleton = QuoteSet(ctx, tuple(
            OptionQuote(OptionKind.CALL, float(k), days, 1.0) for k in strikes))
        pricer, ordered, _ = make_chain_pricer(skeleton, PricerChoice.LEWIS_INTEGRAL)
        prices = pricer(params)
        if noise is not None:
            prices = prices + rng.uniform(-noise, noise, size=prices.shape)
        for q, p in zip(ordered, prices):
            quotes.append(OptionQuote(OptionKind.CALL, q.strike, days, max(float(p), 0.0)))
    return QuoteSet(ctx, tuple(quotes))


def random_heston(rng) -> HestonParams:
    """Admissible draw in the regimes the Fourier pricers are specified for."""
    return HestonParams(
        kappa=rng.uniform(0.2, 8.0),
        theta=rng.uniform(0.01, 0.5),
        sigma=rng.uniform(0.05, 1.0),
        rho=rng.uniform(-0.95, 0.95),
        v0=rng.uniform(0.01, 0.5),
    )


def random_bates(rng) -> BatesParams:
    return BatesParams(
        heston=random_heston(rng),
        jumps=JumpParams(intensity=rng.uniform(0.0, 2.0),
                         mean_log_jump=rng.uniform(-0.3, 0.2),
                         vol_log_jump=rng.uniform(0.0, 0.3)),
    )
