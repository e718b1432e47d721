import numpy as np
import pytest

from conftest import synthetic_chain
from pricekit.calibration import (DEFAULT_HESTON_BOUNDS, Bounds, CalibrationResult,
                                  OptimizerConfig, PricerChoice, calibrate_bates_sequential,
                                  calibrate_heston, differential_evolution, local_refine,
                                  make_chain_pricer, price_mse)
from pricekit.errors import EmptyQuoteSet, NoFiniteObjective
from pricekit.market_data import MarketContext, OptionKind, OptionQuote, QuoteSet
from pricekit.models import HestonParams

FAST = OptimizerConfig(de_population=30, de_generations=40, de_seed=0)


class TestBoundsAndConfig:
    def test_bounds_validation(self):
        with pytest.raises(ValueError):
            Bounds(((1.0, 0.5),))

    def test_contains(self):
        b = Bounds(((0.0, 1.0), (-1.0, 1.0)))
        assert b.contains([0.5, 0.0])
        assert not b.contains([1.5, 0.0])

    def test_population_default_scales_with_dim(self):
        cfg = OptimizerConfig()
        assert cfg.population_for(5) == 75
        assert OptimizerConfig(de_population=20).population_for(5) == 20

    def test_result_rejects_inconsistent_errors(self):
        p = HestonParams(1.0, 0.04, 0.3, -0.5, 0.04)
        with pytest.raises(ValueError):
            CalibrationResult(params=p, mse=1.0, mae=2.0, n_quotes=1,
                              objective_evals=1, converged=True,
                              residuals=[], stage_log=[])


class TestPriceMse:
    def test_exact_fit_is_zero(self, ctx, fast_reversion_params):
        chain = synthetic_chain(fast_reversion_params, ctx)
        pricer, _, _ = make_chain_pricer(chain, PricerChoice.LEWIS_INTEGRAL)
        mse, mae = price_mse(fast_reversion_params, chain, pricer)
        assert mse < 1e-20 and mae < 1e-10

    def test_constant_offset(self, ctx, fast_reversion_params):
        chain = synthetic_chain(fast_reversion_params, ctx)
        base, _, market = make_chain_pricer(chain, PricerChoice.LEWIS_INTEGRAL)
        mse, mae = price_mse(fast_reversion_params, chain,
                             lambda p: base(p) + 0.25)
        assert mse == pytest.approx(0.0625, rel=1e-12)
        assert mae == pytest.approx(0.25, rel=1e-12)

    def test_uniform_noise_variance(self, ctx, fast_reversion_params):
        # additive U(-0.5, 0.5) noise has variance 1/12 ~ 0.0833
        rng = np.random.default_rng(7)
        chain = synthetic_chain(fast_reversion_params, ctx,
                                maturities=(15, 30, 60, 90, 120, 180, 250, 375),
                                moneyness=np.linspace(0.8, 1.2, 25),
                                noise=0.5, rng=rng)
        pricer, _, _ = make_chain_pricer(chain, PricerChoice.LEWIS_INTEGRAL)
        mse, _ = price_mse(fast_reversion_params, chain, pricer)
        assert mse == pytest.approx(1.0 / 12.0, rel=0.20)

    def test_nonfinite_model_prices_are_penalized(self, ctx, fast_reversion_params):
        chain = synthetic_chain(fast_reversion_params, ctx, maturities=(60,))
        mse, mae = price_mse(fast_reversion_params, chain,
                             lambda p: np.full(len(chain), np.nan))
        assert mse == 1e6 and mae == 1e6

    def test_empty_quote_set(self, ctx, fast_reversion_params):
        with pytest.raises(EmptyQuoteSet):
            price_mse(fast_reversion_params, QuoteSet(ctx, ()), lambda p: np.array([]))

    def test_quote_order_invariance(self, ctx, fast_reversion_params):
        chain = synthetic_chain(fast_reversion_params, ctx)
        shuffled = QuoteSet(ctx, tuple(reversed(chain.quotes)))
        p1, _, _ = make_chain_pricer(chain, PricerChoice.LEWIS_INTEGRAL)
        p2, _, _ = make_chain_pricer(shuffled, PricerChoice.LEWIS_INTEGRAL)
        wrong = HestonParams(2.0, 0.09, 0.4, -0.3, 0.06)
        assert price_mse(wrong, chain, p1) == price_mse(wrong, shuffled, p2)

    def test_put_pricing_through_parity(self, ctx, fast_reversion_params):
        call = OptionQuote(OptionKind.CALL, 235.0, 60, 10.0)
        put = OptionQuote(OptionKind.PUT, 235.0, 60, 10.0)
        chain = QuoteSet(ctx, (call, put))
        pricer, ordered, _ = make_chain_pricer(chain, PricerChoice.LEWIS_INTEGRAL)
        model = pricer(fast_reversion_params)
        df = np.exp(-ctx.risk_free_rate * 60 / 250)
        i_call = next(i for i, q in enumerate(ordered) if q.kind is OptionKind.CALL)
        i_put = 1 - i_call
        assert model[i_call] - model[i_put] == pytest.approx(
            ctx.spot - 235.0 * df, abs=1e-9)


class TestDifferentialEvolution:
    def test_sphere(self):
        bounds = Bounds(((-5.0, 5.0),) * 4)
        cfg = OptimizerConfig(de_population=40, de_generations=150, de_seed=0)
        x = differential_evolution(lambda v: float(np.sum(v**2)), bounds, cfg)
        assert np.linalg.norm(x) < 0.05

    def test_rosenbrock(self):
        bounds = Bounds(((-2.0, 2.0), (-2.0, 2.0)))
        cfg = OptimizerConfig(de_population=40, de_generations=200, de_seed=1)
        x = differential_evolution(
            lambda v: float(100 * (v[1] - v[0]**2)**2 + (1 - v[0])**2), bounds, cfg)
        assert np.allclose(x, [1.0, 1.0], atol=0.02)

    def test_deterministic_under_seed(self):
        bounds = Bounds(((-5.0, 5.0),) * 3)
        obj = lambda v: float(np.sum((v - 1.2)**2))
        a = differential_evolution(obj, bounds, FAST)
        b = differential_evolution(obj, bounds, FAST)
        assert np.array_equal(a, b)

    def test_seed_changes_trajectory(self):
        bounds = Bounds(((-5.0, 5.0),) * 3)
        obj = lambda v: float(np.sum(np.sin(3 * v) + 0.1 * v**2))
        a = differential_evolution(obj, bounds, OptimizerConfig(de_population=12, de_generations=5, de_seed=0))
        b = differential_evolution(obj, bounds, OptimizerConfig(de_population=12, de_generations=5, de_seed=99))
        assert not np.array_equal(a, b)

    def test_respects_bounds(self):
        bounds = Bounds(((0.5, 2.0),))
        # unconstrained minimum at 0 sits outside the box
        x = differential_evolution(lambda v: float(v[0]**2), bounds, FAST)
        assert x[0] == pytest.approx(0.5, abs=1e-6)

    def test_all_nonfinite_raises(self):
        bounds = Bounds(((-1.0, 1.0),))
        with pytest.raises(NoFiniteObjective):
            differential_evolution(lambda v: float("nan"), bounds, FAST)


class TestLocalRefine:
    def test_quadratic_exact(self):
        bounds = Bounds(((-10.0, 10.0),) * 3)
        target = np.array([0.3, -1.7, 4.2])
        x = local_refine(lambda v: float(np.sum((v - target)**2)),
                         np.zeros(3), bounds, OptimizerConfig())
        assert np.allclose(x, target, atol=1e-6)

    def test_never_returns_worse_point(self):
        bounds = Bounds(((-1.0, 1.0),))
        # pathological objective: any move from 0 looks worse
        obj = lambda v: float(abs(v[0]))
        x = local_refine(obj, np.array([0.0]), bounds, OptimizerConfig())
        assert obj(x) <= 0.0

    def test_stays_in_bounds(self):
        bounds = Bounds(((0.5, 2.0),))
        x = local_refine(lambda v: float(v[0]**2), np.array([1.0]), bounds,
                         OptimizerConfig())
        assert 0.5 <= x[0] <= 2.0


class TestCalibrateHeston:
    def test_needs_five_strikes(self, ctx):
        quotes = QuoteSet(ctx, tuple(
            OptionQuote(OptionKind.CALL, k, 60, 5.0) for k in (220.0, 230.0, 240.0)))
        with pytest.raises(ValueError, match="five"):
            calibrate_heston(quotes)

    def test_recovers_synthetic_surface(self, ctx):
        true = HestonParams(kappa=3.0, theta=0.09, sigma=0.45, rho=-0.6, v0=0.06)
        chain = synthetic_chain(true, ctx)
        res = calibrate_heston(chain, cfg=FAST)
        assert res.mse < 1e-3
        assert res.n_quotes == len(chain)
        assert res.objective_evals > 0
        assert len(res.residuals) == len(chain)

    def test_detects_degenerate_vol_of_vol(self, ctx, fast_reversion_params):
        # surface generated with sigma ~ 0 should calibrate to tiny vol-of-vol
        chain = synthetic_chain(fast_reversion_params, ctx)
        res = calibrate_heston(chain, cfg=OptimizerConfig(
            de_population=40, de_generations=80, de_seed=0))
        assert res.mse < 1e-4
        assert res.params.sigma < 0.05

    def test_result_independent_of_quote_order(self, ctx, fast_reversion_params):
        chain = synthetic_chain(fast_reversion_params, ctx, maturities=(60,))
        shuffled = QuoteSet(ctx, tuple(reversed(chain.quotes)))
        small = OptimizerConfig(de_population=15, de_generations=10, de_seed=0)
        a = calibrate_heston(chain, cfg=small)
        b = calibrate_heston(shuffled, cfg=small)
        assert a.params == b.params
        assert a.mse == b.mse

    def test_fft_pricer_route(self, ctx):
        true = HestonParams(kappa=3.0, theta=0.09, sigma=0.45, rho=-0.6, v0=0.06)
        chain = synthetic_chain(true, ctx, maturities=(60,))
        res = calibrate_heston(chain, pricer_choice=PricerChoice.CARR_MADAN_FFT, cfg=FAST)
        assert res.mse < 1e-2


class TestCalibrateBates:
    def test_stage_mses_non_increasing(self, ctx):
        true = HestonParams(kappa=3.0, theta=0.09, sigma=0.45, rho=-0.6, v0=0.06)
        chain = synthetic_chain(true, ctx, maturities=(60,))
        small = OptimizerConfig(de_population=20, de_generations=15, de_seed=0)
        res = calibrate_bates_sequential(chain, cfg=small)
        mses = [entry["mse"] for entry in res.stage_log]
        assert len(mses) == 3
        assert mses[0] >= mses[1] >= mses[2]
        assert res.mse == mses[2]

    def test_diffusion_only_surface_keeps_jumps_small(self, ctx, fast_reversion_params):
        chain = synthetic_chain(fast_reversion_params, ctx, maturities=(60,))
        small = OptimizerConfig(de_population=20, de_generations=15, de_seed=0)
        res = calibrate_bates_sequential(chain, cfg=small)
        assert res.mse < 1e-3
        jump_effect = res.params.jumps.intensity * (
            abs(res.params.jumps.mean_log_jump) + res.params.jumps.vol_log_jump)
        assert jump_effect < 0.05
