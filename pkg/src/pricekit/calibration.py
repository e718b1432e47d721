"""Model calibration by price-MSE minimization.

The optimizer stack is a global differential-evolution search (rand/1/bin,
F=0.8, CR=0.9, deterministic under a fixed seed) followed by bounded
L-BFGS-B refinement. Heston calibrates all five parameters at once; Bates
runs the staged procedure: Heston first, then jump parameters with the
diffusion frozen, then a joint re-optimization seeded from stage two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import minimize

from .errors import EmptyQuoteSet, NoFiniteObjective
from .fourier_pricing import CarrMadanPricer, FftConfig, IntegrationConfig, _call_values
from .market_data import OptionKind, QuoteSet, year_fraction
from .models import BatesParams, HestonParams, JumpParams, cf_handle

PENALTY_PER_QUOTE = 1e6

DEFAULT_HESTON_BOUNDS = (
    (0.01, 20.0),    # kappa
    (1e-3, 1.0),     # theta
    (1e-6, 2.0),     # sigma
    (-0.999, 0.999), # rho
    (1e-3, 1.0),     # v0
)
DEFAULT_JUMP_BOUNDS = (
    (0.0, 5.0),      # intensity
    (-0.5, 0.5),     # mean log jump
    (1e-6, 1.0),     # vol log jump
)
DEFAULT_BATES_BOUNDS = DEFAULT_HESTON_BOUNDS + DEFAULT_JUMP_BOUNDS


class PricerChoice(Enum):
    LEWIS_INTEGRAL = "lewis"
    CARR_MADAN_FFT = "fft"


@dataclass(frozen=True)
class Bounds:
    pairs: tuple

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(tuple(p) for p in self.pairs))
        for lo, hi in self.pairs:
            if not (lo < hi):
                raise ValueError(f"bound ({lo}, {hi}) must satisfy lower < upper")

    def __len__(self):
        return len(self.pairs)

    def lower(self) -> np.ndarray:
        return np.array([p[0] for p in self.pairs])

    def upper(self) -> np.ndarray:
        return np.array([p[1] for p in self.pairs])

    def contains(self, x) -> bool:
        x = np.asarray(x)
        return bool(np.all(x >= self.lower()) and np.all(x <= self.upper()))


@dataclass(frozen=True)
class OptimizerConfig:
    de_population: int | None = None   # None -> 15 * dimension
    de_generations: int = 300
    de_seed: int = 0
    de_stagnation: int = 50
    local_max_iter: int = 500
    tolerance: float = 1e-10

    def __post_init__(self):
        if self.de_population is not None and self.de_population < 10:
            raise ValueError("population must be at least 10")
        if not (self.tolerance > 0):
            raise ValueError("tolerance must be positive")

    def population_for(self, dim: int) -> int:
        return self.de_population if self.de_population is not None else 15 * dim


@dataclass
class CalibrationResult:
    params: object
    mse: float
    mae: float
    n_quotes: int
    objective_evals: int
    converged: bool
    residuals: list = field(default_factory=list)
    stage_log: list = field(default_factory=list)

    def __post_init__(self):
        if self.mse < 0 or self.mae < 0:
            raise ValueError("error metrics must be nonnegative")
        if self.mae > math.sqrt(self.mse) + 1e-9:
            raise ValueError("mae cannot exceed sqrt(mse)")


def _sorted_quotes(quotes: QuoteSet):
    return sorted(quotes, key=lambda q: (q.kind.value, q.maturity_days, q.strike))


def make_chain_pricer(quotes: QuoteSet, pricer_choice: PricerChoice,
                      integration: IntegrationConfig = IntegrationConfig(),
                      fft: FftConfig = FftConfig()):
    """Build pricer(params) -> model prices aligned with the sorted quote key order.

    Quotes are grouped by maturity so each objective evaluation computes one
    CF (or one FFT grid) per maturity. Puts are priced directly through parity
    off the call values.
    """
    ordered = _sorted_quotes(quotes)
    ctx = quotes.context
    groups: dict[int, list[int]] = {}
    for i, q in enumerate(ordered):
        groups.setdefault(q.maturity_days, []).append(i)

    def pricer(params) -> np.ndarray:
        cf = cf_handle(params, ctx)
        out = np.empty(len(ordered))
        for days, idx in groups.items():
            t = year_fraction(days, ctx)
            strikes = np.array([ordered[i].strike for i in idx])
            if pricer_choice is PricerChoice.LEWIS_INTEGRAL:
                calls = _call_values(cf, ctx.spot, strikes, ctx.risk_free_rate, t, integration)
            else:
                grid = CarrMadanPricer(cf, ctx.spot, ctx.risk_free_rate, t, fft)
                calls = np.array([grid(k) for k in strikes])
            df = math.exp(-ctx.risk_free_rate * t)
            for i, call in zip(idx, calls):
                q = ordered[i]
                out[i] = call if q.kind is OptionKind.CALL else call - ctx.spot + q.strike * df
        return out

    market = np.array([q.price for q in ordered])
    return pricer, ordered, market


def price_mse(params, quotes: QuoteSet, pricer) -> tuple[float, float]:
    """(mse, mae) of model vs market prices; non-finite prices are penalized.

    ``pricer`` maps params to model prices in the sorted quote order, so the
    result is independent of the file order of the quotes.
    """
    if len(quotes) == 0:
        raise EmptyQuoteSet("cannot compute errors on an empty quote set")
    ordered = _sorted_quotes(quotes)
    market = np.array([q.price for q in ordered])
    try:
        model = np.asarray(pricer(params), dtype=float)
    except (FloatingPointError, OverflowError):
        model = np.full(len(market), np.nan)
    err = model - market
    bad = ~np.isfinite(err)
    sq = np.where(bad, PENALTY_PER_QUOTE, err**2)
    ab = np.where(bad, PENALTY_PER_QUOTE, np.abs(err))
    return float(sq.mean()), float(ab.mean())


def differential_evolution(objective, bounds: Bounds, cfg: OptimizerConfig) -> np.ndarray:
    """DE/rand/1/bin global minimizer, bitwise deterministic under de_seed."""
    rng = np.random.default_rng(cfg.de_seed)
    lo, hi = bounds.lower(), bounds.upper()
    dim = len(bounds)
    n_pop = cfg.population_for(dim)
    pop = lo + rng.random((n_pop, dim)) * (hi - lo)
    fitness = np.array([objective(x) for x in pop])
    if not np.any(np.isfinite(fitness)):
        raise NoFiniteObjective("objective is non-finite everywhere in the initial population")

    best_idx = int(np.argmin(fitness))
    best_val = fitness[best_idx]
    flat_generations = 0
    f_weight, crossover = 0.8, 0.9
    for _ in range(cfg.de_generations):
        for i in range(n_pop):
            choices = rng.choice(n_pop - 1, size=3, replace=False)
            choices = np.where(choices >= i, choices + 1, choices)
            a, b, c = pop[choices]
            mutant = np.clip(a + f_weight * (b - c), lo, hi)
            cross = rng.random(dim) < crossover
            cross[rng.integers(dim)] = True
            trial = np.where(cross, mutant, pop[i])
            f_trial = objective(trial)
            if f_trial < fitness[i]:
                pop[i] = trial
                fitness[i] = f_trial
        gen_best = int(np.argmin(fitness))
        if fitness[gen_best] < best_val - cfg.tolerance:
            best_val = fitness[gen_best]
            best_idx = gen_best
            flat_generations = 0
        else:
            flat_generations += 1
            if flat_generations >= cfg.de_stagnation:
                break
    return pop[int(np.argmin(fitness))].copy()


def local_refine(objective, start, bounds: Bounds, cfg: OptimizerConfig) -> np.ndarray:
    """Bounded quasi-Newton polish; never returns a point worse than start."""
    start = np.asarray(start, dtype=float)
    if not bounds.contains(start):
        raise ValueError("start must lie within bounds")
    result = minimize(
        objective, start, method="L-BFGS-B", bounds=bounds.pairs,
        jac="3-point",
        options={"maxiter": cfg.local_max_iter, "ftol": 1e-15, "gtol": 1e-12,
                 "finite_diff_rel_step": 1e-6},
    )
    if np.isfinite(result.fun) and result.fun <= objective(start):
        return np.asarray(result.x)
    return start


def _heston_from_vec(x) -> HestonParams:
    return HestonParams(kappa=x[0], theta=x[1], sigma=x[2], rho=x[3], v0=x[4])


def _bates_from_vec(x) -> BatesParams:
    return BatesParams(heston=_heston_from_vec(x[:5]),
                       jumps=JumpParams(intensity=x[5], mean_log_jump=x[6], vol_log_jump=x[7]))


class _CountingObjective:
    def __init__(self, quotes, pricer, to_params):
        self.quotes = quotes
        self.pricer = pricer
        self.to_params = to_params
        self.evals = 0

    def __call__(self, x) -> float:
        self.evals += 1
        try:
            params = self.to_params(x)
        except ValueError:
            return PENALTY_PER_QUOTE
        return price_mse(params, self.quotes, self.pricer)[0]


def _run_two_stage(obj, bounds: Bounds, cfg: OptimizerConfig, start=None) -> np.ndarray:
    best = differential_evolution(obj, bounds, cfg)
    if start is not None and obj(np.asarray(start)) < obj(best):
        best = np.asarray(start, dtype=float)
    return local_refine(obj, best, bounds, cfg)


def calibrate_heston(quotes: QuoteSet,
                     pricer_choice: PricerChoice = PricerChoice.LEWIS_INTEGRAL,
                     cfg: OptimizerConfig = OptimizerConfig(),
                     bounds: Bounds = Bounds(DEFAULT_HESTON_BOUNDS)) -> CalibrationResult:
    """Fit (kappa, theta, sigma, rho, v0) to an option chain."""
    if len({q.strike for q in quotes}) < 5:
        raise ValueError("need at least five distinct strikes")
    pricer, ordered, market = make_chain_pricer(quotes, pricer_choice)
    obj = _CountingObjective(quotes, pricer, _heston_from_vec)
    x = _run_two_stage(obj, bounds, cfg)
    params = _heston_from_vec(x)
    mse, mae = price_mse(params, quotes, pricer)
    model = pricer(params)
    residuals = [
        {"kind": q.kind.value, "strike": q.strike, "maturity_days": q.maturity_days,
         "market": q.price, "model": float(m), "error": float(m - q.price)}
        for q, m in zip(ordered, model)
    ]
    return CalibrationResult(params=params, mse=mse, mae=mae, n_quotes=len(quotes),
                             objective_evals=obj.evals, converged=True,
                             residuals=residuals,
                             stage_log=[{"stage": "heston", "mse": mse}])


def calibrate_bates_sequential(quotes: QuoteSet,
                               pricer_choice: PricerChoice = PricerChoice.LEWIS_INTEGRAL,
                               cfg: OptimizerConfig = OptimizerConfig(),
                               bounds: Bounds = Bounds(DEFAULT_BATES_BOUNDS)) -> CalibrationResult:
    """Three-stage Bates fit: diffusion, then jumps, then joint refinement.

    Stage MSEs are non-increasing: each stage starts from (or re-injects) the
    previous stage's solution.
    """
    heston_bounds = Bounds(bounds.pairs[:5])
    jump_bounds = Bounds(bounds.pairs[5:])
    pricer, ordered, market = make_chain_pricer(quotes, pricer_choice)
    stage_log = []

    # stage 1: pure Heston
    stage1 = calibrate_heston(quotes, pricer_choice, cfg, heston_bounds)
    hvec = stage1.params.as_array()
    stage_log.append({"stage": "heston", "mse": stage1.mse})

    # stage 2: jumps only, diffusion frozen
    obj_all = _CountingObjective(quotes, pricer, _bates_from_vec)
    obj_all.evals = stage1.objective_evals

    def obj_jumps(y):
        return obj_all(np.concatenate([hvec, y]))

    jump_start = np.array([0.0, 0.0, jump_bounds.pairs[2][0]])
    y = _run_two_stage(obj_jumps, jump_bounds, cfg, start=jump_start)
    stage2_vec = np.concatenate([hvec, y])
    stage2_mse = obj_all(stage2_vec)
    if stage1.mse < stage2_mse:  # jumps-off fallback keeps the stage monotone
        stage2_vec = np.concatenate([hvec, jump_start])
        stage2_mse = obj_all(stage2_vec)
    stage_log.append({"stage": "jumps", "mse": stage2_mse})

    # stage 3: joint re-optimization seeded from stage 2
    x = _run_two_stage(obj_all, bounds, cfg, start=stage2_vec)
    if obj_all(x) > stage2_mse:
        x = stage2_vec
    params = _bates_from_vec(x)
    mse, mae = price_mse(params, quotes, pricer)
    stage_log.append({"stage": "joint", "mse": mse})

    model = pricer(params)
    residuals = [
        {"kind": q.kind.value, "strike": q.strike, "maturity_days": q.maturity_days,
         "market": q.price, "model": float(m), "error": float(m - q.price)}
        for q, m in zip(ordered, model)
    ]
    return CalibrationResult(params=params, mse=mse, mae=mae, n_quotes=len(quotes),
                             objective_evals=obj_all.evals, converged=True,
                             residuals=residuals, stage_log=stage_log)
