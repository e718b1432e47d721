"""Path simulation and arithmetic-Asian Monte Carlo pricing.

The price uses a log-Euler step (so paths stay positive) and the variance a
full-truncation Euler step. Jumps arrive as Poisson counts per step with
lognormal sizes; the drift carries the r - lambda*kbar compensator so the
discounted spot stays a martingale. All draws come from one seeded
generator in a fixed order, which makes every estimate reproducible and
lets a convergence scan reuse path prefixes of a single large run.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .market_data import MarketContext, OptionKind
from .models import BatesParams, HestonParams, JumpParams, jump_compensator


@dataclass(frozen=True)
class PathConfig:
    n_paths: int
    n_steps: int
    seed: int = 0
    scheme: str = "euler_full_truncation"

    def __post_init__(self):
        if self.n_paths < 1000:
            raise ValueError("n_paths must be at least 1000")
        if self.n_steps < 1:
            raise ValueError("n_steps must be at least 1")
        if self.scheme != "euler_full_truncation":
            raise ValueError(f"unknown scheme {self.scheme!r}")


@dataclass(frozen=True)
class McEstimate:
    fair_price: float
    std_error: float
    ci_low: float
    ci_high: float
    n_paths_used: int
    elapsed_seconds: float

    def __post_init__(self):
        if not (self.ci_low <= self.fair_price <= self.ci_high):
            raise ValueError("confidence interval must bracket the price")
        half = 1.96 * self.std_error
        if abs((self.ci_high - self.ci_low) / 2.0 - half) > 1e-9 * max(1.0, half):
            raise ValueError("CI half-width must equal 1.96 * std_error")


@dataclass(frozen=True)
class FeeSchedule:
    fee_fraction: float = 0.04

    def __post_init__(self):
        if self.fee_fraction < 0:
            raise ValueError("fee_fraction must be nonnegative")


def _as_bates(params) -> BatesParams:
    if isinstance(params, HestonParams):
        return BatesParams(params, JumpParams(0.0, 0.0, 0.0))
    if isinstance(params, BatesParams):
        return params
    raise TypeError(f"unsupported parameter type {type(params)!r}")


def simulate_equity_paths(params, context: MarketContext, t: float,
                          cfg: PathConfig) -> np.ndarray:
    """Price paths, shape (n_paths, n_steps+1), all starting at the spot."""
    params = _as_bates(params)
    h, jumps = params.heston, params.jumps
    rng = np.random.default_rng(cfg.seed)
    n_paths, n_steps = cfg.n_paths, cfg.n_steps
    dt = t / n_steps
    sqrt_dt = math.sqrt(dt)
    k_bar = jump_compensator(jumps)
    drift_rate = context.risk_free_rate - jumps.intensity * k_bar
    rho_c = math.sqrt(max(1.0 - h.rho**2, 0.0))

    log_s = np.full(n_paths, math.log(context.spot))
    v = np.full(n_paths, h.v0)
    out = np.empty((n_paths, n_steps + 1))
    out[:, 0] = context.spot
    for step in range(n_steps):
        z = rng.standard_normal((2, n_paths))
        z_s = z[0]
        z_v = h.rho * z[0] + rho_c * z[1]
        v_plus = np.maximum(v, 0.0)
        log_s += (drift_rate - 0.5 * v_plus) * dt + np.sqrt(v_plus) * sqrt_dt * z_s
        if jumps.intensity > 0.0:
            counts = rng.poisson(jumps.intensity * dt, n_paths)
            jump_sum = (jumps.mean_log_jump * counts
                        + jumps.vol_log_jump * np.sqrt(counts) * rng.standard_normal(n_paths))
            log_s += jump_sum
        v = v + h.kappa * (h.theta - v_plus) * dt + h.sigma * np.sqrt(v_plus) * sqrt_dt * z_v
        out[:, step + 1] = np.exp(log_s)
    return out


def _estimate_from_payoffs(discounted: np.ndarray, elapsed: float) -> McEstimate:
    n = discounted.size
    fair = float(discounted.mean())
    se = float(discounted.std(ddof=1) / math.sqrt(n))
    return McEstimate(fair_price=fair, std_error=se,
                      ci_low=fair - 1.96 * se, ci_high=fair + 1.96 * se,
                      n_paths_used=n, elapsed_seconds=elapsed)


def _asian_payoffs(kind: OptionKind, paths: np.ndarray, strike: float) -> np.ndarray:
    average = paths.mean(axis=1)  # includes t=0, n_steps+1 observations
    if kind is OptionKind.CALL:
        return np.maximum(average - strike, 0.0)
    return np.maximum(strike - average, 0.0)


def asian_price(kind: OptionKind, params, context: MarketContext, strike: float,
                t: float, cfg: PathConfig,
                fees: FeeSchedule = FeeSchedule()) -> tuple[McEstimate, float]:
    """Arithmetic-average Asian option: (fair-value estimate, client price)."""
    start = time.perf_counter()
    paths = simulate_equity_paths(params, context, t, cfg)
    payoffs = _asian_payoffs(kind, paths, strike)
    discounted = math.exp(-context.risk_free_rate * t) * payoffs
    estimate = _estimate_from_payoffs(discounted, time.perf_counter() - start)
    client = (1.0 + fees.fee_fraction) * estimate.fair_price
    return estimate, client


def convergence_scan(kind: OptionKind, params, context: MarketContext, strike: float,
                     t: float, path_counts, base_cfg: PathConfig) -> list[tuple[int, McEstimate]]:
    """Estimates at increasing path counts sharing one random-number stream.

    The estimate at n is computed from the first n paths of the largest run,
    so the scan is a genuine convergence trace rather than independent runs.
    """
    counts = list(path_counts)
    if counts != sorted(counts) or len(set(counts)) != len(counts):
        raise ValueError("path_counts must be strictly increasing")
    start = time.perf_counter()
    big = PathConfig(n_paths=max(counts), n_steps=base_cfg.n_steps,
                     seed=base_cfg.seed, scheme=base_cfg.scheme)
    paths = simulate_equity_paths(params, context, t, big)
    payoffs = _asian_payoffs(kind, paths, strike)
    discounted = math.exp(-context.risk_free_rate * t) * payoffs
    elapsed = time.perf_counter() - start
    return [(n, _estimate_from_payoffs(discounted[:n], elapsed)) for n in counts]


def mc_report(estimate: McEstimate, fees: FeeSchedule = FeeSchedule()) -> dict:
    """Fee/fair decomposition of the client price."""
    fair = estimate.fair_price
    fee_amount = fees.fee_fraction * fair
    client = fair + fee_amount
    return {
        "fair_price": fair,
        "std_error": estimate.std_error,
        "ci_low": estimate.ci_low,
        "ci_high": estimate.ci_high,
        "n_paths_used": estimate.n_paths_used,
        "fee_fraction": fees.fee_fraction,
        "fee_amount": fee_amount,
        "client_price": client,
        "fee_share_of_client": fee_amount / client if client != 0.0 else 0.0,
    }
