"""Heston and Bates model parameters and characteristic functions.

Both characteristic functions describe log spot at maturity, ln S_T,
including the ln S0 level and risk-neutral drift, so phi(0) = 1 and
phi(-i) = S0 * exp(r*T) (forward identity). The Heston form is the
branch-cut-safe variant that stays continuous in u, which keeps the
inversion integrals stable out to large truncation limits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteResult
from .market_data import MarketContext, OptionKind

# Below this vol-of-vol the closed form divides near-zero by near-zero;
# switch to the analytic deterministic-variance (Gaussian) limit.
SIGMA_DEGENERATE = 1e-6


@dataclass(frozen=True)
class HestonParams:
    kappa: float
    theta: float
    sigma: float
    rho: float
    v0: float

    def __post_init__(self):
        if not (self.kappa > 0):
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if not (self.theta > 0):
            raise ValueError(f"theta must be positive, got {self.theta}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")
        if not (self.v0 > 0):
            raise ValueError(f"v0 must be positive, got {self.v0}")
        if not (-1.0 <= self.rho <= 1.0):
            raise ValueError(f"rho must lie in [-1, 1], got {self.rho}")

    def feller_margin(self) -> float:
        """2*kappa*theta - sigma^2; negative means the variance floor is soft."""
        return 2.0 * self.kappa * self.theta - self.sigma**2

    def as_array(self) -> np.ndarray:
        return np.array([self.kappa, self.theta, self.sigma, self.rho, self.v0])


@dataclass(frozen=True)
class JumpParams:
    intensity: float      # jumps per year
    mean_log_jump: float
    vol_log_jump: float

    def __post_init__(self):
        if self.intensity < 0:
            raise ValueError("intensity must be nonnegative")
        if self.vol_log_jump < 0:
            raise ValueError("vol_log_jump must be nonnegative")

    def as_array(self) -> np.ndarray:
        return np.array([self.intensity, self.mean_log_jump, self.vol_log_jump])


@dataclass(frozen=True)
class BatesParams:
    heston: HestonParams
    jumps: JumpParams

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.heston.as_array(), self.jumps.as_array()])


@dataclass(frozen=True)
class CfArgument:
    """Transform variable, maturity and market context for one CF evaluation.

    ``u`` may be a scalar or an ndarray (real or complex).
    """

    u: object
    t_maturity: float
    context: MarketContext

    def __post_init__(self):
        if self.t_maturity < 0:
            raise ValueError("t_maturity must be nonnegative")


def jump_compensator(jumps: JumpParams) -> float:
    """Mean relative jump size E[e^J - 1] = exp(mu + sigma^2/2) - 1."""
    return math.exp(jumps.mean_log_jump + 0.5 * jumps.vol_log_jump**2) - 1.0


def _integrated_variance(params: HestonParams, t: float) -> float:
    """Deterministic-variance limit: integral of theta + (v0-theta)e^{-kappa s}."""
    if t == 0.0:
        return 0.0
    return params.theta * t + (params.v0 - params.theta) * (-math.expm1(-params.kappa * t)) / params.kappa


def _heston_cf_values(params: HestonParams, u, t: float, spot: float, rate: float):
    u = np.asarray(u, dtype=complex)
    log_spot = math.log(spot)
    if t == 0.0:
        return np.exp(1j * u * log_spot)
    if params.sigma < SIGMA_DEGENERATE:
        var = _integrated_variance(params, t)
        mean = log_spot + rate * t - 0.5 * var
        return np.exp(1j * u * mean - 0.5 * u**2 * var)
    sigma2 = params.sigma**2
    xi = params.kappa - 1j * params.rho * params.sigma * u
    q = 1j * u + u**2
    # At q = 0 (u = 0 or u = -i) the variance exposure vanishes and g can hit
    # a 0/0; the exact values there are phi(0) = 1 and phi(-i) = S0*e^{rt}.
    q = np.where(q == 0, 1.0, q)
    d = np.sqrt(xi**2 + sigma2 * q)
    g = (xi - d) / (xi + d)
    ed = np.exp(-d * t)
    dd = (xi - d) / sigma2 * (1.0 - ed) / (1.0 - g * ed)
    cc = 1j * u * rate * t + params.kappa * params.theta / sigma2 * (
        (xi - d) * t - 2.0 * np.log((1.0 - g * ed) / (1.0 - g))
    )
    out = np.exp(cc + dd * params.v0 + 1j * u * log_spot)
    exact = np.exp(1j * u * (log_spot + rate * t))
    return np.where(1j * u + u**2 == 0, exact, out)


def heston_cf(params: HestonParams, arg: CfArgument):
    """Characteristic function of ln S_T under Heston dynamics."""
    out = _heston_cf_values(params, arg.u, arg.t_maturity,
                            arg.context.spot, arg.context.risk_free_rate)
    if not np.all(np.isfinite(out)):
        raise NonFiniteResult("Heston CF overflowed; reduce the integration limit")
    return out if out.ndim else complex(out)


def _bates_cf_values(params: BatesParams, u, t: float, spot: float, rate: float):
    u = np.asarray(u, dtype=complex)
    base = _heston_cf_values(params.heston, u, t, spot, rate)
    jumps = params.jumps
    if jumps.intensity == 0.0 or t == 0.0:
        return base
    k_bar = jump_compensator(jumps)
    jump_cf = np.exp(1j * u * jumps.mean_log_jump - 0.5 * u**2 * jumps.vol_log_jump**2) - 1.0
    # exp(-i u lambda k_bar t) shifts the drift to r - lambda*k_bar, keeping
    # the discounted spot a martingale.
    return base * np.exp(jumps.intensity * t * jump_cf - 1j * u * jumps.intensity * k_bar * t)


def bates_cf(params: BatesParams, arg: CfArgument):
    """Characteristic function of ln S_T under Bates dynamics."""
    out = _bates_cf_values(params, arg.u, arg.t_maturity,
                           arg.context.spot, arg.context.risk_free_rate)
    if not np.all(np.isfinite(out)):
        raise NonFiniteResult("Bates CF overflowed; reduce the integration limit")
    return out if out.ndim else complex(out)


def cf_handle(params, context: MarketContext):
    """Bind params and context into a callable cf(u, t) -> complex ndarray.

    Accepts HestonParams or BatesParams; the Fourier pricers consume this.
    """
    if isinstance(params, BatesParams):
        def cf(u, t):
            return _bates_cf_values(params, u, t, context.spot, context.risk_free_rate)
    elif isinstance(params, HestonParams):
        def cf(u, t):
            return _heston_cf_values(params, u, t, context.spot, context.risk_free_rate)
    else:
        raise TypeError(f"unsupported parameter type {type(params)!r}")
    return cf


def _norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def bs_price(kind: OptionKind, spot: float, strike: float, rate: float,
             vol: float, t: float) -> float:
    """Black-Scholes value; collapses to discounted intrinsic at vol=0 or T=0."""
    if spot <= 0 or strike <= 0:
        raise ValueError("spot and strike must be positive")
    if vol < 0 or t < 0:
        raise ValueError("vol and t must be nonnegative")
    df = math.exp(-rate * t)
    forward = spot / df
    if vol == 0.0 or t == 0.0:
        intrinsic = forward - strike if kind is OptionKind.CALL else strike - forward
        return max(intrinsic, 0.0) * df
    total_vol = vol * math.sqrt(t)
    d1 = (math.log(forward / strike) + 0.5 * total_vol**2) / total_vol
    d2 = d1 - total_vol
    if kind is OptionKind.CALL:
        return df * (forward * _norm_cdf(d1) - strike * _norm_cdf(d2))
    return df * (strike * _norm_cdf(-d2) - forward * _norm_cdf(-d1))
