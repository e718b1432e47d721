"""European option prices from a characteristic function.

Two routes:

* probability integrals: C = S0*P1 - K*exp(-r*T)*P2, with P1/P2 recovered by
  Fourier inversion of the CF on a truncated interval [0, umax];
* damped transform on an FFT log-strike grid (Carr-Madan style), with
  cubic interpolation at the requested strike.

Both consume a ``cf(u, t)`` handle as produced by ``models.cf_handle``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import IntegrationDiverged, NonFiniteGrid, StrikeOutOfGrid

_CLAMP_TOL = 1e-9


@dataclass(frozen=True)
class IntegrationConfig:
    umax: float = 200.0
    n_points: int = 512

    def __post_init__(self):
        if not (self.umax > 0):
            raise ValueError("umax must be positive")
        if self.n_points < 64:
            raise ValueError("n_points must be at least 64")


@dataclass(frozen=True)
class FftConfig:
    alpha: float = 1.5
    n_grid: int = 4096
    eta: float = 0.25

    def __post_init__(self):
        if not (self.alpha > 0):
            raise ValueError("alpha must be positive")
        if self.n_grid < 2 or (self.n_grid & (self.n_grid - 1)) != 0:
            raise ValueError("n_grid must be a power of two")
        if not (self.eta > 0):
            raise ValueError("eta must be positive")

    @property
    def log_strike_spacing(self) -> float:
        return 2.0 * math.pi / (self.n_grid * self.eta)


@dataclass(frozen=True)
class ProbPair:
    p1: float
    p2: float

    def __post_init__(self):
        for name, p in (("p1", self.p1), ("p2", self.p2)):
            if not (-_CLAMP_TOL <= p <= 1.0 + _CLAMP_TOL):
                raise ValueError(f"{name}={p} outside [0, 1]")


@lru_cache(maxsize=8)
def _gauss_legendre(umax: float, n_points: int):
    x, w = np.polynomial.legendre.leggauss(n_points)
    nodes = 0.5 * umax * (x + 1.0)
    weights = 0.5 * umax * w
    return nodes, weights


def _prob_integrals(cf, spot, strikes, t, cfg: IntegrationConfig):
    """P1/P2 column vectors for an array of strikes at one maturity."""
    strikes = np.atleast_1d(np.asarray(strikes, dtype=float))
    u, w = _gauss_legendre(cfg.umax, cfg.n_points)
    phi2 = cf(u, t)
    forward = cf(np.asarray(-1j), t).real.item()  # = S0 * exp(r*T)
    phi1 = cf(u - 1j, t) / forward
    kernel = np.exp(-1j * np.outer(u, np.log(strikes))) / (1j * u)[:, None]
    integrand1 = (kernel * phi1[:, None]).real
    integrand2 = (kernel * phi2[:, None]).real
    if not (np.all(np.isfinite(integrand1)) and np.all(np.isfinite(integrand2))):
        raise IntegrationDiverged("non-finite inversion integrand")
    p1 = 0.5 + (w @ integrand1) / math.pi
    p2 = 0.5 + (w @ integrand2) / math.pi
    return np.clip(p1, 0.0, 1.0), np.clip(p2, 0.0, 1.0), forward


def heston_probabilities(cf, spot: float, strike: float, rate: float, t: float,
                         cfg: IntegrationConfig = IntegrationConfig()) -> ProbPair:
    """Exercise probabilities P1 (stock measure) and P2 (risk-neutral)."""
    if strike <= 0 or spot <= 0:
        raise ValueError("spot and strike must be positive")
    if t <= 0:
        raise ValueError("t must be positive")
    p1, p2, _ = _prob_integrals(cf, spot, [strike], t, cfg)
    return ProbPair(float(p1[0]), float(p2[0]))


def _call_values(cf, spot, strikes, rate, t, cfg):
    p1, p2, _ = _prob_integrals(cf, spot, strikes, t, cfg)
    strikes = np.atleast_1d(np.asarray(strikes, dtype=float))
    df = math.exp(-rate * t)
    values = spot * p1 - strikes * df * p2
    lower = np.maximum(spot - strikes * df, 0.0)
    return np.maximum(values, lower - _CLAMP_TOL)


def european_call_fourier(cf, spot: float, strike: float, rate: float, t: float,
                          cfg: IntegrationConfig = IntegrationConfig()) -> float:
    """Call price S0*P1 - K*exp(-r*T)*P2, floored at intrinsic."""
    return float(_call_values(cf, spot, [strike], rate, t, cfg)[0])


def european_put_fourier(cf, spot: float, strike: float, rate: float, t: float,
                         cfg: IntegrationConfig = IntegrationConfig()) -> float:
    """Put price K*exp(-r*T)*(1-P2) - S0*(1-P1); satisfies parity with the call."""
    pair = heston_probabilities(cf, spot, strike, rate, t, cfg)
    df = math.exp(-rate * t)
    value = strike * df * (1.0 - pair.p2) - spot * (1.0 - pair.p1)
    return max(value, max(strike * df - spot, 0.0) - _CLAMP_TOL)


def carr_madan_grid(cf, spot: float, rate: float, t: float,
                    cfg: FftConfig = FftConfig()):
    """Damped-transform call prices on an FFT log-strike grid.

    Returns (log_strikes, call_prices), both length n_grid, with the grid
    centered at ln(spot). Frequency nodes carry Simpson weights.
    """
    n, eta, alpha = cfg.n_grid, cfg.eta, cfg.alpha
    lam = cfg.log_strike_spacing
    u = eta * np.arange(n)
    b = math.log(spot) - 0.5 * n * lam
    df = math.exp(-rate * t)

    phi = cf(u - 1j * (alpha + 1.0), t)
    denom = alpha**2 + alpha - u**2 + 1j * (2.0 * alpha + 1.0) * u
    psi = df * phi / denom

    weights = (eta / 3.0) * (3.0 + (-1.0) ** np.arange(1, n + 1))
    weights[0] = eta / 3.0
    x = np.exp(-1j * u * b) * psi * weights
    log_strikes = b + lam * np.arange(n)
    prices = np.exp(-alpha * log_strikes) / math.pi * np.fft.fft(x).real
    if not np.all(np.isfinite(prices)):
        raise NonFiniteGrid("FFT produced non-finite call prices")
    return log_strikes, prices


class CarrMadanPricer:
    """Reusable interpolator over one Carr-Madan grid (one maturity)."""

    def __init__(self, cf, spot, rate, t, cfg: FftConfig = FftConfig()):
        self.spot = spot
        self.rate = rate
        self.t = t
        self.log_strikes, self.prices = carr_madan_grid(cf, spot, rate, t, cfg)
        span = self.log_strikes[-1] - self.log_strikes[0]
        center = math.log(spot)
        self._lo = center - 0.25 * span
        self._hi = center + 0.25 * span
        self._spline = None

    def __call__(self, strike: float) -> float:
        k = math.log(strike)
        if not (self._lo <= k <= self._hi):
            raise StrikeOutOfGrid(
                f"ln K={k:.4f} outside central grid window [{self._lo:.4f}, {self._hi:.4f}]")
        # exact node hit: return the grid value untouched
        idx = int(round((k - self.log_strikes[0]) / (self.log_strikes[1] - self.log_strikes[0])))
        if 0 <= idx < len(self.log_strikes) and self.log_strikes[idx] == k:
            return float(self.prices[idx])
        if self._spline is None:
            self._spline = CubicSpline(self.log_strikes, self.prices)
        value = float(self._spline(k))
        df = math.exp(-self.rate * self.t)
        return max(value, max(self.spot - strike * df, 0.0) - _CLAMP_TOL)


def carr_madan_price(cf, spot: float, strike: float, rate: float, t: float,
                     cfg: FftConfig = FftConfig()) -> float:
    """Single-strike convenience wrapper around CarrMadanPricer."""
    return CarrMadanPricer(cf, spot, rate, t, cfg)(strike)
