"""Black-Scholes utilities and conditional Monte Carlo pricing.

Every estimator here prices through the conditional (mixing) representation:
given the volatility path and its Brownian driver, the terminal log-price is
Gaussian, so calls, digitals and smiles reduce to Black-Scholes evaluations at
a per-path effective spot and residual volatility. That removes the Euler
discretisation of the price and cuts the Monte Carlo variance, especially for
digitals and densities. A plain log-Euler scheme is kept only as an
independent cross-check oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtr

from ._stats import mean_and_se
from .gaussian import PathBatch, orthogonal_increments
from .models import RoughBergomiParams, SigmaPath

__all__ = [
    "ImpliedVolBoundsError",
    "SkewEstimate",
    "SmileSlice",
    "bs_price",
    "bs_vega",
    "bs_d1_d2",
    "implied_vol",
    "mixing_call_price",
    "mixing_put_price",
    "mc_digital",
    "mixing_smile_slice",
    "implied_skew_digital",
    "implied_skew_fd",
    "implied_curvature_fd",
    "log_euler_terminal",
    "log_euler_call_price",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)

# Newton residual target for implied vol, relative to spot.
_IV_RTOL = 1e-14


# ---------------------------------------------------------------------------
# Black-Scholes primitives (zero rate, zero dividend)
# ---------------------------------------------------------------------------


def bs_d1_d2(s, k, t, sigma):
    """d1 and d2 of the zero-rate Black-Scholes formula.

    Broadcasts over numpy inputs. Where sigma * sqrt(t) vanishes the terms
    are +/-inf according to the sign of log(s / k); both cdf factors then
    collapse to the exact indicator limits.
    """
    s, k, sigma = np.asarray(s, float), np.asarray(k, float), np.asarray(sigma, float)
    tot = sigma * np.sqrt(t)
    logm = np.log(s / k)
    limit = np.where(logm > 0, np.inf, np.where(logm < 0, -np.inf, 0.0))
    d1 = np.where(tot > 0, logm / np.where(tot > 0, tot, 1.0) + 0.5 * tot, limit)
    d2 = d1 - tot
    return d1, d2


def bs_price(s, k, t, sigma):
    """Zero-rate Black-Scholes call price; sigma = 0 returns the payoff."""
    s, k = np.asarray(s, float), np.asarray(k, float)
    d1, d2 = bs_d1_d2(s, k, t, sigma)
    out = s * ndtr(d1) - k * ndtr(d2)
    return out if out.ndim else float(out)


def bs_vega(s, k, t, sigma):
    """dPrice/dSigma of the zero-rate Black-Scholes call."""
    s = np.asarray(s, float)
    d1, _ = bs_d1_d2(s, k, t, sigma)
    with np.errstate(over="ignore"):
        phi = np.exp(-0.5 * d1 * d1) / _SQRT_2PI
    out = s * np.sqrt(t) * np.where(np.isfinite(d1), phi, 0.0)
    return out if out.ndim else float(out)


class ImpliedVolBoundsError(ValueError):
    """Price violates the strict no-arbitrage bounds of a call."""


def implied_vol(price: float, s: float, k: float, t: float) -> float:
    """Invert the Black-Scholes call price for its volatility.

    Args:
        price: Call price; must satisfy max(s - k, 0) < price < s strictly.
        s: Spot.
        k: Strike.
        t: Maturity in years.

    Returns:
        The volatility sigma with bs_price(s, k, t, sigma) = price to a
        residual below 1e-12 * s.

    Raises:
        ImpliedVolBoundsError: if the price is outside the open bounds; the
            message names the violated bound.
    """
    for name, val in (("price", price), ("spot", s), ("strike", k), ("maturity", t)):
        if not (np.isfinite(val) and (val > 0 or name == "price")):
            raise ValueError(f"{name} must be positive and finite, got {val!r}")
    intrinsic = max(s - k, 0.0)
    if not price > intrinsic:
        raise ImpliedVolBoundsError(
            f"price {price!r} does not exceed the intrinsic value {intrinsic!r}"
        )
    if not price < s:
        raise ImpliedVolBoundsError(f"price {price!r} is not below the spot {s!r}")

    lo, hi = 0.0, 0.5
    while bs_price(s, k, t, hi) < price:
        hi *= 2.0
        if hi > 1e6:  # unreachable given price < s; guards malformed floats
            raise ImpliedVolBoundsError("no finite volatility attains the price")
    sigma = min(max(_SQRT_2PI / math.sqrt(t) * price / s, 1e-8), hi)
    tol = _IV_RTOL * s
    for _ in range(200):
        f = bs_price(s, k, t, sigma) - price
        if f >= 0:
            hi = sigma
        else:
            lo = sigma
        vega = bs_vega(s, k, t, sigma)
        if vega > 0 and np.isfinite(vega):
            # Converged only when the residual is small in price AND the
            # Newton increment is small in vol. A residual-only rule stops
            # at the wrong vol on far-from-the-money nodes where the whole
            # price sits below the tolerance.
            if abs(f) < tol and abs(f) <= vega * 1e-10 * max(sigma, 1e-8):
                break
            cand = sigma - f / vega
        else:
            cand = 0.5 * (lo + hi)
        if not lo < cand < hi:
            cand = 0.5 * (lo + hi)
        if cand == sigma:
            break
        sigma = cand
    return float(sigma)


# ---------------------------------------------------------------------------
# Result containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SkewEstimate:
    """A strike derivative of the smile in log-strike with its standard error."""

    maturity: float
    value: float
    std_error: float
    method: str

    def __post_init__(self):
        if not (np.isfinite(self.maturity) and self.maturity > 0):
            raise ValueError("maturity must be positive and finite")
        if not np.isfinite(self.value):
            raise ValueError("value must be finite")
        if not self.std_error >= 0:
            raise ValueError("std_error must be nonnegative")


@dataclass(frozen=True)
class SmileSlice:
    """Implied vols on a strike ladder at one maturity.

    vol_cov, when present, is the joint sampling covariance of the vols
    across strikes under common random numbers; finite-difference readers use
    it so that path-to-path correlation cancels correctly in their errors.
    """

    maturity: float
    strikes: np.ndarray
    vols: np.ndarray
    std_errors: np.ndarray
    vol_cov: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        strikes = np.asarray(self.strikes, dtype=float)
        vols = np.asarray(self.vols, dtype=float)
        ses = np.asarray(self.std_errors, dtype=float)
        m = strikes.size
        if not (np.all(np.isfinite(strikes)) and np.all(strikes > 0)):
            raise ValueError("strikes must be positive and finite")
        if np.any(np.diff(strikes) <= 0):
            raise ValueError("strikes must be strictly increasing")
        if vols.shape != (m,) or ses.shape != (m,):
            raise ValueError("vols and std_errors must match the strike count")
        if not np.all(vols > 0):
            raise ValueError("implied vols must be positive")
        if not np.all(ses >= 0):
            raise ValueError("std_errors must be nonnegative")
        if self.vol_cov is not None:
            cov = np.asarray(self.vol_cov, dtype=float)
            if cov.shape != (m, m):
                raise ValueError("vol_cov must be square over the strikes")
            if not np.allclose(cov, cov.T, atol=1e-12):
                raise ValueError("vol_cov must be symmetric")
            object.__setattr__(self, "vol_cov", cov)
        object.__setattr__(self, "strikes", strikes)
        object.__setattr__(self, "vols", vols)
        object.__setattr__(self, "std_errors", ses)


# ---------------------------------------------------------------------------
# Conditional (mixing) estimators
# ---------------------------------------------------------------------------


def _check_slice_inputs(sig: SigmaPath, p: RoughBergomiParams, t: float) -> None:
    if not (np.isfinite(t) and t > 0):
        raise ValueError(f"maturity must be positive and finite, got {t!r}")
    if abs(t - sig.grid.maturity) > 1e-9 * sig.grid.maturity:
        raise ValueError(
            f"maturity {t!r} is beyond the simulated grid ({sig.grid.maturity!r})"
        )


def _effective_terms(sig: SigmaPath, p: RoughBergomiParams):
    """Per-path effective spot and residual vol of the conditional log-price.

    Conditioning on the volatility path and its driver leaves
    log S_T ~ N(log s_eff - s_res^2 / 2, s_res^2) with
    s_eff = s0 exp(rho M - rho^2 V / 2), s_res^2 = (1 - rho^2) V,
    V = int sigma^2 du and M = int sigma dW.
    """
    v = sig.total_var()
    m = sig.total_sdw()
    s_eff = p.s0 * np.exp(p.rho * m - 0.5 * p.rho**2 * v)
    s_res = np.sqrt((1.0 - p.rho**2) * v)
    return s_eff, s_res, v, m


def _digital_d(sig: SigmaPath, p: RoughBergomiParams, k: float):
    """Per-path normalised log-strike d with P(S_T > K | path) = ndtr(-d)."""
    _, s_res, v, m = _effective_terms(sig, p)
    num = math.log(k / p.s0) + 0.5 * v - p.rho * m
    limit = np.where(num > 0, np.inf, np.where(num < 0, -np.inf, 0.0))
    d = np.where(s_res > 0, num / np.where(s_res > 0, s_res, 1.0), limit)
    return d, s_res

def _validate_strike(k: float) -> None:
    if not (np.isfinite(k) and k > 0):
        raise ValueError(f"strike must be positive and finite, got {k!r}")


def mixing_call_price(
    sig: SigmaPath, p: RoughBergomiParams, t: float, k: float
) -> tuple[float, float]:
    """Conditional Monte Carlo price of a call.

    Args:
        sig: Volatility paths simulated to maturity t.
        p: Model parameters consistent with sig.
        t: Maturity; must equal the grid maturity of sig.
        k: Strike.

    Returns:
        (price, standard error). With nu = 0 the volatility is deterministic,
        the conditional estimator is replaced by the exact Black-Scholes
        value and the standard error is exactly zero.
    """
    _check_slice_inputs(sig, p, t)
    _validate_strike(k)
    if p.nu == 0.0:
        return float(bs_price(p.s0, k, t, p.sigma0)), 0.0
    s_eff, s_res, _, _ = _effective_terms(sig, p)
    per_path = bs_price(s_eff, k, t, s_res / math.sqrt(t))
    return mean_and_se(per_path)


def mixing_put_price(
    sig: SigmaPath, p: RoughBergomiParams, t: float, k: float
) -> tuple[float, float]:
    """Conditional Monte Carlo put price; satisfies parity with the call
    path by path: call_i - put_i = s_eff_i - k."""
    _check_slice_inputs(sig, p, t)
    _validate_strike(k)
    if p.nu == 0.0:
        call = float(bs_price(p.s0, k, t, p.sigma0))
        return call - (p.s0 - k), 0.0
    s_eff, s_res, _, _ = _effective_terms(sig, p)
    per_path = bs_price(s_eff, k, t, s_res / math.sqrt(t)) - (s_eff - k)
    return mean_and_se(per_path)


def mc_digital(
    sig: SigmaPath, p: RoughBergomiParams, t: float, k: float
) -> tuple[float, float]:
    """Conditional Monte Carlo estimate of P(S_T > K).

    Each path contributes the exact conditional probability ndtr(-d) instead
    of an indicator, so the estimate is smooth in K. Returns (probability,
    standard error); exact with zero error when nu = 0.
    """
    _check_slice_inputs(sig, p, t)
    _validate_strike(k)
    if p.nu == 0.0:
        d2 = (math.log(p.s0 / k) - 0.5 * p.sigma0**2 * t) / (p.sigma0 * math.sqrt(t))
        return float(ndtr(d2)), 0.0
    d, _ = _digital_d(sig, p, k)
    return mean_and_se(ndtr(-d))


def mixing_smile_slice(
    sig: SigmaPath, p: RoughBergomiParams, t: float, strikes: Sequence[float]
) -> SmileSlice:
    """Implied-vol slice from conditional prices on a strike ladder.

    Implied vols come from inverting the Monte Carlo mean price per strike;
    their joint covariance is the price covariance scaled by the inverse
    vegas at the fitted vols (delta method), preserving the common-random-
    number correlation that finite differences rely on.
    """
    _check_slice_inputs(sig, p, t)
    strikes = np.asarray(strikes, dtype=float)
    for k in strikes:
        _validate_strike(float(k))
    if np.any(np.diff(strikes) <= 0):
        raise ValueError("strikes must be strictly increasing")
    m = strikes.size
    if p.nu == 0.0:
        return SmileSlice(
            maturity=t,
            strikes=strikes,
            vols=np.full(m, p.sigma0),
            std_errors=np.zeros(m),
            vol_cov=np.zeros((m, m)),
        )
    s_eff, s_res, _, _ = _effective_terms(sig, p)
    sig_cond = s_res / math.sqrt(t)
    prices = bs_price(s_eff[:, None], strikes[None, :], t, sig_cond[:, None])
    n = prices.shape[0]
    means = prices.mean(axis=0)
    price_cov = np.cov(prices, rowvar=False, ddof=1).reshape(m, m) / n
    vols = np.array([implied_vol(float(means[j]), p.s0, float(strikes[j]), t) for j in range(m)])
    vegas = np.array([bs_vega(p.s0, float(strikes[j]), t, float(vols[j])) for j in range(m)])
    if np.any(vegas <= 0):
        raise ValueError("vanishing vega on the strike ladder; smile not invertible")
    scale = 1.0 / vegas
    vol_cov = price_cov * scale[:, None] * scale[None, :]
    return SmileSlice(
        maturity=t,
        strikes=strikes,
        vols=vols,
        std_errors=np.sqrt(np.diag(vol_cov)),
        vol_cov=vol_cov,
    )


def implied_skew_digital(
    sig: SigmaPath, p: RoughBergomiParams, t: float
) -> SkewEstimate:
    """ATM implied skew in log-strike without finite differencing.

    Differentiating the Black-Scholes identity in strike gives
    dI/dK = (ndtr(d2) - P(S_T > K)) / vega at the fitted vol, so the smile
    slope needs one price and one digital at the same strike. The value and
    error are scaled by K to express the slope in log-strike.
    """
    _check_slice_inputs(sig, p, t)
    k = p.s0
    price, _ = mixing_call_price(sig, p, t, k)
    iv = implied_vol(price, p.s0, k, t)
    digital, digital_se = mc_digital(sig, p, t, k)
    _, d2 = bs_d1_d2(p.s0, k, t, iv)
    vega = bs_vega(p.s0, k, t, iv)
    if not vega > 0:
        raise ValueError("vanishing vega at the money; skew undefined")
    value = k * (float(ndtr(d2)) - digital) / vega
    return SkewEstimate(
        maturity=t, value=value, std_error=k * digital_se / vega, method="digital"
    )


# ---------------------------------------------------------------------------
# Finite-difference readers of a smile slice
# ---------------------------------------------------------------------------


def _fd_weights(sl: SmileSlice, order: int) -> tuple[np.ndarray, float]:
    if sl.strikes.size != 3:
        raise ValueError("finite differences need exactly three strikes")
    logk = np.log(sl.strikes)
    h1 = logk[1] - logk[0]
    h2 = logk[2] - logk[1]
    if abs(h2 - h1) > 1e-9 * max(h1, h2):
        raise ValueError("log-strike spacing must be uniform for central differences")
    h = 0.5 * (logk[2] - logk[0])
    if order == 1:
        return np.array([-1.0, 0.0, 1.0]) / (2.0 * h), h
    return np.array([1.0, -2.0, 1.0]) / (h * h), h


def _fd_read(sl: SmileSlice, order: int) -> SkewEstimate:
    w, _ = _fd_weights(sl, order)
    cov = sl.vol_cov if sl.vol_cov is not None else np.diag(sl.std_errors**2)
    value = float(w @ sl.vols)
    se = math.sqrt(max(float(w @ cov @ w), 0.0))
    return SkewEstimate(
        maturity=sl.maturity, value=value, std_error=se, method="finite-difference"
    )


def implied_skew_fd(sl: SmileSlice) -> SkewEstimate:
    """Central-difference smile slope in log-strike from a three-strike slice.

    Exact for smiles quadratic in log-strike. The error uses the joint vol
    covariance when the slice carries one, so common-random-number noise
    cancels instead of adding.
    """
    return _fd_read(sl, 1)


def implied_curvature_fd(sl: SmileSlice) -> SkewEstimate:
    """Central-difference smile curvature in log-strike; see implied_skew_fd."""
    return _fd_read(sl, 2)


# ---------------------------------------------------------------------------
# Log-Euler cross-check oracle
# ---------------------------------------------------------------------------


def log_euler_terminal(
    sig: SigmaPath, batch: PathBatch, p: RoughBergomiParams
) -> np.ndarray:
    """Terminal spot from a left-point log-Euler scheme on the same paths.

    Draws the orthogonal Brownian leg deterministically from the batch seed,
    so repeated calls reuse identical noise. Kept as an independent check on
    the conditional estimators, not for production use.
    """
    if sig.grid is not batch.grid and (
        sig.grid.maturity != batch.grid.maturity or sig.grid.n_steps != batch.grid.n_steps
    ):
        raise ValueError("sigma path and batch must share one grid")
    if sig.n_paths != batch.n_paths:
        raise ValueError("sigma path and batch must have the same path count")
    db = orthogonal_increments(batch.grid, batch.n_paths, batch.seed)
    left = np.empty_like(sig.sigma)
    left[:, 0] = p.sigma0
    left[:, 1:] = sig.sigma[:, :-1]
    rho_bar = math.sqrt(1.0 - p.rho**2)
    log_increments = left * (p.rho * batch.dW + rho_bar * db) - 0.5 * left**2 * batch.grid.dt
    return p.s0 * np.exp(log_increments.sum(axis=1))


def log_euler_call_price(
    sig: SigmaPath, batch: PathBatch, p: RoughBergomiParams, k: float
) -> tuple[float, float]:
    """Plain Monte Carlo call price from the log-Euler terminal spot."""
    _validate_strike(k)
    s_t = log_euler_terminal(sig, batch, p)
    return mean_and_se(np.maximum(s_t - k, 0.0))
