"""Option valuation for the variable-delay market.

Four routes:

* ``price_closed`` — the closed form valid once the final block's
  volatility is known (valuation time at or after the final block start);
* ``price_semi`` — simulate the block-start state to the final block
  boundary, then apply the conditional-expectation kernel ``h_value``;
* ``price_mc`` — direct discounted-payoff Monte Carlo under Q;
* ``price_classical`` — the constant-coefficient Black-Scholes reference,
  an independent code path used as an oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import ContractError, DomainError
from .model import block_index, discount_factor, floor_block
from .parallel import accumulate_moments
from .paths import exact_values_vec
from .quadrature import DEFAULT_N, integrate, integrate_nodes


@dataclass(frozen=True)
class PricingResult:
    value: float
    std_error: float = 0.0
    n_paths: int = 0
    method: str = "closed"  # closed | semi | mc | classical | importance


@dataclass(frozen=True)
class MarketState:
    """The observable data a pricer consumes at valuation time t."""

    t: float
    s_t: float
    s_block: float = None

    def __post_init__(self):
        if self.s_t <= 0.0:
            raise ContractError(f"price must be positive, got {self.s_t}")
        if self.s_block is None:
            object.__setattr__(self, "s_block", self.s_t)
        if self.s_block <= 0.0:
            raise ContractError(f"block price must be positive, got {self.s_block}")


def norm_cdf(x):
    """Standard normal CDF, accurate to ~1e-16 over the real line."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def final_block_start(market):
    """Start time of the block containing maturity.

    When maturity falls exactly on a boundary the final block is the one
    of positive length ending at T.
    """
    fb = floor_block(market.T, market.h)
    if market.T - fb <= 1e-12 * max(market.T, 1.0):
        fb = max(fb - market.h, 0.0)
    return fb


def _final_block_variance(market, s_block, t, quad_n=DEFAULT_N):
    return integrate(lambda u: market.g(u, s_block) ** 2, t, market.T, quad_n)


def beta_pm(market, option, state, quad_n=DEFAULT_N):
    """The two closed-form arguments; their difference is the total vol."""
    t_star = final_block_start(market)
    if state.t < t_star - 1e-12 * max(market.T, 1.0):
        raise ContractError(
            f"closed form needs t >= {t_star}, got t={state.t}"
        )
    if state.t >= market.T:
        raise DomainError("zero remaining variance at expiry")
    v = _final_block_variance(market, state.s_block, state.t, quad_n)
    lam = market.rate.integral(state.t, market.T)
    log_m = math.log(state.s_t / option.strike)
    sq = math.sqrt(v)
    beta_plus = (log_m + lam + 0.5 * v) / sq
    beta_minus = beta_plus - sq
    return beta_plus, beta_minus


def price_closed(market, option, state, quad_n=DEFAULT_N):
    """Closed-form call value in the final block; puts via parity."""
    if state.t >= market.T - 1e-15:
        return PricingResult(value=float(option.payoff(state.s_t)), method="closed")
    bp, bm = beta_pm(market, option, state, quad_n)
    disc = discount_factor(market.rate, state.t, market.T)
    call = state.s_t * norm_cdf(bp) - option.strike * norm_cdf(bm) * disc
    value = call if option.kind == "call" else put_price(call, state, option, market)
    return PricingResult(value=value, method="closed")


def h_value(x, m, v, strike, rate_integral_0T):
    """Conditional-expectation kernel mapping a discounted block-start
    state to the option value contribution."""
    if x <= 0.0 or strike <= 0.0:
        raise DomainError("x and strike must be positive")
    if np.any(np.asarray(v) <= 0.0):
        raise DomainError("variance must be positive")
    sq = math.sqrt(v)
    alpha1 = (math.log(x / strike) + rate_integral_0T + m + v) / sq
    alpha2 = (math.log(x / strike) + rate_integral_0T + m) / sq
    return (
        x * math.exp(m + 0.5 * v) * norm_cdf(alpha1)
        - strike * norm_cdf(alpha2) * math.exp(-rate_integral_0T)
    )


def _h_value_vec(x, m, v, strike, rate_integral_0T):
    sq = np.sqrt(v)
    log_m = np.log(x / strike) + rate_integral_0T + m
    alpha1 = (log_m + v) / sq
    alpha2 = log_m / sq
    return x * np.exp(m + 0.5 * v) * ndtr(alpha1) - strike * ndtr(alpha2) * math.exp(
        -rate_integral_0T
    )


def price_semi(market, option, state, n_paths, seed, workers=1, quad_n=DEFAULT_N):
    """Semi-analytic pricer: simulate to the final block boundary, then
    integrate the last block in closed form.  Conditioning on the final
    block state removes the within-block noise, so the standard error is
    below the direct Monte Carlo estimator's."""
    if market.T <= market.h:
        raise ContractError("semi-analytic route needs T > h; use price_closed")
    t_star = final_block_start(market)
    tol = 1e-12 * max(market.T, 1.0)
    if state.t > t_star + tol:
        raise ContractError(f"semi-analytic route needs t <= {t_star}; use price_closed")
    if option.kind == "put":
        call = price_semi(
            market,
            option.__class__(option.strike, "call", option.t_valuation),
            state, n_paths, seed, workers, quad_n,
        )
        return PricingResult(
            value=put_price(call.value, state, option, market),
            std_error=call.std_error,
            n_paths=call.n_paths,
            method="semi",
        )
    grow_t = math.exp(market.rate.integral(0.0, state.t))
    R_T = market.rate.integral(0.0, market.T)
    if abs(state.t - t_star) <= tol:
        # degenerate expectation: the final block state is known
        x = state.s_t * math.exp(-market.rate.integral(0.0, t_star))
        v = _final_block_variance(market, state.s_t, t_star, quad_n)
        value = grow_t * h_value(x, -0.5 * v, v, option.strike, R_T)
        return PricingResult(value=value, method="semi")
    disc_to_star = math.exp(-market.rate.integral(0.0, t_star))

    def chunk(lo, hi):
        s_star = exact_values_vec(
            market, "Q", seed, lo, hi, state.t, state.s_t, state.s_block,
            [t_star], quad_n,
        )[:, 0]
        v = integrate_nodes(
            lambda u: market.g.vec(u, s_star) ** 2 + 0.0 * s_star,
            t_star, market.T, quad_n,
        )
        return _h_value_vec(s_star * disc_to_star, -0.5 * v, v, option.strike, R_T)

    mean, se, _ = accumulate_moments(chunk, n_paths, workers)
    return PricingResult(
        value=grow_t * mean, std_error=grow_t * se, n_paths=n_paths, method="semi"
    )


def price_mc(market, option, state, n_paths, seed, workers=1, quad_n=DEFAULT_N):
    """Direct Q-measure Monte Carlo: discounted expected payoff."""
    if state.t >= market.T:
        raise ContractError("valuation time must be before maturity")
    disc = discount_factor(market.rate, state.t, market.T)

    def chunk(lo, hi):
        s_T = exact_values_vec(
            market, "Q", seed, lo, hi, state.t, state.s_t, state.s_block,
            [market.T], quad_n,
        )[:, 0]
        return option.payoff(s_T)

    mean, se, _ = accumulate_moments(chunk, n_paths, workers)
    return PricingResult(
        value=disc * mean, std_error=disc * se, n_paths=n_paths, method="mc"
    )


def price_classical(s, strike, rate_integral, total_variance):
    """Constant-coefficient Black-Scholes call with aggregate inputs.

    Independent of the closed-form route above: no shared beta
    computation, so the two can oracle each other.
    """
    if s <= 0.0 or strike <= 0.0:
        raise DomainError("spot and strike must be positive")
    if total_variance <= 0.0:
        raise DomainError("total variance must be positive")
    sigma = math.sqrt(total_variance)
    d1 = (math.log(s / strike) + rate_integral) / sigma + 0.5 * sigma
    d2 = d1 - sigma
    return s * norm_cdf(d1) - strike * math.exp(-rate_integral) * norm_cdf(d2)


def put_price(call_value, state, option, market):
    """European put from the call at the same state, by parity."""
    disc = discount_factor(market.rate, state.t, market.T)
    return call_value - state.s_t + option.strike * disc
