"""Deterministic integration of time functions over sub-block intervals.

Composite Simpson with a fixed, even subinterval count.  The count is
deliberately not adaptive: a fixed rule keeps every Monte Carlo estimate
bit-reproducible regardless of scheduling.  Rate-curve integrals are not
computed here; they use the exact piecewise antiderivative on the curve
itself (see :meth:`delaybs.model.RateCurve.integral`), which keeps
discount factors exactly multiplicative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DomainError
from .model import floor_block

DEFAULT_N = 64


def simpson_weights(a, b, n):
    """Abscissae and weights of composite Simpson on [a, b] with n panels."""
    if n < 2 or n % 2 != 0:
        raise DomainError(f"subinterval count must be even and >= 2, got {n}")
    xs = np.linspace(a, b, n + 1)
    ws = np.full(n + 1, 2.0)
    ws[1::2] = 4.0
    ws[0] = ws[-1] = 1.0
    ws *= (b - a) / (3.0 * n)
    return xs, ws


def integrate(fn, a, b, n=DEFAULT_N):
    """Composite Simpson integral of fn over [a, b].

    Exact for polynomials of degree <= 3 on each panel pair.  Evaluation
    errors from fn propagate with the failing abscissa attached.
    """
    if a > b:
        raise DomainError(f"need a <= b, got [{a}, {b}]")
    if a == b:
        return 0.0
    xs, ws = simpson_weights(a, b, n)
    total = 0.0
    for x, w in zip(xs, ws):
        try:
            total += w * fn(x)
        except Exception as exc:
            raise type(exc)(f"{exc} (while integrating at t={x!r})") from exc
    return total


def integrate_nodes(values_fn, a, b, n=DEFAULT_N):
    """Vectorized Simpson: values_fn(t) may return an array per node."""
    if a == b:
        return 0.0
    xs, ws = simpson_weights(a, b, n)
    total = 0.0
    for x, w in zip(xs, ws):
        total = total + w * values_fn(x)
    return total


@dataclass(frozen=True)
class BlockMoments:
    """Gaussian moments of one block's log-increment.

    m: mean of the log-increment (drift integral minus half the variance).
    v: variance, the integral of g(u, s_k)^2.
    c: integral of f(u, s_k) - lambda(u); the covariance between the
       price log-increment and the measure-change exponent.
    """

    m: float
    v: float
    c: float


def _check_single_block(market, a, b):
    if a > b:
        raise ContractError(f"need a <= b, got [{a}, {b}]")
    eps = 1e-9 * market.h
    if b > a and floor_block(a, market.h) != floor_block(max(a, b - eps), market.h):
        raise ContractError(f"interval [{a}, {b}] spans a block boundary")


def block_moments(market, s_k, a, b, measure="Q", n=DEFAULT_N):
    """Moments of the log-increment of one block frozen at price s_k.

    Under Q the drift is the riskless rate; under P it is f(u, s_k).
    """
    _check_single_block(market, a, b)
    if s_k <= 0.0:
        raise ContractError(f"block-start price must be positive, got {s_k}")
    if measure not in ("P", "Q"):
        raise ContractError(f"measure must be P or Q, got {measure!r}")
    v = integrate(lambda u: market.g(u, s_k) ** 2, a, b, n)
    f_int = integrate(lambda u: market.f(u, s_k), a, b, n)
    lam_int = market.rate.integral(a, b)
    drift = lam_int if measure == "Q" else f_int
    return BlockMoments(m=drift - 0.5 * v, v=v, c=f_int - lam_int)


def block_integrals_vec(market, s_k, a, b, n=DEFAULT_N, with_theta=False):
    """Per-path block integrals for a vector of block-start prices.

    Returns (g2_int, f_int, lam_int) arrays/scalars, plus theta2_int
    (integral of ((f - lambda)/g)^2) when with_theta is set.
    """
    _check_single_block(market, a, b)
    g2 = integrate_nodes(lambda u: market.g.vec(u, s_k) ** 2, a, b, n)
    f_int = integrate_nodes(lambda u: market.f.vec(u, s_k) + 0.0 * s_k, a, b, n)
    lam_int = market.rate.integral(a, b)
    if not with_theta:
        return g2, f_int, lam_int

    def theta2(u):
        th = (market.f.vec(u, s_k) - market.rate.rate(u)) / market.g.vec(u, s_k)
        return th * th + 0.0 * s_k

    return g2, f_int, lam_int, integrate_nodes(theta2, a, b, n)
