import math

import numpy as np
import pytest

from delaybs.errors import ContractError
from delaybs.quadrature import (
    block_integrals_vec,
    block_moments,
    integrate,
)


def test_constant():
    assert integrate(lambda t: 1.0, 0.0, 1.0, n=2) == pytest.approx(1.0, abs=1e-15)


def test_exact_on_cubics():
    assert integrate(lambda t: t * t, 0.0, 1.0, n=2) == pytest.approx(1.0 / 3.0, abs=1e-16)
    assert integrate(lambda t: t**3 - 2 * t, 0.0, 2.0, n=2) == pytest.approx(0.0, abs=1e-13)


def test_exponential_vs_antiderivative():
    # analytic antiderivative oracle
    assert integrate(math.exp, 0.0, 1.0, n=64) == pytest.approx(math.e - 1.0, abs=1e-8)
    assert integrate(math.exp, 0.0, 1.0, n=256) == pytest.approx(math.e - 1.0, abs=1e-11)


def test_n_must_be_even():
    with pytest.raises(Exception):
        integrate(lambda t: t, 0.0, 1.0, n=3)


def test_error_carries_abscissa():
    def bad(t):
        raise ValueError("boom")

    with pytest.raises(ValueError, match="while integrating at t="):
        integrate(bad, 0.0, 1.0)


def test_block_moments_constant(state_market, constant_market):
    mom = block_moments(constant_market, 100.0, 0.0, 0.25, "Q")
    assert mom.v == pytest.approx(0.01, abs=1e-15)
    assert mom.m == pytest.approx(0.05 * 0.25 - 0.005, abs=1e-15)
    assert mom.c == pytest.approx(integrate(lambda u: 0.08, 0.0, 0.25) - 0.0125, abs=1e-15)


def test_block_moments_cancellation(balanced_market):
    mom = block_moments(balanced_market, 80.0, 0.0, 0.25, "P")
    assert mom.c == pytest.approx(0.0, abs=1e-15)


def test_block_moments_state_dependent(state_market):
    # g constant in t: v = (b - a) * g(s_k)^2, by hand
    market = state_market
    mom = block_moments(
        market.__class__(0.5, 1.0, market.s0, market.f, market.g, market.rate, market.g_min),
        1.0, 0.0, 0.5, "Q",
    )
    assert mom.v == pytest.approx(0.5 * 0.15**2, rel=1e-12)


def test_block_boundary_rejected(state_market):
    with pytest.raises(ContractError, match="block boundary"):
        block_moments(state_market, 100.0, 0.2, 0.3)


def test_additivity(state_market):
    a, b, c = 0.25, 0.33, 0.5
    whole = block_moments(state_market, 87.0, a, c, "P")
    left = block_moments(state_market, 87.0, a, b, "P")
    right = block_moments(state_market, 87.0, b, c, "P")
    assert whole.m == pytest.approx(left.m + right.m, abs=1e-12)
    assert whole.v == pytest.approx(left.v + right.v, abs=1e-12)
    assert whole.c == pytest.approx(left.c + right.c, abs=1e-12)


def test_refinement_converged(state_market, constant_market):
    for market in (state_market, constant_market):
        for s_k in (50.0, 100.0, 200.0):
            coarse = block_moments(market, s_k, 0.0, market.h, "P", n=64)
            fine = block_moments(market, s_k, 0.0, market.h, "P", n=128)
            assert abs(coarse.m - fine.m) < 1e-9
            assert abs(coarse.v - fine.v) < 1e-9
            assert abs(coarse.c - fine.c) < 1e-9


def test_vectorized_matches_scalar(state_market):
    sk = np.array([50.0, 100.0, 150.0])
    g2, f_int, lam = block_integrals_vec(state_market, sk, 0.25, 0.5)
    for i, s in enumerate(sk):
        mom = block_moments(state_market, float(s), 0.25, 0.5, "P")
        assert np.asarray(g2)[i] == pytest.approx(mom.v, rel=1e-14)
        assert np.asarray(f_int)[i] - lam == pytest.approx(mom.c, abs=1e-15)
