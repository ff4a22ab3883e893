import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from delaybs import OptionSpec
from delaybs.errors import ContractError
from delaybs.hedging import HedgeWeights, hedge_weights, replicate
from delaybs.model import discount_factor
from delaybs.pricing import MarketState, price_closed


def _bond(market, t):
    return math.exp(market.rate.integral(0.0, t))


def test_portfolio_identity_hand_point(constant_market):
    state = MarketState(0.8, 100.0)
    option = OptionSpec(100.0)
    w = hedge_weights(constant_market, option, state)
    value = w.pi_s * state.s_t + w.pi_xi * _bond(constant_market, state.t)
    closed = price_closed(constant_market, option, state).value
    assert value == pytest.approx(closed, abs=1e-12)


@given(
    st.floats(min_value=60.0, max_value=160.0),
    st.floats(min_value=60.0, max_value=160.0),
    st.floats(min_value=0.8, max_value=0.999),
)
# the market fixture is a frozen dataclass, so reusing it across
# generated examples is safe
@settings(
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.function_scoped_fixture],
)
def test_portfolio_identity_randomized(constant_market, s, k, t):
    state = MarketState(t, s)
    option = OptionSpec(k)
    w = hedge_weights(constant_market, option, state)
    value = w.pi_s * state.s_t + w.pi_xi * _bond(constant_market, state.t)
    closed = price_closed(constant_market, option, state).value
    assert value == pytest.approx(closed, abs=1e-12)


def test_deep_in_the_money_limits(constant_market):
    state = MarketState(0.8, 1e5)
    option = OptionSpec(100.0)
    w = hedge_weights(constant_market, option, state)
    assert w.pi_s == pytest.approx(1.0, abs=1e-12)
    assert w.pi_xi == pytest.approx(
        -100.0 * math.exp(-constant_market.rate.integral(0.0, 1.0)), rel=1e-12
    )


def test_deep_out_of_the_money_limits(constant_market):
    state = MarketState(0.8, 0.01)
    w = hedge_weights(constant_market, OptionSpec(100.0), state)
    assert w.pi_s == pytest.approx(0.0, abs=1e-12)
    assert w.pi_xi == pytest.approx(0.0, abs=1e-12)


def test_delta_monotone_in_spot(constant_market):
    option = OptionSpec(100.0)
    deltas = [
        hedge_weights(constant_market, option, MarketState(0.85, s)).pi_s
        for s in np.linspace(40.0, 250.0, 40)
    ]
    assert all(b >= a for a, b in zip(deltas, deltas[1:]))
    assert all(0.0 <= d <= 1.0 for d in deltas)


def test_hedge_rejects_puts(constant_market):
    with pytest.raises(ContractError):
        hedge_weights(constant_market, OptionSpec(100.0, "put"), MarketState(0.85, 90.0))


def test_bond_leg_sign(constant_market):
    w = hedge_weights(constant_market, OptionSpec(100.0), MarketState(0.85, 110.0))
    assert w.pi_s > 0.0
    assert w.pi_xi < 0.0


def test_replication_identity_holds_along_paths(constant_market):
    # the asserted identity inside the rebalance loop must never trip
    report = replicate(
        constant_market, OptionSpec(100.0), 8, 2_000, 31, identity_tol=1e-10
    )
    assert report.n_paths == 2_000


def test_replication_error_shrinks_with_rebalancing(constant_market):
    option = OptionSpec(100.0)
    reports = [
        replicate(constant_market, option, n, 20_000, 7) for n in (4, 16, 64)
    ]
    rmses = [r.rmse for r in reports]
    assert rmses[0] > rmses[1] > rmses[2]
    # mean error is a discretization bias estimate; it should be small
    # relative to the scatter
    for r in reports:
        assert abs(r.mean_error) <= 3.0 * r.rmse / math.sqrt(r.n_paths) + 0.05


def test_replication_deterministic(constant_market):
    a = replicate(constant_market, OptionSpec(100.0), 16, 5_000, 13)
    b = replicate(constant_market, OptionSpec(100.0), 16, 5_000, 13)
    assert a.rmse == b.rmse and a.mean_error == b.mean_error


def test_replication_other_block_price(constant_market):
    # hedging a block that opened away from s0 still replicates
    report = replicate(
        constant_market, OptionSpec(100.0), 64, 20_000, 17, s_star=120.0
    )
    assert report.rmse < 1.0


def test_weights_record_time(constant_market):
    w = hedge_weights(constant_market, OptionSpec(100.0), MarketState(0.9, 100.0))
    assert isinstance(w, HedgeWeights)
    assert w.t == 0.9
