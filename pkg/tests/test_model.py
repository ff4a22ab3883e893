import math

import pytest
from hypothesis import given, strategies as st

from delaybs import CoefficientExpr, RateCurve, VariableDelayMarket
from delaybs.errors import ConfigError, DomainError
from delaybs.model import (
    block_schedule,
    discount_factor,
    floor_block,
    load_config,
    market_from_config,
    sfde_from_config,
    validate_market,
)


def test_floor_block_examples():
    assert floor_block(0.7, 0.25) == 0.5
    assert floor_block(0.75, 0.25) == 0.75
    assert floor_block(0.0, 0.3) == 0.0


def test_floor_block_domain_errors():
    with pytest.raises(DomainError):
        floor_block(-0.1, 0.25)
    with pytest.raises(DomainError):
        floor_block(0.1, 0.0)


@given(
    st.floats(min_value=0.0, max_value=100.0),
    st.floats(min_value=1e-3, max_value=10.0),
)
def test_floor_block_idempotent(t, h):
    fb = floor_block(t, h)
    assert floor_block(fb, h) == fb


@given(
    st.floats(min_value=0.0, max_value=100.0),
    st.floats(min_value=1e-3, max_value=10.0),
)
def test_floor_block_brackets(t, h):
    fb = floor_block(t, h)
    # outside the snapping tolerance, kh <= t < kh + h
    if abs(t / h - round(t / h)) > 1e-9:
        assert fb <= t < fb + h


def test_block_schedule_examples():
    assert block_schedule(0.9, 0.25) == [0.0, 0.25, 0.5, 0.75, 0.9]
    assert block_schedule(1.0, 0.5) == [0.0, 0.5, 1.0]
    assert block_schedule(0.1, 0.25) == [0.0, 0.1]


def test_block_schedule_strictly_increasing():
    for T, h in [(0.9, 0.25), (1.0, 0.4), (2.0, 0.3), (0.05, 1.0)]:
        sched = block_schedule(T, h)
        assert sched[0] == 0.0 and sched[-1] == T
        assert all(b > a for a, b in zip(sched, sched[1:]))


def test_discount_factor_examples():
    zero = RateCurve.constant(0.0)
    assert discount_factor(zero, 0.0, 1.0) == 1.0
    flat = RateCurve.constant(0.05)
    # analytic antiderivative oracle
    assert discount_factor(flat, 0.0, 1.0) == pytest.approx(math.exp(-0.05), rel=1e-14)
    assert discount_factor(flat, 0.3, 0.3) == 1.0
    with pytest.raises(DomainError):
        discount_factor(flat, 0.5, 0.2)


@pytest.mark.parametrize(
    "curve",
    [
        RateCurve.constant(0.05),
        RateCurve.piecewise([0.0, 0.3, 0.7, 1.0], [0.02, 0.05, 0.04]),
        RateCurve.samples([0.0, 0.25, 0.6, 1.0], [0.01, 0.03, 0.05, 0.02]),
    ],
)
def test_discount_multiplicative(curve):
    for t1, t2, t3 in [(0.0, 0.5, 1.0), (0.1, 0.31, 0.8), (0.0, 0.7, 0.95)]:
        lhs = discount_factor(curve, t1, t3)
        rhs = discount_factor(curve, t1, t2) * discount_factor(curve, t2, t3)
        assert lhs == pytest.approx(rhs, rel=1e-12)


def test_sampled_curve_interpolates():
    curve = RateCurve.samples([0.0, 1.0], [0.0, 0.1])
    assert curve.rate(0.5) == pytest.approx(0.05)
    assert curve.integral(0.0, 1.0) == pytest.approx(0.05, rel=1e-14)


def _market(g_expr, f_expr="0.08", g_min=0.1):
    return VariableDelayMarket(
        h=0.25,
        T=1.0,
        s0=100.0,
        f=CoefficientExpr.parse(f_expr),
        g=CoefficientExpr.parse(g_expr),
        rate=RateCurve.constant(0.05),
        g_min=g_min,
    )


def test_validate_constant_above_bound():
    assert validate_market(_market("0.2")) == []


def test_validate_zero_crossing():
    violations = validate_market(_market("s - 1", g_min=0.1))
    assert violations
    assert any("g_min" in v.message for v in violations)


def test_validate_nonfinite_drift():
    violations = validate_market(_market("0.2", f_expr="log(s - 20000)"))
    assert violations
    assert any("f" in v.message for v in violations)


def test_market_from_config_roundtrip(tmp_path):
    cfg = {
        "h": 0.25,
        "T": 0.9,
        "s0": 100.0,
        "f_expr": "0.08",
        "g_expr": "0.1 + 0.1*s/(1+s)",
        "g_min": 0.05,
        "rate": {"kind": "constant", "rate": 0.05},
    }
    market = market_from_config(cfg)
    assert market.h == 0.25
    assert market.g(0.0, 1.0) == pytest.approx(0.15)

    path = tmp_path / "m.json"
    path.write_text('{"h": 0.25}')
    with pytest.raises(ConfigError, match="missing key"):
        market_from_config(load_config(path))
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.json")


def test_market_rejects_invalid_config():
    with pytest.raises(ConfigError, match="validation"):
        market_from_config(
            {
                "h": 0.25,
                "T": 1.0,
                "s0": 100.0,
                "f_expr": "0.08",
                "g_expr": "s - 1",
                "g_min": 0.1,
                "rate": {"kind": "constant", "rate": 0.05},
            }
        )


def test_sfde_from_config():
    sfde = sfde_from_config(
        {
            "L": 0.25,
            "b": 0.25,
            "a": 0.25,
            "T": 1.0,
            "phi_samples": {"times": [-0.25, 0.0], "values": [1.0, 2.0]},
            "drift": {"kind": "segment-point", "c": 0.1, "eps": 0.01},
            "g_expr": "0.2",
        }
    )
    assert sfde.phi(-0.125) == pytest.approx(1.5)
    with pytest.raises(ConfigError):
        sfde_from_config({"L": 0.25})


def test_drift_functional_validation():
    from delaybs import DriftFunctional

    with pytest.raises(ConfigError):
        DriftFunctional("segment-point", c=-1.0)
    with pytest.raises(ConfigError):
        DriftFunctional("sinusoidal", c=1.0)
    DriftFunctional("moving-average", c=0.0)
