"""Market models, delay-block arithmetic, rate curves and validation.

Two models live here.  ``VariableDelayMarket`` is the block-delay market:
on each interval ``[kh, (k+1)h)`` the drift ``f`` and volatility ``g``
are frozen at the block-start price.  ``FixedDelaySfde`` is the
fixed-delay model whose diffusion reads the price ``b`` years back and
whose drift is a functional of the path segment.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import coeffexpr
from .errors import ConfigError, DomainError

# Relative tolerance used to snap times intended as block boundaries.
BOUNDARY_SNAP = 1e-12


def floor_block(t, h):
    """Map t to the start kh of its delay block [kh, (k+1)h).

    Times within a relative tolerance of a boundary snap onto it, so a
    time meant as ``3*h`` never lands in the previous block through
    rounding.
    """
    if h <= 0.0:
        raise DomainError(f"block length must be positive, got {h}")
    if t < 0.0:
        raise DomainError(f"time must be non-negative, got {t}")
    k = math.floor((t / h) * (1.0 + BOUNDARY_SNAP))
    return k * h


def block_index(t, h):
    """Integer k with kh <= t < (k+1)h, with the same boundary snapping."""
    if h <= 0.0:
        raise DomainError(f"block length must be positive, got {h}")
    if t < 0.0:
        raise DomainError(f"time must be non-negative, got {t}")
    return math.floor((t / h) * (1.0 + BOUNDARY_SNAP))


def block_schedule(T, h):
    """Return [0, h, 2h, ..., T], strictly increasing, ending exactly at T."""
    if T <= 0.0 or h <= 0.0:
        raise DomainError("T and h must be positive")
    k_last = block_index(T, h)
    times = [k * h for k in range(k_last + 1)]
    if T - times[-1] > BOUNDARY_SNAP * max(T, 1.0):
        times.append(T)
    else:
        times[-1] = T
    return times


@dataclass(frozen=True)
class RateCurve:
    """Deterministic short-rate curve lambda(t) with exact integrals.

    kind is one of "constant", "piecewise" (piecewise-constant between
    edges) or "samples" (linear interpolation between samples).
    Integrals use the piecewise antiderivative, so discount factors are
    exactly multiplicative across subintervals.
    """

    kind: str
    times: tuple = ()
    values: tuple = ()

    @classmethod
    def constant(cls, rate):
        return cls("constant", (), (float(rate),))

    @classmethod
    def piecewise(cls, edges, rates):
        edges = tuple(float(x) for x in edges)
        rates = tuple(float(x) for x in rates)
        if len(edges) != len(rates) + 1:
            raise ConfigError("piecewise curve needs len(times) == len(rates) + 1")
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise ConfigError("piecewise edges must be strictly increasing")
        return cls("piecewise", edges, rates)

    @classmethod
    def samples(cls, times, rates):
        times = tuple(float(x) for x in times)
        rates = tuple(float(x) for x in rates)
        if len(times) != len(rates) or len(times) < 2:
            raise ConfigError("sampled curve needs matching times and rates, >= 2")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigError("sample times must be strictly increasing")
        return cls("samples", times, rates)

    def rate(self, t):
        if self.kind == "constant":
            return self.values[0]
        if self.kind == "piecewise":
            if t <= self.times[0]:
                return self.values[0]
            for a, b, r in zip(self.times, self.times[1:], self.values):
                if t < b:
                    return r
            return self.values[-1]
        # samples: linear interpolation, clamped at the ends
        return float(np.interp(t, self.times, self.values))

    def integral(self, t1, t2):
        """Exact integral of lambda over [t1, t2]."""
        if t1 > t2:
            raise DomainError(f"need t1 <= t2, got [{t1}, {t2}]")
        if self.kind == "constant":
            return self.values[0] * (t2 - t1)
        if self.kind == "piecewise":
            total = 0.0
            for a, b, r in zip(self.times, self.times[1:], self.values):
                lo = max(a, t1)
                hi = min(b, t2)
                if hi > lo:
                    total += r * (hi - lo)
            # clamp outside the covered range
            if t1 < self.times[0]:
                total += self.values[0] * (min(t2, self.times[0]) - t1)
            if t2 > self.times[-1]:
                total += self.values[-1] * (t2 - max(t1, self.times[-1]))
            return total
        # samples: exact trapezoid of the piecewise-linear interpolant
        ts = [t1]
        ts.extend(x for x in self.times if t1 < x < t2)
        ts.append(t2)
        total = 0.0
        for a, b in zip(ts, ts[1:]):
            total += 0.5 * (self.rate(a) + self.rate(b)) * (b - a)
        return total


def discount_factor(rate, t1, t2):
    """exp(-integral of lambda over [t1, t2]); strictly positive."""
    return math.exp(-rate.integral(t1, t2))


@dataclass(frozen=True)
class CoefficientExpr:
    """A parsed coefficient function of (t, s)."""

    source: str
    ast: object = field(compare=False)

    @classmethod
    def parse(cls, source):
        return cls(source, coeffexpr.parse(source))

    def __call__(self, t, s):
        return coeffexpr.evaluate(self.ast, t, s)

    def vec(self, t, s):
        return coeffexpr.evaluate_vec(self.ast, t, s)


@dataclass(frozen=True)
class OptionSpec:
    strike: float
    kind: str = "call"  # "call" | "put"
    t_valuation: float = 0.0

    def __post_init__(self):
        if self.strike <= 0.0:
            raise ConfigError(f"strike must be positive, got {self.strike}")
        if self.kind not in ("call", "put"):
            raise ConfigError(f"option kind must be call or put, got {self.kind!r}")

    def payoff(self, s):
        if self.kind == "call":
            return np.maximum(s - self.strike, 0.0)
        return np.maximum(self.strike - s, 0.0)


@dataclass(frozen=True)
class VariableDelayMarket:
    """Block-delay market: coefficients read the price at the block start."""

    h: float
    T: float
    s0: float
    f: CoefficientExpr
    g: CoefficientExpr
    rate: RateCurve
    g_min: float = 1e-4

    def __post_init__(self):
        if self.h <= 0.0:
            raise ConfigError(f"h must be positive, got {self.h}")
        if self.T <= 0.0:
            raise ConfigError(f"T must be positive, got {self.T}")
        if self.s0 <= 0.0:
            raise ConfigError(f"s0 must be positive, got {self.s0}")
        if self.g_min <= 0.0:
            raise ConfigError(f"g_min must be positive, got {self.g_min}")


@dataclass(frozen=True)
class DriftFunctional:
    """Catalog of drift functionals for the fixed-delay model.

    segment-point:       f(t, path) = c * S(t - b) + eps      (c > 0, eps >= 0)
    proportional-lagged: f = c * S(t-a) / (1 + S(t-a)) * S(t) (c >= 0)
    moving-average:      f = c * mean(S over [t-a, t]) * S(t) (c >= 0)
    """

    kind: str
    c: float
    eps: float = 0.0

    KINDS = ("segment-point", "proportional-lagged", "moving-average")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ConfigError(f"unknown drift kind {self.kind!r}")
        if self.kind == "segment-point":
            if self.c <= 0.0 or self.eps < 0.0:
                raise ConfigError("segment-point drift needs c > 0 and eps >= 0")
        elif self.c < 0.0:
            raise ConfigError(f"{self.kind} drift needs c >= 0")


@dataclass(frozen=True)
class InitialPath:
    """Sampled initial history on [-L, 0], linearly interpolated."""

    times: tuple
    values: tuple

    @classmethod
    def constant(cls, value, L):
        return cls((-L, 0.0), (float(value), float(value)))

    def __post_init__(self):
        if len(self.times) != len(self.values) or len(self.times) < 2:
            raise ConfigError("initial path needs matching times and values, >= 2")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ConfigError("initial path times must be strictly increasing")
        if self.times[-1] != 0.0:
            raise ConfigError("initial path must end at time 0")
        if any(v <= 0.0 for v in self.values):
            raise ConfigError("initial path values must be strictly positive")

    def __call__(self, t):
        return float(np.interp(t, self.times, self.values))


@dataclass(frozen=True)
class FixedDelaySfde:
    """Fixed-delay model: diffusion reads S(t-b), drift reads the segment."""

    L: float
    b: float
    a: float
    phi: InitialPath
    drift: DriftFunctional
    g: CoefficientExpr  # function of s only (t is passed but unused by convention)
    T: float

    def __post_init__(self):
        if not (0.0 < self.b <= self.L):
            raise ConfigError(f"need 0 < b <= L, got b={self.b}, L={self.L}")
        if self.a <= 0.0:
            raise ConfigError(f"a must be positive, got {self.a}")
        if self.T <= 0.0:
            raise ConfigError(f"T must be positive, got {self.T}")
        if self.phi.times[0] > -self.L + 1e-15:
            raise ConfigError("initial path must cover [-L, 0]")


@dataclass(frozen=True)
class Violation:
    """One validation failure at a grid point."""

    where: tuple  # (t, s)
    value: float
    message: str

    def __str__(self):
        t, s = self.where
        return f"{self.message} at (t={t:.6g}, s={s:.6g}): value {self.value!r}"


# Validation grid resolution: documented so users widening the grid know
# what the default covered.
VALIDATION_T_POINTS = 129
VALIDATION_S_POINTS = 65


def validation_grid(market):
    ts = np.linspace(0.0, market.T, VALIDATION_T_POINTS)
    ss = np.geomspace(market.s0 / 100.0, 100.0 * market.s0, VALIDATION_S_POINTS)
    return ts, ss


def validate_market(market):
    """Evaluate f and g over the validation grid; return all violations.

    An empty list means the market is valid: both coefficients are finite
    everywhere on the grid and |g| >= g_min.
    """
    ts, ss = validation_grid(market)
    violations = []
    for t in ts:
        for s in ss:
            for name, expr in (("f", market.f), ("g", market.g)):
                try:
                    value = expr(t, s)
                except coeffexpr.EvalError as exc:
                    violations.append(
                        Violation((t, s), math.nan, f"{name} failed to evaluate: {exc}")
                    )
                    continue
                if not math.isfinite(value):
                    violations.append(
                        Violation((t, s), value, f"{name} is non-finite")
                    )
                elif name == "g" and abs(value) < market.g_min:
                    violations.append(
                        Violation((t, s), value, f"|g| below g_min={market.g_min}")
                    )
    return violations


def _rate_from_config(cfg):
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ConfigError("rate must be an object with a 'kind' key")
    kind = cfg["kind"]
    try:
        if kind == "constant":
            return RateCurve.constant(cfg["rate"])
        if kind == "piecewise":
            return RateCurve.piecewise(cfg["times"], cfg["rates"])
        if kind == "samples":
            return RateCurve.samples(cfg["times"], cfg["rates"])
    except KeyError as exc:
        raise ConfigError(f"rate config missing key {exc}") from exc
    raise ConfigError(f"unknown rate kind {kind!r}")


def market_from_config(cfg, validate=True):
    """Build a VariableDelayMarket from a parsed JSON document."""
    try:
        market = VariableDelayMarket(
            h=float(cfg["h"]),
            T=float(cfg["T"]),
            s0=float(cfg["s0"]),
            f=CoefficientExpr.parse(cfg["f_expr"]),
            g=CoefficientExpr.parse(cfg["g_expr"]),
            rate=_rate_from_config(cfg["rate"]),
            g_min=float(cfg.get("g_min", 1e-4)),
        )
    except KeyError as exc:
        raise ConfigError(f"market config missing key {exc}") from exc
    except coeffexpr.ParseError as exc:
        raise ConfigError(f"bad coefficient expression: {exc}") from exc
    if validate:
        violations = validate_market(market)
        if violations:
            detail = "; ".join(str(v) for v in violations[:5])
            raise ConfigError(
                f"market failed validation with {len(violations)} violation(s): {detail}"
            )
    return market


def sfde_from_config(cfg):
    """Build a FixedDelaySfde from a parsed JSON document."""
    try:
        phi_cfg = cfg["phi_samples"]
        if isinstance(phi_cfg, dict):
            phi = InitialPath(tuple(phi_cfg["times"]), tuple(phi_cfg["values"]))
        else:
            phi = InitialPath.constant(float(phi_cfg), float(cfg["L"]))
        drift_cfg = cfg["drift"]
        drift = DriftFunctional(
            kind=drift_cfg["kind"],
            c=float(drift_cfg["c"]),
            eps=float(drift_cfg.get("eps", 0.0)),
        )
        return FixedDelaySfde(
            L=float(cfg["L"]),
            b=float(cfg["b"]),
            a=float(cfg["a"]),
            phi=phi,
            drift=drift,
            g=CoefficientExpr.parse(cfg["g_expr"]),
            T=float(cfg["T"]),
        )
    except KeyError as exc:
        raise ConfigError(f"fixed-delay config missing key {exc}") from exc
    except coeffexpr.ParseError as exc:
        raise ConfigError(f"bad coefficient expression: {exc}") from exc


def load_config(path):
    """Read a JSON config file, with a friendly error naming the path."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
