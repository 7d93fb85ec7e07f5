"""Shortfall-risk measurement and feasibility machinery.

The loss over a risk horizon [t, t + delta] is L = Y - X', where Y is a
benchmark prescribed at t and X' the wealth at t + delta under controls
frozen over the horizon. Three dynamic risk measures of that loss have
closed forms because frozen controls make X' (shifted) lognormal:

* value at risk  VaR_alpha = inf{l : P(L > l) <= alpha},
* tail conditional expectation  TCE_alpha = E[L | L > VaR_alpha],
* expected loss  EL = E[max(L, 0)].

Continuous-time controls are (proportion in stock pi, consumption rate c);
discrete-time controls are (amount invested phi, amount consumed eta), with
no short-selling. A constraint config couples a measure, a benchmark, a
bound (relative to wealth or absolute) and the horizon delta.

All risk evaluations broadcast over numpy arrays in the wealth/control
arguments with scalar t.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, DomainError, NumericsError
from .market_model import MarketParams, conditional_wealth_law, discrete_return_law
from .normal import norm_cdf, norm_ppf
from .optimize import (bisect_boundary_arrays, bisect_boundary_scalar,
                       golden_min_arrays, golden_min_scalar)

__all__ = [
    "PI_MAX",
    "RiskMeasureKind",
    "Benchmark",
    "RiskBound",
    "RiskConstraintConfig",
    "ContinuousMertonRef",
    "DiscreteMertonRef",
    "benchmark_value",
    "risk_continuous",
    "risk_discrete",
    "is_feasible",
    "feasible_interval",
    "feasible_consumption_cap",
    "mc_risk_oracle",
]

# Box for the continuous exposure search; the unconstrained optimum at the
# baseline parameters is ~2.18, so 10 is safely nonbinding.
PI_MAX = 10.0

_TINY_S = 1e-14

_PPF_CACHE: dict = {}


def _q_alpha(alpha: float) -> float:
    # the tail quantile is hit on every closed-form call inside bisection
    # loops; memoize per alpha
    q = _PPF_CACHE.get(alpha)
    if q is None:
        q = _PPF_CACHE[alpha] = norm_ppf(alpha)
    return q


@dataclass(frozen=True)
class RiskMeasureKind:
    """Measure tag: "var" or "tce" with a tail level alpha, or "el"."""

    name: str
    alpha: Optional[float] = None

    def __post_init__(self):
        if self.name not in ("var", "tce", "el"):
            raise ConfigError(f"unknown risk measure {self.name!r}")
        if self.name in ("var", "tce"):
            if self.alpha is None or not (0.0 < self.alpha < 1.0):
                raise ConfigError("alpha must lie strictly inside (0, 1)")
        elif self.alpha is not None:
            raise ConfigError("expected loss takes no alpha")

    @classmethod
    def var(cls, alpha: float) -> "RiskMeasureKind":
        return cls("var", alpha)

    @classmethod
    def tce(cls, alpha: float) -> "RiskMeasureKind":
        return cls("tce", alpha)

    @classmethod
    def el(cls) -> "RiskMeasureKind":
        return cls("el")


@dataclass(frozen=True)
class ContinuousMertonRef:
    """Reference data to evaluate the continuous unconstrained-optimal
    investor's conditional expected wealth over one risk horizon."""

    pi: float
    c_of_t: Callable[[float], float]
    delta: float
    params: MarketParams

    def expected_wealth(self, t, x):
        p = self.params
        growth = (p.r + self.pi * (p.mu - p.r) - self.c_of_t(t)) * self.delta
        return np.asarray(x, dtype=float) * np.exp(growth)


@dataclass(frozen=True)
class DiscreteMertonRef:
    """Same for the discrete regime: the reference invests amount
    phi = beta (x - eta) and consumes eta = zeta x at each period start."""

    beta_of_t: Callable[[float], float]
    zeta_of_t: Callable[[float], float]
    delta: float
    params: MarketParams

    def expected_wealth(self, t, x):
        p = self.params
        x = np.asarray(x, dtype=float)
        eta = self.zeta_of_t(t) * x
        phi = self.beta_of_t(t) * (x - eta)
        return np.exp(p.r * self.delta) * (x - eta - phi) + np.exp(p.mu * self.delta) * phi


@dataclass(frozen=True)
class Benchmark:
    """Wealth target Y whose shortfall defines the loss.

    Variants: a constant level, a deterministic table of (t, y) knots with
    linear interpolation and constant extrapolation, a fraction of current
    wealth, or the conditional expected wealth of the unconstrained-optimal
    reference investor (which needs a reference object).
    """

    kind: str
    level: Optional[float] = None
    knots: Optional[tuple] = None
    ref: object = None

    @classmethod
    def constant(cls, y: float) -> "Benchmark":
        if y < 0.0:
            raise ConfigError("constant benchmark must be nonnegative")
        return cls("constant", level=y)

    @classmethod
    def table(cls, knots) -> "Benchmark":
        knots = tuple((float(t), float(y)) for t, y in knots)
        if not knots or any(y < 0.0 for _, y in knots):
            raise ConfigError("table benchmark needs nonnegative knots")
        if any(knots[i + 1][0] <= knots[i][0] for i in range(len(knots) - 1)):
            raise ConfigError("table knots must have increasing times")
        return cls("table", knots=knots)

    @classmethod
    def fraction(cls, p: float) -> "Benchmark":
        if not p > 0.0:
            raise ConfigError("wealth fraction must be positive")
        return cls("fraction", level=p)

    @classmethod
    def merton(cls, ref=None) -> "Benchmark":
        return cls("merton", ref=ref)

    def value(self, t, x, merton_ref=None):
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            out = np.full_like(x, self.level)
        elif self.kind == "fraction":
            out = self.level * x
        elif self.kind == "table":
            ts = np.array([k[0] for k in self.knots])
            ys = np.array([k[1] for k in self.knots])
            out = np.full_like(x, float(np.interp(t, ts, ys)))
        else:
            ref = merton_ref if merton_ref is not None else self.ref
            if ref is None:
                raise ConfigError("merton benchmark requires a reference policy")
            out = ref.expected_wealth(t, x)
        return float(out) if out.ndim == 0 else out


def benchmark_value(benchmark: Benchmark, t, x, merton_ref=None):
    """Evaluate a benchmark at (t, x); nonnegative by construction."""
    if np.any(np.asarray(x) <= 0.0):
        raise DomainError("wealth must be positive")
    return benchmark.value(t, x, merton_ref)


@dataclass(frozen=True)
class RiskBound:
    """Bound on the risk value: relative (lambda * x) or absolute (e)."""

    kind: str
    level: float

    def __post_init__(self):
        if self.kind not in ("relative", "absolute"):
            raise ConfigError(f"unknown bound kind {self.kind!r}")
        if self.level < 0.0:
            raise ConfigError("bound level must be nonnegative")

    @classmethod
    def relative(cls, lam: float) -> "RiskBound":
        return cls("relative", lam)

    @classmethod
    def absolute(cls, e: float) -> "RiskBound":
        return cls("absolute", e)

    def value(self, t, x):
        x = np.asarray(x, dtype=float)
        out = self.level * x if self.kind == "relative" else np.full_like(x, self.level)
        return float(out) if out.ndim == 0 else out

    @property
    def is_relative(self) -> bool:
        return self.kind == "relative"


@dataclass(frozen=True)
class RiskConstraintConfig:
    """Measure + benchmark + bound + horizon, the full constraint spec."""

    kind: RiskMeasureKind
    benchmark: Benchmark
    bound: RiskBound
    delta: float

    def __post_init__(self):
        if not self.delta > 0.0:
            raise ConfigError("risk horizon delta must be positive")


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def _risk_continuous_given_y(kind: RiskMeasureKind, y, x, pi, c, delta,
                             params: MarketParams):
    r, mu, sig = params.r, params.mu, params.sigma
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    pi = np.asarray(pi, dtype=float)
    c = np.asarray(c, dtype=float)
    a = pi * (mu - r) + r - c
    s = np.abs(pi) * sig * math.sqrt(delta)

    if kind.name == "var":
        q = _q_alpha(kind.alpha)
        out = y - x * np.exp((a - 0.5 * pi ** 2 * sig ** 2) * delta + q * s)
    elif kind.name == "tce":
        q = _q_alpha(kind.alpha)
        out = y - (x / kind.alpha) * np.exp(a * delta) * norm_cdf(q - s)
    else:
        growth = x * np.exp(a * delta)
        det_loss = np.maximum(y - growth, 0.0)  # pi = 0: wealth deterministic
        s_safe = np.where(s < _TINY_S, 1.0, s)
        with np.errstate(divide="ignore", invalid="ignore"):
            d1 = (np.log(y / x) - (a - 0.5 * pi ** 2 * sig ** 2) * delta) / s_safe
        d1 = np.where(y > 0.0, d1, -np.inf)
        d2 = d1 - s
        el = np.where(y > 0.0, y, 0.0) * norm_cdf(d1) - growth * norm_cdf(d2)
        out = np.where(s < _TINY_S, det_loss, el)
    out = np.asarray(out)
    return float(out) if out.ndim == 0 else out


def _risk_discrete_given_y(kind: RiskMeasureKind, y, x, phi, eta, delta,
                           params: MarketParams):
    r, mu, sig = params.r, params.mu, params.sigma
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    phi = np.asarray(phi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    tol = 1e-12
    if np.any(eta < -tol) or np.any(eta > x * (1 + tol) + tol):
        raise DomainError("consumed amount must satisfy 0 <= eta <= x")
    if np.any(phi < -tol) or np.any(phi > (x - eta) * (1 + tol) + tol):
        raise DomainError("invested amount must satisfy 0 <= phi <= x - eta "
                          "(no short-selling)")

    sq = sig * math.sqrt(delta)
    A = y - np.exp(r * delta) * (x - eta - phi)
    if kind.name == "var":
        q = _q_alpha(kind.alpha)
        out = A - np.exp(q * sq + (mu - 0.5 * sig ** 2) * delta) * phi
    elif kind.name == "tce":
        q = _q_alpha(kind.alpha)
        out = A - (1.0 / kind.alpha) * np.exp(mu * delta) * norm_cdf(q - sq) * phi
    else:
        # phi = 0: deterministic loss; A <= 0: benchmark already covered by
        # the riskless part, the shortfall region is empty and EL = 0.
        phi_safe = np.where(phi < _TINY_S, 1.0, phi)
        A_safe = np.where(A > 0.0, A, 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            d1 = (np.log(A_safe / phi_safe) - (mu - 0.5 * sig ** 2) * delta) / sq
        d2 = d1 - sq
        el = A * norm_cdf(d1) - np.exp(mu * delta) * norm_cdf(d2) * phi
        el = np.where(A > 0.0, el, 0.0)
        out = np.where(phi < _TINY_S, np.maximum(A, 0.0), el)
    out = np.asarray(out)
    return float(out) if out.ndim == 0 else out


def risk_continuous(kind: RiskMeasureKind, t, x, pi, c,
                    cfg: RiskConstraintConfig, params: MarketParams,
                    frozen_shares: bool = False):
    """Closed-form risk of frozen continuous controls (pi, c) over one horizon.

    With frozen_shares=True the number of shares (not the proportion) is
    held constant over the horizon, which turns the one-period wealth into
    the discrete-regime shifted lognormal with phi = pi x and eta = c x
    delta; used by the cross-regime comparison experiment.
    """
    if np.any(np.asarray(x) <= 0.0):
        raise DomainError("wealth must be positive")
    if np.any(np.asarray(c) < 0.0):
        raise DomainError("consumption rate must be nonnegative")
    y = cfg.benchmark.value(t, x)
    if frozen_shares:
        x_arr = np.asarray(x, dtype=float)
        return _risk_discrete_given_y(kind, y, x_arr, np.asarray(pi) * x_arr,
                                      np.asarray(c) * x_arr * cfg.delta,
                                      cfg.delta, params)
    return _risk_continuous_given_y(kind, y, x, pi, c, cfg.delta, params)


def risk_discrete(kind: RiskMeasureKind, t, x, phi, eta,
                  cfg: RiskConstraintConfig, params: MarketParams):
    """Closed-form risk of a one-period discrete position (phi invested,
    eta consumed); phi = 0 and an empty shortfall region are handled as
    their analytic limits."""
    if np.any(np.asarray(x) <= 0.0):
        raise DomainError("wealth must be positive")
    y = cfg.benchmark.value(t, x)
    return _risk_discrete_given_y(kind, y, x, phi, eta, cfg.delta, params)


def is_feasible(t, x, control, cfg: RiskConstraintConfig, params: MarketParams,
                regime: str, frozen_shares: bool = False) -> bool:
    """True iff the control's risk is within the bound (ties count)."""
    if regime == "continuous":
        pi, c = control
        risk = risk_continuous(cfg.kind, t, x, pi, c, cfg, params, frozen_shares)
    elif regime == "discrete":
        phi, eta = control
        risk = risk_discrete(cfg.kind, t, x, phi, eta, cfg, params)
    else:
        raise ConfigError(f"unknown regime {regime!r}")
    return bool(np.all(risk <= cfg.bound.value(t, x)))


# ---------------------------------------------------------------------------
# feasible exposure intervals
# ---------------------------------------------------------------------------

_SQRT2 = math.sqrt(2.0)


def _phi(z: float) -> float:
    return 0.5 * math.erfc(-z / _SQRT2)


def _scalar_cont_risk(kind, y, x, delta, params):
    """Closed form as a plain-float closure f(pi, c); constants hoisted.

    These closures sit inside golden-section and bisection loops, where
    numpy call overhead on scalars would dominate the solve time.
    """
    r, mu, sig = params.r, params.mu, params.sigma
    sqd = math.sqrt(delta)
    ex = mu - r
    if kind.name == "var":
        q = _q_alpha(kind.alpha)

        def f(pi, c):
            a = pi * ex + r - c
            return y - x * math.exp((a - 0.5 * pi * pi * sig * sig) * delta
                                    + q * abs(pi) * sig * sqd)
    elif kind.name == "tce":
        q = _q_alpha(kind.alpha)
        inv_alpha = 1.0 / kind.alpha

        def f(pi, c):
            a = pi * ex + r - c
            return y - x * inv_alpha * math.exp(a * delta) * _phi(
                q - abs(pi) * sig * sqd)
    else:
        ln_yx = math.log(y / x) if y > 0.0 else -math.inf

        def f(pi, c):
            a = pi * ex + r - c
            s = abs(pi) * sig * sqd
            if s < _TINY_S:
                return max(y - x * math.exp(a * delta), 0.0)
            if y <= 0.0:
                return 0.0
            d1 = (ln_yx - (a - 0.5 * pi * pi * sig * sig) * delta) / s
            return y * _phi(d1) - x * math.exp(a * delta) * _phi(d1 - s)
    return f


def _scalar_disc_risk(kind, y, x, delta, params):
    """Discrete closed form as a plain-float closure f(phi, eta)."""
    r, mu, sig = params.r, params.mu, params.sigma
    sq = sig * math.sqrt(delta)
    erd = math.exp(r * delta)
    if kind.name == "var":
        coeff = math.exp(_q_alpha(kind.alpha) * sq + (mu - 0.5 * sig * sig) * delta)

        def f(phi, eta):
            return y - erd * (x - eta - phi) - coeff * phi
    elif kind.name == "tce":
        coeff = math.exp(mu * delta) * _phi(_q_alpha(kind.alpha) - sq) / kind.alpha

        def f(phi, eta):
            return y - erd * (x - eta - phi) - coeff * phi
    else:
        emd = math.exp(mu * delta)
        md = (mu - 0.5 * sig * sig) * delta

        def f(phi, eta):
            A = y - erd * (x - eta - phi)
            if phi < _TINY_S:
                return max(A, 0.0)
            if A <= 0.0:
                return 0.0
            d1 = (math.log(A / phi) - md) / sq
            return A * _phi(d1) - emd * _phi(d1 - sq) * phi
    return f


def _exposure_risk_fn_scalar(t, x, c_fixed, cfg, params, regime, frozen_shares,
                             y=None):
    if y is None:
        y = float(cfg.benchmark.value(t, float(x)))
    if regime == "continuous" and not frozen_shares:
        f = _scalar_cont_risk(cfg.kind, y, x, cfg.delta, params)
        return lambda e: f(e, c_fixed)
    if regime == "continuous":
        f = _scalar_disc_risk(cfg.kind, y, x, cfg.delta, params)
        eta = c_fixed * x * cfg.delta
        cap = x - eta

        def risk_of(e):
            phi = e * x
            if phi > cap + 1e-12 or e < -1e-12:
                return math.inf
            return f(min(phi, cap), eta)
        return risk_of
    if regime == "discrete":
        f = _scalar_disc_risk(cfg.kind, y, x, cfg.delta, params)
        eta = c_fixed * x
        w = x - eta
        return lambda e: f(e * w, eta)
    raise ConfigError(f"unknown regime {regime!r}")


def _exposure_risk_fn(t, x, fixed_consumption, cfg, params, regime, frozen_shares):
    """Risk as a function of the exposure array, other arguments fixed.

    The benchmark does not depend on the exposure, so it is evaluated once
    up front; this function sits inside bisection loops.
    """
    kind = cfg.kind
    x_arr = np.asarray(x, dtype=float)
    y = cfg.benchmark.value(t, x_arr)
    if regime == "continuous" and not frozen_shares:
        def risk_of(e):
            return np.asarray(_risk_continuous_given_y(
                kind, y, x_arr, e, fixed_consumption, cfg.delta, params))
    elif regime == "continuous":
        eta = np.asarray(fixed_consumption) * x_arr * cfg.delta

        def risk_of(e):
            # exposures that would require borrowing against the consumed
            # amount are inadmissible under frozen shares; treat as +inf
            phi = np.minimum(e * x_arr, x_arr - eta)
            risk = np.asarray(_risk_discrete_given_y(
                kind, y, x_arr, np.maximum(phi, 0.0), eta, cfg.delta, params))
            return np.where((e * x_arr > x_arr - eta + 1e-12) | (e < -1e-12),
                            np.inf, risk)
    elif regime == "discrete":
        eta = fixed_consumption * x_arr

        def risk_of(e):
            return np.asarray(_risk_discrete_given_y(
                kind, y, x_arr, e * (x_arr - eta), eta, cfg.delta, params))
    else:
        raise ConfigError(f"unknown regime {regime!r}")
    return risk_of


def feasible_interval(t, x, fixed_consumption, cfg: RiskConstraintConfig,
                      params: MarketParams, regime: str, box=None,
                      frozen_shares: bool = False, tol: float = 1e-10,
                      scan: bool = True):
    """Interval of feasible stock exposure at fixed consumption.

    Exposure means the proportion pi in the continuous regime (box
    [-PI_MAX, PI_MAX]) and the proportion beta of post-consumption wealth
    in the discrete regime (box [0, 1]). Endpoints are located by
    bisection to absolute tolerance ``tol``; an empty set is signalled by
    returning None (scalar x) or NaN endpoints (array x).

    The feasible set is an interval for the supported closed forms
    (monotone tail behaviour); a sparse scan guards that assumption and
    raises NumericsError if it ever fails.
    """
    if box is None:
        box = (-PI_MAX, PI_MAX) if regime == "continuous" else (0.0, 1.0)
    lo_box, hi_box = float(box[0]), float(box[1])
    x_in = np.asarray(x, dtype=float)
    scalar = x_in.ndim == 0
    if scalar:
        return _feasible_interval_scalar(t, float(x_in), float(fixed_consumption),
                                         cfg, params, regime, lo_box, hi_box,
                                         frozen_shares, tol, scan)
    x_arr = np.atleast_1d(x_in)
    n = x_arr.shape[0]

    risk_of = _exposure_risk_fn(t, x_arr, fixed_consumption, cfg, params,
                                regime, frozen_shares)
    bound = np.broadcast_to(np.asarray(cfg.bound.value(t, x_arr), dtype=float), (n,))

    a = np.full(n, lo_box)
    b = np.full(n, hi_box)
    e_min, r_min = golden_min_arrays(risk_of, a, b, tol=1e-6 * (hi_box - lo_box))
    # keep the better of the box ends and the golden minimizer
    for cand in (np.full(n, lo_box), np.full(n, hi_box)):
        rc = risk_of(cand)
        better = rc < r_min
        e_min = np.where(better, cand, e_min)
        r_min = np.where(better, rc, r_min)
    feasible = r_min <= bound

    ok = lambda e: risk_of(e) <= bound
    lo = np.full(n, np.nan)
    hi = np.full(n, np.nan)
    if np.any(feasible):
        lo_edge = ok(np.full(n, lo_box))
        hi_edge = ok(np.full(n, hi_box))
        lo_b = bisect_boundary_arrays(ok, np.full(n, lo_box), e_min, tol)
        hi_b = bisect_boundary_arrays(ok, np.full(n, hi_box), e_min, tol)
        lo = np.where(feasible, np.where(lo_edge, lo_box, lo_b), np.nan)
        hi = np.where(feasible, np.where(hi_edge, hi_box, hi_b), np.nan)

    if scan:
        _scan_interval(risk_of, bound, lo, hi, lo_box, hi_box, feasible)
    return lo, hi


def _feasible_interval_scalar(t, x, c_fixed, cfg, params, regime, lo_box,
                              hi_box, frozen_shares, tol, scan):
    risk_of = _exposure_risk_fn_scalar(t, x, c_fixed, cfg, params, regime,
                                       frozen_shares)
    bound = float(cfg.bound.value(t, x))
    e_min, r_min = golden_min_scalar(risk_of, lo_box, hi_box,
                                     1e-6 * (hi_box - lo_box))
    for cand in (lo_box, hi_box):
        rc = risk_of(cand)
        if rc < r_min:
            e_min, r_min = cand, rc
    if r_min > bound:
        if scan:
            _scan_interval_scalar(risk_of, bound, None, None, lo_box, hi_box)
        return None
    ok = lambda e: risk_of(e) <= bound
    lo = lo_box if ok(lo_box) else bisect_boundary_scalar(ok, lo_box, e_min, tol)
    hi = hi_box if ok(hi_box) else bisect_boundary_scalar(ok, hi_box, e_min, tol)
    if scan:
        _scan_interval_scalar(risk_of, bound, lo, hi, lo_box, hi_box)
    return lo, hi


def _scan_interval_scalar(risk_of, bound, lo, hi, lo_box, hi_box, n_scan=33):
    margin = 1e-6 * (hi_box - lo_box)
    step = (hi_box - lo_box) / (n_scan - 1)
    for i in range(n_scan):
        g = lo_box + step * i
        feas = risk_of(g) <= bound
        if lo is None:
            bad = feas
        else:
            inside = lo + margin <= g <= hi - margin
            outside = g < lo - margin or g > hi + margin
            bad = (inside and not feas) or (outside and feas)
        if bad:
            raise NumericsError(
                "feasible exposure set is not an interval; a scan point "
                "contradicts the bisected endpoints")


def _scan_interval(risk_of, bound, lo, hi, lo_box, hi_box, feasible, n_scan=33):
    margin = 1e-6 * (hi_box - lo_box)
    grid = np.linspace(lo_box, hi_box, n_scan)
    for g in grid:
        feas_g = risk_of(np.full_like(bound, g)) <= bound
        inside = feasible & (lo + margin <= g) & (g <= hi - margin)
        outside = ~feasible | (g < lo - margin) | (g > hi + margin)
        if np.any(inside & ~feas_g) or np.any(outside & feas_g):
            raise NumericsError(
                "feasible exposure set is not an interval; a scan point "
                "contradicts the bisected endpoints")


def feasible_consumption_cap(t, x, cfg: RiskConstraintConfig, params: MarketParams,
                             regime: str, c_hi: float, box=None,
                             frozen_shares: bool = False, tol: float = 1e-10):
    """Largest consumption (rate c, or proportion zeta in the discrete
    regime) in [0, c_hi] leaving the exposure interval nonempty.

    Risk increases with consumption at fixed exposure, so feasibility in
    consumption is an interval [0, cap]. Returns NaN (or None for scalar
    x) where even zero consumption is infeasible.
    """
    if box is None:
        box = (-PI_MAX, PI_MAX) if regime == "continuous" else (0.0, 1.0)
    lo_box, hi_box = float(box[0]), float(box[1])
    x_in = np.asarray(x, dtype=float)
    scalar = x_in.ndim == 0
    if scalar:
        xf = float(x_in)
        bound_s = float(cfg.bound.value(t, xf))
        y = float(cfg.benchmark.value(t, xf))
        span_tol = 1e-6 * (hi_box - lo_box)

        def nonempty_s(c):
            risk_of = _exposure_risk_fn_scalar(t, xf, c, cfg, params, regime,
                                               frozen_shares, y=y)
            _, r_min = golden_min_scalar(risk_of, lo_box, hi_box, span_tol)
            r_min = min(r_min, risk_of(lo_box), risk_of(hi_box))
            return r_min <= bound_s

        if nonempty_s(c_hi):
            return c_hi
        if not nonempty_s(0.0):
            return None
        return bisect_boundary_scalar(nonempty_s, c_hi, 0.0, tol)

    x_arr = np.atleast_1d(x_in)
    n = x_arr.shape[0]
    bound = np.broadcast_to(np.asarray(cfg.bound.value(t, x_arr), dtype=float), (n,))

    def nonempty(c):
        c_b = np.broadcast_to(np.asarray(c, dtype=float), (n,))
        risk_of = _exposure_risk_fn(t, x_arr, c_b, cfg, params, regime,
                                    frozen_shares)
        _, r_min = golden_min_arrays(risk_of, np.full(n, lo_box),
                                     np.full(n, hi_box),
                                     tol=1e-6 * (hi_box - lo_box))
        for cand in (lo_box, hi_box):
            r_min = np.minimum(r_min, risk_of(np.full(n, cand)))
        return r_min <= bound

    ok_zero = nonempty(np.zeros(n))
    ok_top = nonempty(np.full(n, c_hi))
    cap = np.full(n, np.nan)
    cap[ok_top] = c_hi
    needs = ok_zero & ~ok_top
    if np.any(needs):
        capped = bisect_boundary_arrays(lambda c: nonempty(c) | ~needs,
                                        np.full(n, c_hi), np.zeros(n), tol)
        cap = np.where(needs, capped, cap)
    return cap


# ---------------------------------------------------------------------------
# Monte Carlo oracle
# ---------------------------------------------------------------------------

def mc_risk_oracle(kind: RiskMeasureKind, t, x, control,
                   cfg: RiskConstraintConfig, params: MarketParams,
                   regime: str, n_samples: int, seed: int,
                   n_boot: int = 200):
    """Estimate (risk, standard error) by sampling the one-period wealth law.

    VaR is the empirical (1 - alpha) tail quantile of the losses with SE
    from a bootstrap of 200 resamples; the resampled quantile is drawn
    directly as an order statistic of the sorted sample (the k-th order
    statistic of n uniforms is Beta(k, n - k + 1)), which is equivalent to
    explicit resampling at a fraction of the cost. TCE averages the losses
    above that quantile, EL the positive parts of all losses.
    """
    if n_samples < 10_000:
        raise DomainError("oracle needs at least 1e4 samples")
    rng = np.random.Generator(np.random.Philox(key=seed))
    y = cfg.benchmark.value(t, x)
    if regime == "continuous":
        pi, c = control
        law = conditional_wealth_law(x, pi, c, cfg.delta, params)
        x_next = law.sample(rng, n_samples)
    elif regime == "discrete":
        phi, eta = control
        gross = discrete_return_law(params, cfg.delta).sample(rng, n_samples)
        x_next = np.exp(params.r * cfg.delta) * (x - eta - phi) + phi * gross
    else:
        raise ConfigError(f"unknown regime {regime!r}")
    losses = y - x_next

    if kind.name == "el":
        pos = np.maximum(losses, 0.0)
        return float(np.mean(pos)), float(np.std(pos, ddof=1) / math.sqrt(n_samples))

    s = np.sort(losses)
    n = n_samples
    m = int(math.floor(n * kind.alpha))  # tail sample count
    k = n - m                            # 1-based quantile index
    var_hat = s[k - 1]
    if kind.name == "var":
        u = rng.beta(k, n - k + 1, size=n_boot)
        idx = np.clip(np.ceil(n * u).astype(int) - 1, 0, n - 1)
        return float(var_hat), float(np.std(s[idx], ddof=1))
    tail = s[k:]
    if tail.size < 2:
        raise DomainError("alpha too small for the sample size")
    return float(np.mean(tail)), float(np.std(tail, ddof=1) / math.sqrt(tail.size))
