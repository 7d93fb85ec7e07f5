"""Finite-horizon discrete-time solver under per-period risk constraints.

For power utility and a homogeneous constraint (benchmark and bound both
scaling linearly in wealth) the value function separates,
V(t_n, x) = x^(1-gamma)/(1-gamma) * d_n, and the coefficients follow the
backward recursion

    d_N = 1,
    d_n = sup_{zeta} { zeta^(1-gamma)
          + (1-zeta)^(1-gamma) e^{r delta (1-gamma)}
            (sup_{beta feasible} E[(1 + beta R)^(1-gamma)]) d_{n+1} },

with R the discounted net return of one period. The expectation is a
Gauss-Hermite quadrature over the underlying normal. Non-homogeneous
configurations (absolute bounds, constant benchmarks) run the optimality
equation directly on a wealth grid with monotone cubic interpolation of
the continuation value in log-wealth.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.interpolate import PchipInterpolator

from .errors import ConfigError, DomainError, GridDomainError, InfeasibleError
from .market_model import MarketParams, UtilityPower
from .optimize import golden_max_arrays, golden_max_scalar
from .risk import (RiskConstraintConfig, feasible_consumption_cap,
                   feasible_interval)

__all__ = ["QuadratureSpec", "DiscreteSolution", "expected_power_return",
           "solve_relative", "solve_general", "default_wealth_grid"]

_golden_max_scalar = golden_max_scalar  # re-exported for merton

# searched slightly below the 1e-8 contract so extracted policies agree
# with closed-form first-order conditions to 1e-8
GOLDEN_TOL = 1e-9


@dataclass(frozen=True)
class QuadratureSpec:
    """Gauss-Hermite rule size for the one-period return expectation."""

    node_count: int = 64

    def __post_init__(self):
        if self.node_count < 16:
            raise ConfigError("quadrature needs at least 16 nodes")

    def nodes(self):
        key = self.node_count
        cached = _HERMGAUSS_CACHE.get(key)
        if cached is None:
            x, w = hermgauss(key)
            cached = _HERMGAUSS_CACHE[key] = (x, w / np.sqrt(np.pi))
        return cached


_HERMGAUSS_CACHE: dict = {}


def expected_power_return(beta, gamma: float, delta: float,
                          params: MarketParams, quad: QuadratureSpec = None):
    """E[(1 + beta R)^(1-gamma)] with R = e^{-r delta} R~ - 1 and R~ the
    lognormal gross price change of one period.

    beta must lie in [0, 1]: the integrand base 1 + beta (u - 1) then stays
    above 1 - beta >= 0 for all u > 0. Accepts a scalar or array beta.
    """
    beta_arr = np.asarray(beta, dtype=float)
    if np.any(beta_arr < 0.0) or np.any(beta_arr > 1.0):
        raise DomainError("beta must lie in [0, 1]")
    if not delta > 0.0:
        raise DomainError("delta must be positive")
    quad = quad or QuadratureSpec()
    xh, wh = quad.nodes()
    m = (params.mu - params.r - 0.5 * params.sigma ** 2) * delta
    s = params.sigma * np.sqrt(delta)
    u = np.exp(m + s * np.sqrt(2.0) * xh)  # discounted gross return
    base = 1.0 + beta_arr[..., None] * (u - 1.0)
    out = np.einsum("...q,q->...", np.maximum(base, 0.0) ** (1.0 - gamma), wh)
    return float(out) if out.ndim == 0 else out


@dataclass
class DiscreteSolution:
    """Solution of the N-period problem.

    Homogeneous runs carry the coefficients d (length N+1) and policies
    beta, zeta of shape (N,); general runs carry the value surface of
    shape (N+1, nx) over x_grid and policies of shape (N, nx).
    """

    delta: float
    gamma: float
    kind: str
    d: Optional[np.ndarray] = None
    beta: Optional[np.ndarray] = None
    zeta: Optional[np.ndarray] = None
    value: Optional[np.ndarray] = None
    x_grid: Optional[np.ndarray] = None

    @property
    def N(self) -> int:
        return len(self.beta)

    @property
    def times(self) -> np.ndarray:
        return self.delta * np.arange(self.N + 1)

    def value_at(self, n: int, x):
        x = np.asarray(x, dtype=float)
        g = self.gamma
        if self.kind == "relative":
            out = x ** (1.0 - g) / (1.0 - g) * self.d[n]
        else:
            interp = PchipInterpolator(np.log(self.x_grid), self.value[n])
            out = interp(np.log(x))
        return float(out) if out.ndim == 0 else out

    def policy_at(self, n: int, x):
        if self.kind == "relative":
            return float(self.beta[n]), float(self.zeta[n])
        xs = np.log(self.x_grid)
        lx = np.log(np.asarray(x, dtype=float))
        b = np.interp(lx, xs, self.beta[n])
        z = np.interp(lx, xs, self.zeta[n])
        return b, z


def default_wealth_grid(x_min: float = 0.05, x_max: float = 20.0,
                        n: int = 401) -> np.ndarray:
    return np.exp(np.linspace(np.log(x_min), np.log(x_max), n))


def _check_homogeneous(cfg: RiskConstraintConfig, params: MarketParams):
    if not cfg.bound.is_relative:
        raise ConfigError("bound is absolute; use solve_general")
    for zeta in (0.0, 0.4):
        iv1 = feasible_interval(0.0, 1.0, zeta, cfg, params, "discrete", scan=False)
        iv2 = feasible_interval(0.0, 2.0, zeta, cfg, params, "discrete", scan=False)
        if (iv1 is None) != (iv2 is None):
            raise ConfigError("feasible set depends on wealth; use solve_general")
        if iv1 is not None and max(abs(iv1[0] - iv2[0]), abs(iv1[1] - iv2[1])) > 1e-7:
            raise ConfigError("feasible set depends on wealth; use solve_general")


def solve_relative(params: MarketParams, utility: UtilityPower,
                   cfg: Optional[RiskConstraintConfig], N: int, delta: float,
                   quad: QuadratureSpec = None, consumption: bool = True,
                   beta_box=(0.0, 1.0)) -> DiscreteSolution:
    """Backward d-recursion for homogeneous configurations.

    cfg=None disables the risk constraint (full simplex), which reproduces
    the unconstrained baseline recursion. The iterated supremum is solved
    by golden-section in zeta (outer) and beta (inner, over the feasible
    interval at that zeta). Homogeneity is verified at runtime by probing
    the feasible set at two wealth levels.
    """
    g = utility.gamma
    if not 0.0 < g < 1.0:
        raise DomainError("the discrete recursion supports gamma in (0, 1)")
    if params.sigma == 0.0:
        raise DomainError("solver requires sigma > 0")
    if N < 1 or not delta > 0.0:
        raise DomainError("need N >= 1 periods of positive length")
    quad = quad or QuadratureSpec()
    if cfg is not None:
        _check_homogeneous(cfg, params)

    erg = float(np.exp(params.r * delta * (1.0 - g)))
    d = np.ones(N + 1)
    beta = np.zeros(N)
    zeta = np.zeros(N)

    def epr(b):
        return expected_power_return(b, g, delta, params, quad)

    for n in range(N - 1, -1, -1):
        t = n * delta

        def interval_at(z):
            if cfg is None:
                return beta_box
            return feasible_interval(t, 1.0, z, cfg, params, "discrete",
                                     box=beta_box, scan=False)

        def inner(z):
            iv = interval_at(z)
            if iv is None:
                return None, -np.inf
            b = golden_max_scalar(epr, iv[0], iv[1], tol=GOLDEN_TOL)
            return b, epr(b)

        if consumption:
            if cfg is None:
                zcap = 1.0
            else:
                zcap = feasible_consumption_cap(t, 1.0, cfg, params, "discrete",
                                                c_hi=1.0, box=beta_box)
                if zcap is None:
                    raise InfeasibleError("no feasible control", t=t, x=1.0)

            def outer(z):
                _, v = inner(z)
                if not np.isfinite(v):
                    return -np.inf
                return (z ** (1.0 - g)
                        + (1.0 - z) ** (1.0 - g) * erg * v * d[n + 1])

            z_star = golden_max_scalar(outer, 0.0, zcap, tol=GOLDEN_TOL)
        else:
            z_star = 0.0
        b_star, v_star = inner(z_star)
        if b_star is None:
            raise InfeasibleError("no feasible control", t=t, x=1.0)
        if cfg is not None:
            # defensive interval-structure scan once per period
            feasible_interval(t, 1.0, z_star, cfg, params, "discrete",
                              box=beta_box, scan=True)
        zeta[n] = z_star
        beta[n] = b_star
        d[n] = (z_star ** (1.0 - g)
                + (1.0 - z_star) ** (1.0 - g) * erg * v_star * d[n + 1])
    return DiscreteSolution(delta=delta, gamma=g, kind="relative", d=d,
                            beta=beta, zeta=zeta)


def solve_general(params: MarketParams, utility: UtilityPower,
                  cfg: Optional[RiskConstraintConfig], N: int, delta: float,
                  x_grid: np.ndarray = None, quad: QuadratureSpec = None,
                  consumption: bool = True) -> DiscreteSolution:
    """Optimality-equation recursion on a wealth grid.

    The continuation value is interpolated with a monotone cubic in
    log-wealth; outside the grid it is extrapolated with the local
    power-utility asymptote. A quadrature-mass check guards nodes whose
    one-period wealth would fall below the grid floor: nodes within a
    factor 4 of the floor are exempt (they legitimately lean on the
    asymptote), any others trip a GridDomainError advising a wider grid.
    """
    g = utility.gamma
    if not 0.0 < g < 1.0:
        raise DomainError("the discrete recursion supports gamma in (0, 1)")
    if params.sigma == 0.0:
        raise DomainError("solver requires sigma > 0")
    if N < 1 or not delta > 0.0:
        raise DomainError("need N >= 1 periods of positive length")
    quad = quad or QuadratureSpec()
    if x_grid is None:
        x_grid = default_wealth_grid()
    x_grid = np.asarray(x_grid, dtype=float)
    nx = x_grid.size
    log_x = np.log(x_grid)

    xh, wh = quad.nodes()
    m = (params.mu - params.r - 0.5 * params.sigma ** 2) * delta
    s = params.sigma * np.sqrt(delta)
    u = np.exp(m + s * np.sqrt(2.0) * xh)
    log_u = np.log(u)
    erd = float(np.exp(params.r * delta))

    value = np.empty((N + 1, nx))
    value[N] = utility.u(x_grid)
    beta = np.empty((N, nx))
    zeta = np.empty((N, nx))

    one_minus_g = 1.0 - g
    for n in range(N - 1, -1, -1):
        t = n * delta
        v_next = value[n + 1]
        interp = PchipInterpolator(log_x, v_next)
        d_lo = v_next[0] * one_minus_g / x_grid[0] ** one_minus_g
        d_hi = v_next[-1] * one_minus_g / x_grid[-1] ** one_minus_g

        def continuation(z, b):
            # next wealth is e^{r delta} (1-z) x (1 + b R); in logs that is
            # an outer sum of the node part and the quadrature part
            w = np.log(erd * np.maximum(1.0 - z, 1e-300) * x_grid)
            pts = w[:, None] + np.log1p(b[:, None] * (u - 1.0))
            vals = np.empty_like(pts)
            below = pts < log_x[0]
            above = pts > log_x[-1]
            inside = ~(below | above)
            vals[inside] = interp(pts[inside])
            if np.any(below):
                vals[below] = np.exp(pts[below] * one_minus_g) / one_minus_g * d_lo
            if np.any(above):
                vals[above] = np.exp(pts[above] * one_minus_g) / one_minus_g * d_hi
            return vals @ wh, below

        def objective(z, b):
            ev, _ = continuation(z, b)
            if consumption:
                return utility.u(z * x_grid) + ev
            return ev

        def inner_beta(z):
            if cfg is None:
                blo = np.zeros(nx)
                bhi = np.ones(nx)
            else:
                blo, bhi = feasible_interval(t, x_grid, z, cfg, params,
                                             "discrete", scan=False)
                if np.any(np.isnan(blo)):
                    j = int(np.argmax(np.isnan(blo)))
                    raise InfeasibleError("no feasible control", t=t,
                                          x=float(x_grid[j]))
            return golden_max_arrays(lambda b: objective(z, b), blo, bhi,
                                     tol=GOLDEN_TOL)

        if consumption:
            if cfg is None:
                zcap = np.ones(nx)
            else:
                zcap = feasible_consumption_cap(t, x_grid, cfg, params,
                                                "discrete", c_hi=1.0)
                if np.any(np.isnan(zcap)):
                    j = int(np.argmax(np.isnan(zcap)))
                    raise InfeasibleError("no feasible control", t=t,
                                          x=float(x_grid[j]))

            def outer(z):
                _, val = inner_beta(z)
                return val

            z_star, _ = golden_max_arrays(outer, np.zeros(nx), zcap,
                                          tol=GOLDEN_TOL)
        else:
            z_star = np.zeros(nx)
        b_star, val = inner_beta(z_star)

        _, below = continuation(z_star, b_star)
        mass = below @ wh
        risky = (x_grid >= 4.0 * x_grid[0]) & (mass > 1e-8)
        if np.any(risky):
            j = int(np.argmax(risky))
            raise GridDomainError(
                f"quadrature mass {mass[j]:.2e} below the wealth-grid floor "
                f"at x={x_grid[j]:.4g}, t={t:.4g}; widen the grid")

        value[n] = val
        beta[n] = b_star
        zeta[n] = z_star
    return DiscreteSolution(delta=delta, gamma=g, kind="general", value=value,
                            x_grid=x_grid, beta=beta, zeta=zeta)
