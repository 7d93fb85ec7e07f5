"""Continuous-time constrained solver.

Two routes solve the dynamic-programming PDE

    V_t + sup_{(pi, c) feasible} { U1(c x) + x (pi (mu-r) + r - c) V_x
                                   + x^2 pi^2 sigma^2 V_xx / 2 } = 0,
    V(T, x) = U2(x).

Homogeneous configurations (benchmark and bound scaling linearly in
wealth) separate as V(t, x) = x^(1-gamma)/(1-gamma) h(t); the supremum is
then wealth-independent and h follows a one-dimensional backward ODE,
integrated with classical fourth-order Runge-Kutta. General
configurations (absolute bounds) run policy improvement on a uniform
log-wealth grid: implicit-Euler evaluation of the linear PDE with the
policy frozen, then a pointwise constrained Hamiltonian maximization,
iterated until the policy stops moving. Wealth boundaries carry the
separable asymptote with the bound homogenized at the boundary level.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_banded

from .errors import ConfigError, DomainError, InfeasibleError, NumericsError
from .market_model import MarketParams, UtilityPower
from .optimize import golden_max_arrays, golden_max_scalar
from .risk import (PI_MAX, Benchmark, RiskBound, RiskConstraintConfig,
                   feasible_consumption_cap, feasible_interval)

__all__ = ["GridSpec", "ContinuousSolution", "solve_relative", "solve_general",
           "hamiltonian_argmax", "hjb_residual", "C_MAX"]

# Consumption-rate search box (1/year); the unconstrained optimal rate at
# the baseline stays below 1.1, so this is nonbinding.
C_MAX = 10.0

GOLDEN_TOL = 1e-8


@dataclass(frozen=True)
class GridSpec:
    """Uniform log-wealth grid over [x_min, x_max] and a time-step count."""

    t_steps: int = 240
    x_min: float = 0.1
    x_max: float = 10.0
    x_steps: int = 201

    def __post_init__(self):
        if not 0.0 < self.x_min < self.x_max:
            raise ConfigError("need 0 < x_min < x_max")
        if self.t_steps < 2 or self.x_steps < 2:
            raise ConfigError("need at least 2 steps in each direction")

    def x_grid(self) -> np.ndarray:
        return np.exp(np.linspace(np.log(self.x_min), np.log(self.x_max),
                                  self.x_steps))


@dataclass
class ContinuousSolution:
    """Value surface and policy on a time-wealth grid.

    For homogeneous runs h carries the separable coefficient (value and
    policy surfaces are materialized over x for uniform downstream use,
    with the policy constant across wealth).
    """

    t: np.ndarray
    x: np.ndarray
    value: np.ndarray
    pi: np.ndarray
    c: np.ndarray
    gamma: float
    iterations: int
    kind: str
    residual: Optional[float] = None
    h: Optional[np.ndarray] = None
    consumption: bool = True
    pi_box: tuple = (-PI_MAX, PI_MAX)
    frozen_shares: bool = False

    def _time_slot(self, t):
        k = np.searchsorted(self.t, t) - 1
        k = int(np.clip(k, 0, len(self.t) - 2))
        w = (t - self.t[k]) / (self.t[k + 1] - self.t[k])
        return k, float(np.clip(w, 0.0, 1.0))

    def _interp(self, surface, t, x):
        k, w = self._time_slot(t)
        lx = np.log(np.asarray(x, dtype=float))
        row = (1.0 - w) * surface[k] + w * surface[k + 1]
        out = np.interp(lx, np.log(self.x), row)
        return float(out) if out.ndim == 0 else out

    def value_at(self, t, x):
        if self.kind == "relative":
            k, w = self._time_slot(t)
            h = (1.0 - w) * self.h[k] + w * self.h[k + 1]
            x = np.asarray(x, dtype=float)
            out = x ** (1.0 - self.gamma) / (1.0 - self.gamma) * h
            return float(out) if out.ndim == 0 else out
        return self._interp(self.value, t, x)

    def policy_at(self, t, x):
        return self._interp(self.pi, t, x), self._interp(self.c, t, x)


def _reduced_supremum(t, h, cfg, params, utility, consumption, pi_box,
                      frozen_shares, c_max):
    """sup over the feasible set of the separable Hamiltonian plus the
    optimal controls at the top; used stage-wise by the RK4 integrator."""
    g = utility.gamma
    r, mu, sig = params.r, params.mu, params.sigma
    pi_unc = (mu - r) / (g * sig ** 2)

    def interval(c):
        if cfg is None:
            return pi_box
        return feasible_interval(t, 1.0, c, cfg, params, "continuous",
                                 box=pi_box, frozen_shares=frozen_shares,
                                 scan=False)

    def value_and_pi(c):
        iv = interval(c)
        if iv is None:
            return -np.inf, None
        p = min(max(pi_unc, iv[0]), iv[1])
        drift = r + p * (mu - r) - c - 0.5 * g * p * p * sig * sig
        val = h * drift
        if consumption:
            val += c ** (1.0 - g) / (1.0 - g) if c > 0.0 else (
                0.0 if g < 1.0 else -np.inf)
        return val, p

    if not consumption:
        val, p = value_and_pi(0.0)
        if p is None:
            raise InfeasibleError("no feasible control", t=t, x=1.0)
        return val, p, 0.0

    if cfg is None:
        cap = c_max
    else:
        cap = feasible_consumption_cap(t, 1.0, cfg, params, "continuous",
                                       c_hi=c_max, box=pi_box,
                                       frozen_shares=frozen_shares)
        if cap is None:
            raise InfeasibleError("no feasible control", t=t, x=1.0)
    c_star = golden_max_scalar(lambda c: value_and_pi(c)[0], 0.0, cap,
                               tol=GOLDEN_TOL)
    val, p = value_and_pi(c_star)
    if p is None:
        raise InfeasibleError("no feasible control", t=t, x=1.0)
    return val, p, c_star


def solve_relative(params: MarketParams, utility: UtilityPower,
                   cfg: Optional[RiskConstraintConfig], T: float,
                   t_steps: int = 240, x_grid: np.ndarray = None,
                   consumption: bool = True, pi_box=(-PI_MAX, PI_MAX),
                   frozen_shares: bool = False,
                   c_max: float = C_MAX) -> ContinuousSolution:
    """Reduced solver for homogeneous configurations.

    Substituting V = x^(1-gamma)/(1-gamma) h(t) turns the PDE into
    h'(t) = -(1-gamma) sup{ c^(1-gamma)/(1-gamma)
                            + h (r + pi (mu-r) - c - gamma pi^2 sigma^2/2) }
    with h(T) = 1, integrated backward with classical RK4. The feasible
    set is wealth-independent, checked by probing two wealth levels.
    cfg=None disables the constraint.
    """
    if params.sigma == 0.0:
        raise DomainError("solver requires sigma > 0")
    if not T > 0.0 or t_steps < 2:
        raise DomainError("need T > 0 and at least 2 time steps")
    g = utility.gamma
    if cfg is not None:
        if cfg.benchmark.kind not in ("fraction", "merton"):
            raise ConfigError("benchmark is not homogeneous; use solve_general")
        if not cfg.bound.is_relative:
            raise ConfigError("bound is absolute; use solve_general")
        for c_probe in (0.0,):
            iv1 = feasible_interval(0.0, 1.0, c_probe, cfg, params, "continuous",
                                    box=pi_box, frozen_shares=frozen_shares,
                                    scan=False)
            iv2 = feasible_interval(0.0, 2.0, c_probe, cfg, params, "continuous",
                                    box=pi_box, frozen_shares=frozen_shares,
                                    scan=False)
            if (iv1 is None) != (iv2 is None) or (
                    iv1 is not None
                    and max(abs(iv1[0] - iv2[0]), abs(iv1[1] - iv2[1])) > 1e-7):
                raise ConfigError("feasible set depends on wealth; "
                                  "use solve_general")

    ts = np.linspace(0.0, T, t_steps + 1)
    dt = T / t_steps
    h = np.empty(t_steps + 1)
    h[-1] = 1.0

    def rhs(t, hv):
        val, _, _ = _reduced_supremum(t, hv, cfg, params, utility, consumption,
                                      pi_box, frozen_shares, c_max)
        return -(1.0 - g) * val

    for k in range(t_steps - 1, -1, -1):
        t1 = ts[k + 1]
        hv = h[k + 1]
        k1 = rhs(t1, hv)
        k2 = rhs(t1 - 0.5 * dt, hv - 0.5 * dt * k1)
        k3 = rhs(t1 - 0.5 * dt, hv - 0.5 * dt * k2)
        k4 = rhs(t1 - dt, hv - dt * k3)
        h[k] = hv - dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not h[k] > 0.0:
            raise NumericsError(f"value coefficient lost positivity at t={ts[k]}")

    pis = np.empty(t_steps + 1)
    cs = np.empty(t_steps + 1)
    for k, t in enumerate(ts):
        _, pis[k], cs[k] = _reduced_supremum(t, h[k], cfg, params, utility,
                                             consumption, pi_box,
                                             frozen_shares, c_max)
        if cfg is not None:
            feasible_interval(t, 1.0, cs[k], cfg, params, "continuous",
                              box=pi_box, frozen_shares=frozen_shares, scan=True)

    if x_grid is None:
        x_grid = GridSpec().x_grid()
    x_grid = np.asarray(x_grid, dtype=float)
    value = np.outer(h, x_grid ** (1.0 - g) / (1.0 - g))
    return ContinuousSolution(
        t=ts, x=x_grid, value=value, pi=np.tile(pis[:, None], (1, x_grid.size)),
        c=np.tile(cs[:, None], (1, x_grid.size)), gamma=g, iterations=1,
        kind="relative", h=h, consumption=consumption, pi_box=tuple(pi_box),
        frozen_shares=frozen_shares)


def hamiltonian_argmax(t, x, V_x, V_xx, cfg: Optional[RiskConstraintConfig],
                       params: MarketParams, utility: UtilityPower,
                       consumption: bool = True, pi_box=(-PI_MAX, PI_MAX),
                       frozen_shares: bool = False, c_max: float = C_MAX,
                       scan: bool = False):
    """Pointwise constrained maximizer of the Hamiltonian.

    Outer golden-section over the consumption rate on [0, feasible cap];
    for each rate the analytic unconstrained proportion
    pi* = -(mu - r) V_x / (x sigma^2 V_xx) is clipped to the feasible
    exposure interval. Nonconcave V_xx values are clamped to a small
    negative multiple of V_x / x so the maximizer stays finite. Accepts
    scalars or arrays for (x, V_x, V_xx); returns (pi, c).
    """
    r, mu, sig = params.r, params.mu, params.sigma
    x_in = np.asarray(x, dtype=float)
    scalar = x_in.ndim == 0
    x_arr = np.atleast_1d(x_in).astype(float)
    n = x_arr.size
    V_x = np.broadcast_to(np.asarray(V_x, dtype=float), (n,)).copy()
    V_xx = np.broadcast_to(np.asarray(V_xx, dtype=float), (n,)).copy()
    V_x = np.maximum(V_x, 1e-300)
    bad = V_xx >= 0.0
    V_xx[bad] = -1e-12 * V_x[bad] / x_arr[bad]
    pi_unc = -(mu - r) * V_x / (x_arr * sig ** 2 * V_xx)

    def controls_and_value(c):
        if cfg is None:
            lo = np.full(n, pi_box[0])
            hi = np.full(n, pi_box[1])
        else:
            lo, hi = feasible_interval(t, x_arr, c, cfg, params, "continuous",
                                       box=pi_box, frozen_shares=frozen_shares,
                                       scan=False)
        p = np.clip(pi_unc, lo, hi)
        ham = (x_arr * (p * (mu - r) + r - c) * V_x
               + 0.5 * x_arr ** 2 * p ** 2 * sig ** 2 * V_xx)
        if consumption:
            ham = ham + utility.u(c * x_arr)
        ham = np.where(np.isnan(lo), -np.inf, ham)
        return p, ham

    if consumption:
        if cfg is None:
            cap = np.full(n, c_max)
        else:
            cap = feasible_consumption_cap(t, x_arr, cfg, params, "continuous",
                                           c_hi=c_max, box=pi_box,
                                           frozen_shares=frozen_shares)
            if np.any(np.isnan(cap)):
                j = int(np.argmax(np.isnan(cap)))
                raise InfeasibleError("no feasible control", t=t,
                                      x=float(x_arr[j]))
        c_star, _ = golden_max_arrays(lambda c: controls_and_value(c)[1],
                                      np.zeros(n), cap, tol=GOLDEN_TOL)
    else:
        c_star = np.zeros(n)
    p_star, ham = controls_and_value(c_star)
    if np.any(~np.isfinite(ham)):
        j = int(np.argmax(~np.isfinite(ham)))
        raise InfeasibleError("no feasible control", t=t, x=float(x_arr[j]))
    if scan and cfg is not None:
        feasible_interval(t, x_arr, c_star, cfg, params, "continuous",
                          box=pi_box, frozen_shares=frozen_shares, scan=True)
    if scalar:
        return float(p_star[0]), float(c_star[0])
    return p_star, c_star


def _upwind_argmax(t, x_arr, W, dxi, cfg, params, utility, consumption,
                   pi_box, frozen_shares, c_max):
    """Maximizer of the upwinded discrete Hamiltonian at the interior nodes
    of one time slice.

    The evaluation scheme applies the convection a(pi, c) one-sidedly in
    the direction of its sign, so the improvement step must maximize that
    same discrete operator for policy iteration to be monotone. With
    forward/backward differences D+ and D- the operator splits into two
    branches, each of the analytic Hamiltonian form with one-sided
    derivative surrogates, valid on {a >= 0} and {a <= 0} respectively;
    a is concave quadratic in pi, so the regions are intervals and each
    branch maximum is an analytic clip.
    """
    r, mu, sig = params.r, params.mu, params.sigma
    x = x_arr[1:-1]
    n = x.size
    D1p = (W[2:] - W[1:-1]) / dxi
    D1m = (W[1:-1] - W[:-2]) / dxi
    D2 = (W[2:] - 2.0 * W[1:-1] + W[:-2]) / dxi ** 2

    def surrogates(D1):
        V_x = np.maximum(D1 / x, 1e-300)
        V_xx = (D2 - D1) / x ** 2
        bad = V_xx >= 0.0
        V_xx = np.where(bad, -1e-12 * V_x / x, V_xx)
        return V_x, V_xx

    Vx_p, Vxx_p = surrogates(D1p)
    Vx_m, Vxx_m = surrogates(D1m)
    pi_star_p = -(mu - r) * Vx_p / (x * sig ** 2 * Vxx_p)
    pi_star_m = -(mu - r) * Vx_m / (x * sig ** 2 * Vxx_m)

    def ham(p, c, V_x, V_xx, valid):
        val = (x * (p * (mu - r) + r - c) * V_x
               + 0.5 * x ** 2 * p ** 2 * sig ** 2 * V_xx)
        if consumption:
            val = val + utility.u(c * x)
        return np.where(valid, val, -np.inf)

    def best(c):
        if cfg is None:
            lo = np.full(n, pi_box[0])
            hi = np.full(n, pi_box[1])
        else:
            lo, hi = feasible_interval(t, x, c, cfg, params, "continuous",
                                       box=pi_box, frozen_shares=frozen_shares,
                                       scan=False)
        empty = np.isnan(lo)
        lo = np.where(empty, 0.0, lo)
        hi = np.where(empty, 0.0, hi)
        # a(pi, c) = -sig^2 pi^2 / 2 + (mu - r) pi + (r - c)
        disc = (mu - r) ** 2 + 2.0 * sig ** 2 * (r - c)
        has_plus = disc > 0.0
        root = np.sqrt(np.maximum(disc, 0.0)) / sig ** 2
        pa_lo = (mu - r) / sig ** 2 - root
        pa_hi = (mu - r) / sig ** 2 + root

        # branch a >= 0 on [pa_lo, pa_hi]
        s_lo = np.maximum(lo, pa_lo)
        s_hi = np.minimum(hi, pa_hi)
        ok_p = has_plus & (s_lo <= s_hi) & ~empty
        p1 = np.clip(pi_star_p, s_lo, s_hi)
        h1 = ham(p1, c, Vx_p, Vxx_p, ok_p)
        # branch a <= 0 on the complement segments
        l_hi = np.where(has_plus, np.minimum(hi, pa_lo), hi)
        ok_l = (lo <= l_hi) & ~empty
        p2 = np.clip(pi_star_m, lo, l_hi)
        h2 = ham(p2, c, Vx_m, Vxx_m, ok_l)
        r_lo = np.where(has_plus, np.maximum(lo, pa_hi), lo)
        ok_r = (r_lo <= hi) & ~empty & has_plus
        p3 = np.clip(pi_star_m, r_lo, hi)
        h3 = ham(p3, c, Vx_m, Vxx_m, ok_r)

        hs = np.stack([h1, h2, h3])
        ps = np.stack([p1, p2, p3])
        pick = np.argmax(hs, axis=0)
        cols = np.arange(n)
        return ps[pick, cols], hs[pick, cols]

    if consumption:
        if cfg is None:
            cap = np.full(n, c_max)
        else:
            cap = feasible_consumption_cap(t, x, cfg, params, "continuous",
                                           c_hi=c_max, box=pi_box,
                                           frozen_shares=frozen_shares)
            if np.any(np.isnan(cap)):
                j = int(np.argmax(np.isnan(cap)))
                raise InfeasibleError("no feasible control", t=t, x=float(x[j]))
        c_star, _ = golden_max_arrays(lambda c: best(c)[1], np.zeros(n), cap,
                                      tol=GOLDEN_TOL)
    else:
        c_star = np.zeros(n)
    p_star, h_star = best(c_star)
    if np.any(~np.isfinite(h_star)):
        j = int(np.argmax(~np.isfinite(h_star)))
        raise InfeasibleError("no feasible control", t=t, x=float(x[j]))
    return p_star, c_star


def _boundary_cfg(cfg: RiskConstraintConfig, x_b: float) -> RiskConstraintConfig:
    """Homogenize bound (and a constant benchmark) at the boundary wealth."""
    bound = cfg.bound if cfg.bound.is_relative else RiskBound.relative(
        cfg.bound.level / x_b)
    bench = cfg.benchmark
    if bench.kind == "constant":
        bench = Benchmark.fraction(max(bench.level, 1e-300) / x_b)
    elif bench.kind == "table":
        raise ConfigError("table benchmarks are not supported by the general "
                          "solver boundary asymptote")
    return RiskConstraintConfig(kind=cfg.kind, benchmark=bench, bound=bound,
                                delta=cfg.delta)


def _fd_derivatives(W, x_arr, dxi):
    """Interior V_x, V_xx from central log-wealth differences."""
    W_xi = (W[2:] - W[:-2]) / (2.0 * dxi)
    W_xixi = (W[2:] - 2.0 * W[1:-1] + W[:-2]) / dxi ** 2
    xi_int = x_arr[1:-1]
    V_x = W_xi / xi_int
    V_xx = (W_xixi - W_xi) / xi_int ** 2
    return V_x, V_xx


def solve_general(params: MarketParams, utility: UtilityPower,
                  cfg: Optional[RiskConstraintConfig], T: float,
                  grid: GridSpec = None, consumption: bool = True,
                  pi_box=(-PI_MAX, PI_MAX), frozen_shares: bool = False,
                  c_max: float = C_MAX, max_iters: int = 50,
                  policy_tol: float = 1e-6,
                  compute_residual: bool = True) -> ContinuousSolution:
    """Policy improvement on the full time-wealth grid.

    Starts from the unconstrained-optimal policy projected into the
    feasible set, alternates implicit-Euler policy evaluation (central
    differences in log-wealth, upwinded where convection dominates the
    cell) with pointwise Hamiltonian maximization, and stops when the
    sup-norm policy change drops below policy_tol. Wealth boundaries are
    Dirichlet values from the reduced solver of the same configuration
    with the bound homogenized at the boundary wealth. A decrease of the
    value between improvement sweeps beyond 1e-8 raises NumericsError.
    """
    if params.sigma == 0.0:
        raise DomainError("solver requires sigma > 0")
    grid = grid or GridSpec()
    g = utility.gamma
    r, mu, sig = params.r, params.mu, params.sigma
    x_arr = grid.x_grid()
    nx = x_arr.size
    nt = grid.t_steps
    ts = np.linspace(0.0, T, nt + 1)
    dt = T / nt
    dxi = math.log(grid.x_max / grid.x_min) / (grid.x_steps - 1)

    common = dict(consumption=consumption, pi_box=pi_box,
                  frozen_shares=frozen_shares, c_max=c_max)
    lo_rel = solve_relative(params, utility,
                            None if cfg is None else _boundary_cfg(cfg, grid.x_min),
                            T, nt, x_grid=x_arr[:1], **common)
    hi_rel = solve_relative(params, utility,
                            None if cfg is None else _boundary_cfg(cfg, grid.x_max),
                            T, nt, x_grid=x_arr[-1:], **common)
    v_lo = grid.x_min ** (1.0 - g) / (1.0 - g) * lo_rel.h
    v_hi = grid.x_max ** (1.0 - g) / (1.0 - g) * hi_rel.h

    # initial policy: unconstrained optimum projected into the feasible set
    unc = solve_relative(params, utility, None, T, nt, x_grid=x_arr[:1],
                         **common)
    pi_unc = (mu - r) / (g * sig ** 2)
    pi_pol = np.empty((nt + 1, nx))
    c_pol = np.empty((nt + 1, nx))
    for k, t in enumerate(ts):
        c_merton = float(unc.c[k, 0])
        if cfg is None:
            proj_c = np.full(nx, c_merton)
            lo, hi = np.full(nx, pi_box[0]), np.full(nx, pi_box[1])
        else:
            cap = feasible_consumption_cap(t, x_arr, cfg, params, "continuous",
                                           c_hi=c_max, box=pi_box,
                                           frozen_shares=frozen_shares)
            if np.any(np.isnan(cap)):
                j = int(np.argmax(np.isnan(cap)))
                raise InfeasibleError("no feasible control", t=t,
                                      x=float(x_arr[j]))
            proj_c = np.minimum(cap, c_merton) if consumption else np.zeros(nx)
            lo, hi = feasible_interval(t, x_arr, proj_c, cfg, params,
                                       "continuous", box=pi_box,
                                       frozen_shares=frozen_shares, scan=False)
        c_pol[k] = proj_c if consumption else 0.0
        pi_pol[k] = np.clip(pi_unc, lo, hi)
    pi_pol[:, 0], c_pol[:, 0] = lo_rel.pi[:, 0], lo_rel.c[:, 0]
    pi_pol[:, -1], c_pol[:, -1] = hi_rel.pi[:, 0], hi_rel.c[:, 0]

    def evaluate(pi_pol, c_pol):
        V = np.empty((nt + 1, nx))
        V[nt] = utility.u(x_arr)
        V[:, 0] = v_lo
        V[:, -1] = v_hi
        for k in range(nt - 1, -1, -1):
            p = pi_pol[k, 1:-1]
            c = c_pol[k, 1:-1]
            a = p * (mu - r) + r - c - 0.5 * p ** 2 * sig ** 2
            b = 0.5 * p ** 2 * sig ** 2
            # convection fully upwinded: the matrix stays an M-matrix at
            # every node, which together with the scheme-consistent
            # improvement makes the policy iteration monotone
            lower = b / dxi ** 2 + np.maximum(-a, 0.0) / dxi
            upper = b / dxi ** 2 + np.maximum(a, 0.0) / dxi
            diag = -(lower + upper)
            rhs = V[k + 1, 1:-1].copy()
            if consumption:
                rhs += dt * utility.u(c * x_arr[1:-1])
            rhs[0] += dt * lower[0] * V[k, 0]
            rhs[-1] += dt * upper[-1] * V[k, -1]
            ab = np.zeros((3, nx - 2))
            ab[0, 1:] = -dt * upper[:-1]
            ab[1] = 1.0 - dt * diag
            ab[2, :-1] = -dt * lower[1:]
            V[k, 1:-1] = solve_banded((1, 1), ab, rhs)
        return V

    V = evaluate(pi_pol, c_pol)
    iterations = 0
    for sweep in range(max_iters):
        iterations = sweep + 1
        new_pi = pi_pol.copy()
        new_c = c_pol.copy()
        for k in range(nt + 1):
            new_pi[k, 1:-1], new_c[k, 1:-1] = _upwind_argmax(
                ts[k], x_arr, V[k], dxi, cfg, params, utility, **common)
        change = max(float(np.max(np.abs(new_pi - pi_pol))),
                     float(np.max(np.abs(new_c - c_pol))))
        pi_pol, c_pol = new_pi, new_c
        V_new = evaluate(pi_pol, c_pol)
        drop = float(np.max(V - V_new))
        if drop > 1e-8:
            raise NumericsError(
                f"policy improvement decreased the value by {drop:.3e}")
        V = V_new
        if change < policy_tol:
            break

    sol = ContinuousSolution(t=ts, x=x_arr, value=V, pi=pi_pol, c=c_pol,
                             gamma=g, iterations=iterations, kind="general",
                             consumption=consumption, pi_box=tuple(pi_box),
                             frozen_shares=frozen_shares)
    if compute_residual:
        sol.residual = hjb_residual(sol, cfg, params, utility)
    return sol


def hjb_residual(solution: ContinuousSolution, cfg, params: MarketParams,
                 utility: UtilityPower) -> float:
    """Max absolute PDE residual over interior grid nodes.

    Time and wealth derivatives come from central differences on the
    stored surface; the supremum is re-solved pointwise, so the number
    measures how well the computed surface satisfies the dynamic-
    programming equation rather than how well it matches the scheme.
    """
    ts, x_arr = solution.t, solution.x
    V = solution.value
    dxi = math.log(x_arr[-1] / x_arr[0]) / (x_arr.size - 1)
    r, mu, sig = params.r, params.mu, params.sigma
    worst = 0.0
    for k in range(1, len(ts) - 1):
        V_t = (V[k + 1] - V[k - 1]) / (ts[k + 1] - ts[k - 1])
        V_x, V_xx = _fd_derivatives(V[k], x_arr, dxi)
        p, c = hamiltonian_argmax(ts[k], x_arr[1:-1], V_x, V_xx, cfg, params,
                                  utility, consumption=solution.consumption,
                                  pi_box=solution.pi_box,
                                  frozen_shares=solution.frozen_shares)
        ham = (x_arr[1:-1] * (p * (mu - r) + r - c) * V_x
               + 0.5 * x_arr[1:-1] ** 2 * p ** 2 * sig ** 2 * V_xx)
        if solution.consumption:
            ham = ham + utility.u(c * x_arr[1:-1])
        worst = max(worst, float(np.max(np.abs(V_t[1:-1] + ham))))
    return worst
