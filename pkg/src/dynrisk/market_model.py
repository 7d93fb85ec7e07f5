"""Black-Scholes market primitives: parameters, exact wealth dynamics,
one-period conditional wealth laws, and seeded Monte Carlo path simulation.

Wealth controlled by a proportion-in-stock pi and a consumption rate c
follows a geometric dynamic whose one-step solution is exact for controls
frozen over the step:

    X' = x * exp{(r + pi (mu - r) - c - pi^2 sigma^2 / 2) dt + pi sigma dW}.

All simulation here uses that exact lognormal step, so validation runs
carry no time-discretization bias.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError

__all__ = [
    "MarketParams",
    "UtilityPower",
    "LogNormalLaw",
    "PathEnsemble",
    "conditional_wealth_law",
    "wealth_step_exact",
    "discrete_return_law",
    "simulate_paths",
]


@dataclass(frozen=True)
class MarketParams:
    """Single risky asset market: risk-free rate, drift, volatility (1/year).

    sigma = 0 is tolerated so that degenerate point-mass laws can be
    built for analytic limit tests; the solvers themselves reject it.
    """

    r: float
    mu: float
    sigma: float

    def __post_init__(self):
        if not (np.isfinite(self.r) and np.isfinite(self.mu) and np.isfinite(self.sigma)):
            raise DomainError("market parameters must be finite")
        if self.r < 0.0:
            raise DomainError("risk-free rate r must be nonnegative")
        if self.sigma < 0.0:
            raise DomainError("volatility sigma must be nonnegative")


@dataclass(frozen=True)
class UtilityPower:
    """Power utility x^(1-gamma) / (1-gamma) with relative risk aversion gamma.

    gamma in (0, 1) gives positive utilities, gamma > 1 negative ones;
    gamma = 1 (log) is out of scope.
    """

    gamma: float

    def __post_init__(self):
        if not (self.gamma > 0.0) or self.gamma == 1.0:
            raise DomainError("gamma must be positive and different from 1")

    def u(self, x):
        g = self.gamma
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            out = np.where(x > 0.0, x ** (1.0 - g) / (1.0 - g),
                           0.0 if g < 1.0 else -np.inf)
        return float(out) if out.ndim == 0 else out

    def u_prime(self, x):
        return np.asarray(x, dtype=float) ** (-self.gamma)


@dataclass(frozen=True)
class LogNormalLaw:
    """Law of e^Z with Z ~ N(m, s2); a point mass at e^m when s2 = 0."""

    m: float
    s2: float

    def __post_init__(self):
        if self.s2 < 0.0:
            raise DomainError("variance s2 must be nonnegative")

    @property
    def s(self) -> float:
        return float(np.sqrt(self.s2))

    def mean(self) -> float:
        return float(np.exp(self.m + 0.5 * self.s2))

    def variance(self) -> float:
        em = np.exp(self.s2)
        return float((em - 1.0) * np.exp(2.0 * self.m + self.s2))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.s2 == 0.0:
            return np.full(n, np.exp(self.m))
        return np.exp(self.m + self.s * rng.standard_normal(n))


@dataclass
class PathEnsemble:
    """Simulated wealth paths with the controls applied on each step.

    times has length n_steps + 1; wealth is (n_paths, n_steps + 1);
    pi and c are (n_paths, n_steps), the controls frozen over step k.
    """

    times: np.ndarray
    wealth: np.ndarray
    pi: np.ndarray
    c: np.ndarray
    seed: int

    @property
    def n_paths(self) -> int:
        return self.wealth.shape[0]


def conditional_wealth_law(x, pi, c, dt, params: MarketParams) -> LogNormalLaw:
    """Law of wealth after holding (pi, c) frozen for dt years from level x.

    Returns the lognormal with m = ln x + (r + pi (mu-r) - c - pi^2 s^2/2) dt
    and s2 = pi^2 sigma^2 dt.
    """
    if not x > 0.0:
        raise DomainError(f"wealth must be positive, got {x}")
    if not dt > 0.0:
        raise DomainError(f"horizon must be positive, got {dt}")
    if c < 0.0:
        raise DomainError(f"consumption rate must be nonnegative, got {c}")
    r, mu, sig = params.r, params.mu, params.sigma
    m = np.log(x) + (r + pi * (mu - r) - c - 0.5 * pi ** 2 * sig ** 2) * dt
    return LogNormalLaw(m=float(m), s2=float(pi ** 2 * sig ** 2 * dt))


def wealth_step_exact(x, pi, c, dt, dW, params: MarketParams):
    """Advance wealth by dt under frozen controls and Brownian increment dW.

    Exact solution of the wealth dynamic; strictly positive. Accepts
    arrays for any argument (broadcasting).
    """
    if np.any(np.asarray(x) <= 0.0):
        raise DomainError("wealth must be positive")
    if not dt > 0.0:
        raise DomainError(f"step must be positive, got {dt}")
    r, mu, sig = params.r, params.mu, params.sigma
    drift = (r + pi * (mu - r) - c - 0.5 * pi ** 2 * sig ** 2) * dt
    return x * np.exp(drift + pi * sig * dW)


def discrete_return_law(params: MarketParams, dt: float) -> LogNormalLaw:
    """Law of the gross relative price change over one period of length dt.

    The gross change R~ is lognormal with m = (mu - sigma^2/2) dt and
    s2 = sigma^2 dt; the discounted net return is R = exp(-r dt) R~ - 1.
    """
    if not dt > 0.0:
        raise DomainError(f"period must be positive, got {dt}")
    return LogNormalLaw(m=(params.mu - 0.5 * params.sigma ** 2) * dt,
                        s2=params.sigma ** 2 * dt)


def _path_generators(seed: int, n_paths: int):
    """Independent per-path streams: path i draws from Philox(key=seed).jumped(i).

    Jumps advance the counter by 2^128, so streams never overlap and the
    ensemble is reproducible regardless of chunking or parallel order.
    """
    base = np.random.Philox(key=seed)
    return (np.random.Generator(base.jumped(i)) for i in range(n_paths))


def stream_paths(params: MarketParams, policy: Callable, t0: float, T: float,
                 dt_sim: float, n_paths: int, seed: int, chunk: int = 4096):
    """Yield (path_slice, times, wealth_chunk, pi_chunk, c_chunk) per chunk.

    Core stepping loop shared by simulate_paths and the Monte Carlo value
    checks; the latter consume chunks without materializing the full
    ensemble. policy(t, x_array) must return a (pi_array, c_array) pair.
    """
    if n_paths < 1:
        raise DomainError("n_paths must be at least 1")
    if not dt_sim > 0.0:
        raise DomainError("dt_sim must be positive")
    span = T - t0
    n_steps = int(round(span / dt_sim))
    if n_steps < 1 or abs(n_steps * dt_sim - span) > 1e-9 * max(1.0, abs(span)):
        raise DomainError(f"dt_sim={dt_sim} does not divide T - t0 = {span}")
    times = t0 + dt_sim * np.arange(n_steps + 1)

    gens = _path_generators(seed, n_paths)
    done = 0
    while done < n_paths:
        m = min(chunk, n_paths - done)
        normals = np.empty((m, n_steps))
        for i in range(m):
            normals[i] = next(gens).standard_normal(n_steps)
        wealth = np.empty((m, n_steps + 1))
        pis = np.empty((m, n_steps))
        cs = np.empty((m, n_steps))
        wealth[:, 0] = 1.0
        for k in range(n_steps):
            t = times[k]
            pi_k, c_k = policy(t, wealth[:, k])
            pi_k = np.broadcast_to(np.asarray(pi_k, dtype=float), (m,))
            c_k = np.broadcast_to(np.asarray(c_k, dtype=float), (m,))
            bad = ~(np.isfinite(pi_k) & np.isfinite(c_k))
            if np.any(bad):
                j = int(np.argmax(bad))
                raise DomainError(
                    f"policy returned nonfinite controls at t={t}, x={wealth[j, k]}")
            pis[:, k] = pi_k
            cs[:, k] = c_k
            dW = np.sqrt(dt_sim) * normals[:, k]
            wealth[:, k + 1] = wealth_step_exact(wealth[:, k], pi_k, c_k,
                                                 dt_sim, dW, params)
        assert np.all(wealth > 0.0)
        yield slice(done, done + m), times, wealth, pis, cs
        done += m


def simulate_paths(params: MarketParams, policy: Callable, t0: float, T: float,
                   dt_sim: float, n_paths: int, seed: int, x0: float = 1.0,
                   chunk: int = 4096) -> PathEnsemble:
    """Simulate wealth paths; the policy is applied at each step start and
    held for dt_sim, matching the frozen-strategy risk convention.

    Paths start at x0 and are bit-reproducible for a fixed seed. The
    policy is evaluated at the running wealth (scaled by x0), so any
    wealth-dependent rule sees actual monetary levels.
    """
    if not x0 > 0.0:
        raise DomainError("x0 must be positive")
    scaled = policy if x0 == 1.0 else (lambda t, x: policy(t, x0 * x))
    wealth = pis = cs = times = None
    for sl, times, w, p, c in stream_paths(params, scaled, t0, T, dt_sim,
                                           n_paths, seed, chunk):
        if wealth is None:
            n_steps = w.shape[1] - 1
            wealth = np.empty((n_paths, n_steps + 1))
            pis = np.empty((n_paths, n_steps))
            cs = np.empty((n_paths, n_steps))
        wealth[sl], pis[sl], cs[sl] = w, p, c
    wealth *= x0
    return PathEnsemble(times=times, wealth=wealth, pi=pis, c=cs, seed=seed)
