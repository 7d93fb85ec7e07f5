"""Unconstrained baselines for power utility.

Continuous time has a closed form: a constant proportion in the stock and
a deterministic consumption rate driven by a single rate parameter tau.
Discrete time has no closed form; the per-period optimal proportion and
the value coefficients come from a backward recursion with the feasible
set replaced by the full simplex [0, 1].
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError
from .market_model import MarketParams, UtilityPower
from .mdp_solver import QuadratureSpec, expected_power_return, _golden_max_scalar
from .risk import ContinuousMertonRef, DiscreteMertonRef

__all__ = ["MertonContinuous", "MertonDiscrete", "merton_continuous",
           "merton_discrete"]


@dataclass(frozen=True)
class MertonContinuous:
    """Closed-form unconstrained policy: constant proportion pi_m and
    consumption rate c_m(t) = (tau^-1 + (1 - tau^-1) e^{-tau (T-t)})^-1.

    v_m(t) = c_m(t)^(-gamma) is the separable value coefficient, so that
    V(t, x) = x^(1-gamma) / (1-gamma) * v_m(t); it is cross-checked against
    the solvers rather than trusted as the level normalization.
    """

    pi_m: float
    tau: float
    T: float
    gamma: float

    def c_m(self, t):
        dt = self.T - np.asarray(t, dtype=float)
        if abs(self.tau) < 1e-12:
            out = 1.0 / (1.0 + dt)  # tau -> 0 limit of the printed formula
        else:
            inv = 1.0 / self.tau
            out = 1.0 / (inv + (1.0 - inv) * np.exp(-self.tau * dt))
        return float(out) if out.ndim == 0 else out

    def v_m(self, t):
        return self.c_m(t) ** (-self.gamma)

    def benchmark_ref(self, delta: float, params: MarketParams) -> ContinuousMertonRef:
        """Reference for the conditional-expected-wealth benchmark."""
        return ContinuousMertonRef(pi=self.pi_m, c_of_t=self.c_m, delta=delta,
                                   params=params)


def merton_continuous(params: MarketParams, utility: UtilityPower,
                      T: float) -> MertonContinuous:
    """Closed-form continuous-time unconstrained policy.

    pi_m = (mu - r) / (gamma sigma^2) and
    tau = -(1 - gamma) ((mu - r)^2 / (2 gamma sigma^2) + r) / gamma; tau is
    negative at the baseline parameters, which is fine: c_m(T) = 1 holds for
    any tau and the value checks below guard the printed form.
    """
    if params.sigma == 0.0:
        raise DomainError("merton_continuous requires sigma > 0")
    if not T > 0.0:
        raise DomainError("horizon T must be positive")
    g = utility.gamma
    r, mu, sig = params.r, params.mu, params.sigma
    pi_m = (mu - r) / (g * sig ** 2)
    tau = (-(1.0 - g) * ((mu - r) ** 2 / (2.0 * g * sig ** 2) + r)) / g
    return MertonContinuous(pi_m=pi_m, tau=tau, T=T, gamma=g)


@dataclass
class MertonDiscrete:
    """Per-period optimal simplex proportions and value coefficients.

    beta[n], zeta[n] for n = 0..N-1 and d[n] for n = 0..N with d[N] = 1;
    V(t_n, x) = x^(1-gamma) / (1-gamma) * d[n]. v[n] is the optimal
    one-period expected power return.
    """

    beta: np.ndarray
    zeta: np.ndarray
    v: np.ndarray
    d: np.ndarray
    delta: float
    gamma: float

    @property
    def N(self) -> int:
        return len(self.beta)

    def _index(self, t) -> int:
        n = int(round(t / self.delta))
        return min(max(n, 0), self.N - 1)

    def benchmark_ref(self, params: MarketParams) -> DiscreteMertonRef:
        return DiscreteMertonRef(
            beta_of_t=lambda t: float(self.beta[self._index(t)]),
            zeta_of_t=lambda t: float(self.zeta[self._index(t)]),
            delta=self.delta, params=params)


def merton_discrete(params: MarketParams, utility: UtilityPower, N: int,
                    delta: float, quad: QuadratureSpec = None,
                    consumption: bool = True) -> MertonDiscrete:
    """Backward recursion over the simplex (no risk constraint).

    The one-period proportion maximizes E[(1 + beta R)^(1-gamma)] over
    [0, 1] (returns are i.i.d., so it is the same every period); the
    consumption proportion follows the first-order condition
    zeta_n = [1 + (e^{r delta (1-gamma)} v_n d_{n+1})^{1/gamma}]^{-1}
    against the continuation coefficient, and d_n is the recursion value
    at that maximizer. With consumption disabled zeta = 0 identically.
    """
    if params.sigma == 0.0:
        raise DomainError("merton_discrete requires sigma > 0")
    if N < 1:
        raise DomainError("need at least one period")
    if not delta > 0.0:
        raise DomainError("period length must be positive")
    g = utility.gamma
    if not 0.0 < g < 1.0:
        raise DomainError("the discrete recursion supports gamma in (0, 1)")
    quad = quad or QuadratureSpec()

    beta_star = _golden_max_scalar(
        lambda b: expected_power_return(b, g, delta, params, quad), 0.0, 1.0,
        tol=1e-8)
    v_star = expected_power_return(beta_star, g, delta, params, quad)

    erg = np.exp(params.r * delta * (1.0 - g))
    d = np.ones(N + 1)
    zeta = np.zeros(N)
    for n in range(N - 1, -1, -1):
        cont = erg * v_star * d[n + 1]
        if consumption:
            zeta[n] = 1.0 / (1.0 + cont ** (1.0 / g))
            d[n] = zeta[n] ** (1.0 - g) + (1.0 - zeta[n]) ** (1.0 - g) * cont
        else:
            d[n] = cont
    return MertonDiscrete(beta=np.full(N, beta_star), zeta=zeta,
                          v=np.full(N, v_star), d=d, delta=delta, gamma=g)
