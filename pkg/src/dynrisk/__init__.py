"""Consumption-investment optimization under dynamic shortfall-risk
constraints, in continuous and discrete time.

Modules:

* market_model: market parameters, exact wealth dynamics, path simulation
* risk: closed-form VaR / TCE / EL of frozen strategies, feasibility
* merton: unconstrained baselines in both time regimes
* hjb_solver: continuous-time constrained solver (reduced ODE and policy
  improvement on a grid)
* mdp_solver: discrete-time backward recursion and grid recursion
* experiments: efficiency metrics, Monte Carlo value checks, recipes
* cli: command-line front end
"""

__version__ = "0.1.0"

from .errors import (ConfigError, DomainError, GridDomainError,
                     InfeasibleError, NumericsError)
from .market_model import (LogNormalLaw, MarketParams, PathEnsemble,
                           UtilityPower, conditional_wealth_law,
                           discrete_return_law, simulate_paths,
                           wealth_step_exact)
from .risk import (Benchmark, RiskBound, RiskConstraintConfig,
                   RiskMeasureKind, benchmark_value, feasible_interval,
                   is_feasible, mc_risk_oracle, risk_continuous,
                   risk_discrete)
from .merton import (MertonContinuous, MertonDiscrete, merton_continuous,
                     merton_discrete)
from .mdp_solver import (DiscreteSolution, QuadratureSpec,
                         expected_power_return)
from .hjb_solver import (ContinuousSolution, GridSpec, hamiltonian_argmax,
                         hjb_residual)
from .experiments import (EfficiencyReport, ValueCheck, efficiency,
                          mc_value_check, relative_gap, run_experiment)

__all__ = [name for name in dir() if not name.startswith("_")]
