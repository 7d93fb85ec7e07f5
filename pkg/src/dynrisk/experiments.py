"""Comparison metrics and named experiment recipes.

The central yardstick is the efficiency of investor A relative to
investor B: the initial wealth B needs to reach the value A attains from
unit wealth. For separable power values V_i(0, x) =
x^(1-gamma)/(1-gamma) k_i that is (k_A / k_B)^(1/(1-gamma)); one minus
the efficiency is the loss. Recipes assemble the solvers into the
standard quantitative comparisons (constraint sweeps, absolute-bound
surfaces, measure comparisons, trading-frequency gaps) and emit tidy
tables plus a summary of headline scalars.
"""

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import hjb_solver, mdp_solver
from .errors import ConfigError, DomainError
from .market_model import MarketParams, UtilityPower, stream_paths
from .mdp_solver import DiscreteSolution, QuadratureSpec
from .merton import merton_continuous, merton_discrete
from .risk import (Benchmark, RiskBound, RiskConstraintConfig, RiskMeasureKind,
                   risk_continuous, risk_discrete)

__all__ = ["relative_gap", "efficiency", "efficiency_general", "ValueCheck",
           "mc_value_check", "run_experiment", "ExperimentResult",
           "EfficiencyReport", "EXPERIMENT_NAMES", "DEFAULT_CONFIG"]

# Paper-baseline defaults, shared with the CLI config schema.
DEFAULT_CONFIG = {
    "market.r": 0.1,
    "market.mu": 0.18,
    "market.sigma": 0.35,
    "utility.gamma": 0.3,
    "horizon.T": 2.0,
    "horizon.delta": 1.0 / 24.0,
    "risk.measure": "var",
    "risk.alpha": 0.01,
    "risk.benchmark": "merton",
    "risk.bound": "relative:0.05",
    "risk.regime": "continuous",
    "solver.t_steps": 240,
    "solver.x_min": 0.1,
    "solver.x_max": 10.0,
    "solver.x_steps": 201,
    "solver.quad_nodes": 64,
    "solver.mdp_x_min": 0.05,
    "solver.mdp_x_max": 20.0,
    "solver.mdp_x_steps": 401,
    "control.pi": 0.0,
    "control.c": 0.0,
    "control.phi": 0.0,
    "control.eta": 0.0,
    "simulation.n_paths": 100_000,
    "simulation.seed": 0,
    "simulation.dt": 1.0 / 240.0,
    "simulation.policy": "merton",
    "output.dir": "",
    "output.format": "csv",
    "experiment.lambda_grid": "0:0.15:0.01",
    "experiment.delta_grid": "1/24,1/12,1/4,1/2,1,2,2.5",
    "experiment.gamma_cross": 0.9,
    "experiment.fig3_t_steps": 120,
    "experiment.fig3_x_steps": 121,
}


def relative_gap(v_baseline: float, v_constrained: float) -> float:
    """(V_baseline - V) / V_baseline; both values must share a sign."""
    if v_baseline == 0.0:
        raise DomainError("baseline value is zero")
    if v_baseline * v_constrained < 0.0:
        raise DomainError("values must share a sign (same utility branch)")
    return (v_baseline - v_constrained) / v_baseline


def efficiency(value_a_at_unit_wealth: float, value_coeff_b: float,
               gamma: float) -> float:
    """Initial wealth e with V_B(0, e) = V_A(0, 1), both values separable.

    With V_B(0, x) = x^(1-gamma)/(1-gamma) h_B this is
    e = ((1-gamma) V_A(0,1) / h_B)^(1/(1-gamma)) = (h_A/h_B)^(1/(1-gamma)).
    """
    h_a = (1.0 - gamma) * value_a_at_unit_wealth
    if h_a <= 0.0 or value_coeff_b <= 0.0:
        raise DomainError("value coefficients must be positive")
    return (h_a / value_coeff_b) ** (1.0 / (1.0 - gamma))


def efficiency_general(value_a_at_unit_wealth: float, solution_b,
                       tol: float = 1e-8) -> float:
    """Efficiency against a non-separable solution: solve
    V_B(0, e) = V_A(0, 1) by bisection on the wealth grid of B."""
    xs = solution_b.x if hasattr(solution_b, "x") else solution_b.x_grid
    lo, hi = float(xs[0]), float(xs[-1])

    def v(e):
        return solution_b.value_at(0, e)

    target = value_a_at_unit_wealth
    v_lo, v_hi = v(lo), v(hi)
    if not (min(v_lo, v_hi) <= target <= max(v_lo, v_hi)):
        raise DomainError("target value lies outside the grid range of B")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if (v(mid) - target) * (v_hi - target) <= 0.0:
            lo = mid
        else:
            hi, v_hi = mid, v(mid)
    return 0.5 * (lo + hi)


@dataclass
class EfficiencyReport:
    """Efficiency sweep: per-point coefficients and efficiencies."""

    experiment: str
    sweep_var: str
    points: np.ndarray
    coeff_constrained: np.ndarray
    coeff_baseline: np.ndarray
    efficiency: np.ndarray


@dataclass
class ValueCheck:
    """Simulated objective against the solver value at (0, x0)."""

    estimate: float
    se: float
    reference: float
    z: float
    max_risk_excess: float


def mc_value_check(solution, regime: str, n_paths: int, seed: int,
                   params: MarketParams, utility: UtilityPower,
                   cfg: Optional[RiskConstraintConfig] = None, x0: float = 1.0,
                   dt_sim: float = None, chunk: int = 8192) -> ValueCheck:
    """Simulate the stored policy and compare the sample-mean realized
    objective with the solution value at (0, x0).

    Paths stream through in chunks so large ensembles never materialize.
    When a constraint config is supplied, the risk of the applied controls
    is re-evaluated along the way and the worst excess over the bound is
    reported (feasible policies should stay at or below zero up to
    bisection tolerance).
    """
    excess = -np.inf
    if regime == "continuous":
        ts = solution.t
        dt = float(ts[1] - ts[0]) if dt_sim is None else dt_sim
        T = float(ts[-1])

        def policy(t, x):
            return solution.policy_at(t, x)

        total = 0.0
        total_sq = 0.0
        count = 0
        for sl, times, w, p, c in stream_paths(params, lambda t, x: policy(t, x0 * x),
                                               0.0, T, dt, n_paths, seed, chunk):
            wealth = x0 * w
            n_steps = p.shape[1]
            u_nodes = np.empty_like(wealth)
            u_nodes[:, :-1] = utility.u(c * wealth[:, :-1])
            p_T, c_T = policy(times[-1], wealth[:, -1])
            u_nodes[:, -1] = utility.u(np.asarray(c_T) * wealth[:, -1])
            integral = dt * (u_nodes[:, 0] * 0.5 + u_nodes[:, 1:-1].sum(axis=1)
                             + u_nodes[:, -1] * 0.5)
            objective = integral + utility.u(wealth[:, -1])
            total += float(objective.sum())
            total_sq += float((objective ** 2).sum())
            count += objective.size
            if cfg is not None:
                for k in range(n_steps):
                    r = risk_continuous(cfg.kind, times[k], wealth[:, k],
                                        p[:, k], c[:, k], cfg, params,
                                        frozen_shares=getattr(solution, "frozen_shares", False))
                    excess = max(excess, float(np.max(r - cfg.bound.value(times[k], wealth[:, k]))))
        reference = solution.value_at(0.0, x0)
    elif regime == "discrete":
        sol: DiscreteSolution = solution
        N = sol.N
        delta = sol.delta
        rng_base = np.random.Philox(key=seed)
        total = 0.0
        total_sq = 0.0
        count = 0
        log_m = (params.mu - 0.5 * params.sigma ** 2) * delta
        log_s = params.sigma * math.sqrt(delta)
        erd = math.exp(params.r * delta)
        done = 0
        while done < n_paths:
            m = min(chunk, n_paths - done)
            normals = np.empty((m, N))
            for i in range(m):
                normals[i] = np.random.Generator(rng_base.jumped(done + i)).standard_normal(N)
            x = np.full(m, float(x0))
            objective = np.zeros(m)
            for n in range(N):
                beta, zeta = sol.policy_at(n, x)
                eta = np.asarray(zeta) * x
                phi = np.asarray(beta) * (x - eta)
                objective += utility.u(eta)
                if cfg is not None:
                    r = risk_discrete(cfg.kind, n * delta, x, phi, eta, cfg, params)
                    excess = max(excess, float(np.max(r - cfg.bound.value(n * delta, x))))
                gross = np.exp(log_m + log_s * normals[:, n])
                x = erd * (x - eta - phi) + phi * gross
            objective += utility.u(x)
            total += float(objective.sum())
            total_sq += float((objective ** 2).sum())
            count += m
            done += m
        reference = sol.value_at(0, x0)
    else:
        raise ConfigError(f"unknown regime {regime!r}")

    mean = total / count
    var = max(total_sq / count - mean ** 2, 0.0) * count / (count - 1)
    se = math.sqrt(var / count)
    z = (mean - reference) / se if se > 0 else math.inf
    return ValueCheck(estimate=mean, se=se, reference=reference, z=z,
                      max_risk_excess=(excess if np.isfinite(excess) else 0.0))


# ---------------------------------------------------------------------------
# recipe plumbing
# ---------------------------------------------------------------------------

def _resolve(overrides):
    cfg = dict(DEFAULT_CONFIG)
    for key, value in (overrides or {}).items():
        if key not in cfg:
            raise ConfigError(f"unknown config key {key!r}")
        cfg[key] = value
    return cfg


def _market(cfg) -> MarketParams:
    return MarketParams(r=float(cfg["market.r"]), mu=float(cfg["market.mu"]),
                        sigma=float(cfg["market.sigma"]))


def _parse_number(s: str) -> float:
    s = s.strip()
    if "/" in s:
        num, den = s.split("/")
        return float(num) / float(den)
    return float(s)


def _parse_grid(spec: str) -> np.ndarray:
    spec = str(spec)
    if ":" in spec:
        lo, hi, step = (_parse_number(p) for p in spec.split(":"))
        return np.round(np.arange(lo, hi + step / 2, step), 12)
    return np.array([_parse_number(p) for p in spec.split(",")])


def _measure(cfg) -> RiskMeasureKind:
    name = str(cfg["risk.measure"]).lower()
    if name == "el":
        return RiskMeasureKind.el()
    return RiskMeasureKind(name, float(cfg["risk.alpha"]))


def _benchmark(cfg, params, delta, T, utility, regime,
               quad=None) -> Benchmark:
    spec = str(cfg["risk.benchmark"])
    if spec.startswith("fraction:"):
        return Benchmark.fraction(float(spec.split(":", 1)[1]))
    if spec.startswith("constant:"):
        return Benchmark.constant(float(spec.split(":", 1)[1]))
    if spec.startswith("table:"):
        knots = [tuple(map(float, part.split("@")))
                 for part in spec.split(":", 1)[1].split(",")]
        return Benchmark.table([(t, y) for y, t in knots])
    if spec == "merton":
        if regime == "continuous":
            ref = merton_continuous(params, utility, T).benchmark_ref(delta, params)
        else:
            N = int(round(T / delta))
            ref = merton_discrete(params, utility, N, delta,
                                  quad=quad).benchmark_ref(params)
        return Benchmark.merton(ref)
    raise ConfigError(f"unknown benchmark spec {spec!r}")


def _bound(cfg) -> RiskBound:
    spec = str(cfg["risk.bound"])
    kind, level = spec.split(":", 1)
    return RiskBound(kind, float(level))


def build_constraint(cfg, params, utility, regime,
                     quad=None) -> RiskConstraintConfig:
    delta = float(cfg["horizon.delta"])
    T = float(cfg["horizon.T"])
    return RiskConstraintConfig(kind=_measure(cfg),
                                benchmark=_benchmark(cfg, params, delta, T,
                                                     utility, regime, quad),
                                bound=_bound(cfg), delta=delta)


@dataclass
class ExperimentResult:
    name: str
    tables: dict
    summary: dict
    config: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)


def _surface_rows(sol):
    rows = []
    for k, t in enumerate(sol.t):
        for j, x in enumerate(sol.x):
            rows.append((t, x, sol.value[k, j], sol.pi[k, j], sol.c[k, j]))
    return ["t", "x", "value", "pi", "c"], rows


def _discrete_rows(sol: DiscreteSolution, x_grid):
    rows = []
    g = sol.gamma
    for n in range(sol.N + 1):
        t = n * sol.delta
        if n < sol.N:
            b, z = sol.beta[n], sol.zeta[n]
        else:
            b, z = np.nan, np.nan
        for x in x_grid:
            rows.append((n, t, x, x ** (1 - g) / (1 - g) * sol.d[n], b, z))
    return ["n", "t", "x", "value", "beta", "zeta"], rows


# ---------------------------------------------------------------------------
# recipes
# ---------------------------------------------------------------------------

def _recipe_fig1_var_continuous(cfg):
    params = _market(cfg)
    utility = UtilityPower(float(cfg["utility.gamma"]))
    T = float(cfg["horizon.T"])
    t_steps = int(cfg["solver.t_steps"])
    ccfg = build_constraint(cfg, params, utility, "continuous")
    x_grid = hjb_solver.GridSpec(t_steps, float(cfg["solver.x_min"]),
                                 float(cfg["solver.x_max"]),
                                 int(cfg["solver.x_steps"])).x_grid()
    sol_c = hjb_solver.solve_relative(params, utility, ccfg, T, t_steps, x_grid)
    sol_m = hjb_solver.solve_relative(params, utility, None, T, t_steps, x_grid)
    gaps = [(t, x, relative_gap(sol_m.value[k, j], sol_c.value[k, j]))
            for k, t in enumerate(sol_c.t) for j, x in enumerate(sol_c.x)]
    eff = efficiency(sol_c.value_at(0.0, 1.0), sol_m.h[0], utility.gamma)
    mert = merton_continuous(params, utility, T)
    merton_risk = risk_continuous(ccfg.kind, 0.0, 1.0, mert.pi_m,
                                  mert.c_m(0.0), ccfg, params)
    return ExperimentResult(
        name="fig1_var_continuous",
        tables={
            "surface": _surface_rows(sol_c),
            "merton_surface": _surface_rows(sol_m),
            "delta_v": (["t", "x", "delta_v"], gaps),
        },
        summary={
            "efficiency": eff,
            "loss": 1.0 - eff,
            "h_constrained_0": float(sol_c.h[0]),
            "h_merton_0": float(sol_m.h[0]),
            "merton_strategy_risk_per_wealth": float(merton_risk),
            "max_pi_constrained": float(np.max(sol_c.pi)),
            "pi_merton": mert.pi_m,
        })


def _lambda_point_continuous(args):
    cfg, lam = args
    params = _market(cfg)
    utility = UtilityPower(float(cfg["utility.gamma"]))
    T = float(cfg["horizon.T"])
    local = dict(cfg)
    local["risk.bound"] = f"relative:{lam}"
    ccfg = build_constraint(local, params, utility, "continuous")
    sol = hjb_solver.solve_relative(params, utility, ccfg, T,
                                    int(cfg["solver.t_steps"]),
                                    x_grid=np.array([1.0]))
    return float(sol.h[0])


def _recipe_eff_vs_lambda_continuous(cfg, threads=1):
    params = _market(cfg)
    utility = UtilityPower(float(cfg["utility.gamma"]))
    T = float(cfg["horizon.T"])
    lambdas = _parse_grid(cfg["experiment.lambda_grid"])
    base = hjb_solver.solve_relative(params, utility, None, T,
                                     int(cfg["solver.t_steps"]),
                                     x_grid=np.array([1.0]))
    h_m = float(base.h[0])
    h_cs = _map(_lambda_point_continuous, [(cfg, float(l)) for l in lambdas],
                threads)
    rows = []
    effs = []
    for lam, h_c in zip(lambdas, h_cs):
        e = efficiency(h_c / (1.0 - utility.gamma), h_m, utility.gamma)
        effs.append(e)
        rows.append((float(lam), h_c, h_m, e))
    effs = np.array(effs)
    summary = {"h_merton_0": h_m,
               "efficiencies": {float(l): float(e) for l, e in zip(lambdas, effs)}}
    for lam_tag, label in ((0.0, "loss_at_lambda_0"), (0.05, "loss_at_lambda_005")):
        mask = np.isclose(lambdas, lam_tag)
        if np.any(mask):
            summary[label] = float(1.0 - effs[mask][0])
    return ExperimentResult(
        name="eff_vs_lambda_continuous",
        tables={"efficiency": (["sweep_var", "value_coeff_a", "value_coeff_b",
                                "efficiency"], rows)},
        summary=summary)


def _recipe_fig3_absolute_bound(cfg):
    params = _market(cfg)
    utility = UtilityPower(float(cfg["utility.gamma"]))
    T = float(cfg["horizon.T"])
    local = dict(cfg)
    if not str(local["risk.bound"]).startswith("absolute"):
        local["risk.bound"] = "absolute:0.05"
    ccfg_abs = build_constraint(local, params, utility, "continuous")
    grid = hjb_solver.GridSpec(int(cfg["experiment.fig3_t_steps"]),
                               float(cfg["solver.x_min"]),
                               float(cfg["solver.x_max"]),
                               int(cfg["experiment.fig3_x_steps"]))
    sol_abs = hjb_solver.solve_general(params, utility, ccfg_abs, T, grid,
                                       compute_residual=False)
    rel = dict(cfg)
    rel["risk.bound"] = f"relative:{ccfg_abs.bound.level}"
    ccfg_rel = build_constraint(rel, params, utility, "continuous")
    sol_rel = hjb_solver.solve_relative(params, utility, ccfg_rel, T,
                                        grid.t_steps, x_grid=grid.x_grid())

    xs = sol_abs.x
    above = xs > 1.0
    below = xs < 1.0
    interior_t = slice(1, len(sol_abs.t) - 1)
    pi_abs = sol_abs.pi[interior_t]
    max_increase = float(np.max(np.diff(pi_abs[:, above], axis=1))) if above.sum() > 1 else 0.0
    min_excess_low = float(np.min(pi_abs[:, below] - sol_rel.pi[interior_t][:, below]))
    return ExperimentResult(
        name="fig3_absolute_bound",
        tables={"surface_absolute": _surface_rows(sol_abs),
                "surface_relative": _surface_rows(sol_rel)},
        summary={
            "pi_max_increase_in_x_above_1": max_increase,
            "pi_min_excess_over_relative_below_1": min_excess_low,
            "iterations": sol_abs.iterations,
        })


def _recipe_fig4(cfg):
    params = _market(cfg)
    utility = UtilityPower(float(cfg["utility.gamma"]))
    t_steps = int(cfg["solver.t_steps"])
    x_grid = np.exp(np.linspace(np.log(0.25), np.log(4.0), 41))

    top_rows = []
    for lam in (0.15, 0.05):
        local = dict(cfg)
        local["risk.bound"] = f"relative:{lam}"
        ccfg = build_constraint(local, params, utility, "continuous")
        sol = hjb_solver.solve_relative(params, utility, ccfg,
                                        float(cfg["horizon.T"]), t_steps,
                                        x_grid=np.array([1.0]))
        for k, t in enumerate(sol.t):
            top_rows.append((lam, float(t), float(sol.h[k]),
                             float(sol.pi[k, 0]), float(sol.c[k, 0])))

    bottom_rows = []
    var_tce_diff = 0.0
    for T in (1.0, 2.0, 5.0):
        sols = {}
        for measure, level in (("merton", None), ("var", 0.05),
                               ("tce", 0.05), ("el", 0.01)):
            local = dict(cfg)
            local["horizon.T"] = T
            if measure == "merton":
                ccfg = None
            else:
                local["risk.measure"] = measure
                local["risk.bound"] = f"relative:{level}"
                ccfg = build_constraint(local, params, utility, "continuous")
            sol = hjb_solver.solve_relative(params, utility, ccfg, T, t_steps,
                                            x_grid=np.array([1.0]))
            sols[measure] = sol
            for x in x_grid:
                bottom_rows.append((T, measure, float(x),
                                    float(sol.value_at(0.0, x))))
        var_tce_diff = max(var_tce_diff,
                           abs(sols["var"].h[0] / sols["tce"].h[0] - 1.0))
    return ExperimentResult(
        name="fig4_bounds_horizons_measures",
        tables={"top_bounds": (["lambda", "t", "h", "pi", "c"], top_rows),
                "values_at_t0": (["T", "measure", "x", "value"], bottom_rows)},
        summary={"max_var_tce_relative_value_diff": float(var_tce_diff)})


def _recipe_fig7_var_discrete(cfg):
    params = _market(cfg)
    utility = UtilityPower(float(cfg["utility.gamma"]))
    T = float(cfg["horizon.T"])
    delta = float(cfg["horizon.delta"])
    N = int(round(T / delta))
    quad = QuadratureSpec(int(cfg["solver.quad_nodes"]))
    ccfg = build_constraint(cfg, params, utility, "discrete", quad)
    sol = mdp_solver.solve_relative(params, utility, ccfg, N, delta, quad)
    mert = merton_discrete(params, utility, N, delta, quad)
    x_grid = np.exp(np.linspace(np.log(0.25), np.log(4.0), 17))
    eff = efficiency(sol.value_at(0, 1.0), mert.d[0], utility.gamma)
    eta0 = mert.zeta[0]
    phi0 = mert.beta[0] * (1.0 - eta0)
    merton_risk = risk_discrete(ccfg.kind, 0.0, 1.0, phi0, eta0, ccfg, params)
    policy_rows = [(n, n * delta, float(sol.beta[n]), float(sol.zeta[n]),
                    float(sol.d[n]), float(mert.beta[n]), float(mert.zeta[n]),
                    float(mert.d[n])) for n in range(N)]
    return ExperimentResult(
        name="fig7_var_discrete",
        tables={"policy": (["n", "t", "beta", "zeta", "d", "beta_merton",
                            "zeta_merton", "d_merton"], policy_rows),
                "surface": _discrete_rows(sol, x_grid)},
        summary={"efficiency": eff, "loss": 1.0 - eff,
                 "d_constrained_0": float(sol.d[0]),
                 "d_merton_0": float(mert.d[0]),
                 "merton_strategy_risk_per_wealth": float(merton_risk),
                 "beta_merton": float(mert.beta[0]),
                 "max_beta_constrained": float(np.max(sol.beta))})


def _lambda_point_discrete(args):
    cfg, lam = args
    params = _market(cfg)
    utility = UtilityPower(float(cfg["utility.gamma"]))
    T = float(cfg["horizon.T"])
    delta = float(cfg["horizon.delta"])
    N = int(round(T / delta))
    quad = QuadratureSpec(int(cfg["solver.quad_nodes"]))
    local = dict(cfg)
    local["risk.bound"] = f"relative:{lam}"
    ccfg = build_constraint(local, params, utility, "discrete", quad)
    sol = mdp_solver.solve_relative(params, utility, ccfg, N, delta, quad)
    return float(sol.d[0])


def _recipe_eff_vs_lambda_discrete(cfg, threads=1):
    params = _market(cfg)
    utility = UtilityPower(float(cfg["utility.gamma"]))
    T = float(cfg["horizon.T"])
    delta = float(cfg["horizon.delta"])
    N = int(round(T / delta))
    quad = QuadratureSpec(int(cfg["solver.quad_nodes"]))
    lambdas = _parse_grid(cfg["experiment.lambda_grid"])
    mert = merton_discrete(params, utility, N, delta, quad)
    d_m = float(mert.d[0])
    d_cs = _map(_lambda_point_discrete, [(cfg, float(l)) for l in lambdas],
                threads)
    rows = []
    effs = []
    for lam, d_c in zip(lambdas, d_cs):
        e = efficiency(d_c / (1.0 - utility.gamma), d_m, utility.gamma)
        effs.append(e)
        rows.append((float(lam), d_c, d_m, e))
    effs = np.array(effs)
    summary = {"d_merton_0": d_m,
               "efficiencies": {float(l): float(e) for l, e in zip(lambdas, effs)}}
    for lam_tag, label in ((0.0, "loss_at_lambda_0"), (0.05, "loss_at_lambda_005")):
        mask = np.isclose(lambdas, lam_tag)
        if np.any(mask):
            summary[label] = float(1.0 - effs[mask][0])
    return ExperimentResult(
        name="eff_vs_lambda_discrete",
        tables={"efficiency": (["sweep_var", "value_coeff_a", "value_coeff_b",
                                "efficiency"], rows)},
        summary=summary)


def _delta_point(args):
    """One trading/risk horizon of the cross-regime comparison.

    gamma is raised so the unconstrained proportion is interior, utility
    of consumption is disabled, and short-selling is forbidden in both
    regimes. The continuous investor's risk uses the frozen-shares
    convention so both constraints are the same function of the exposure;
    the benchmark is full wealth preservation (fraction 1.0), which keeps
    the constrained problem feasible at every horizon in the sweep.
    """
    cfg, dlt = args
    params = _market(cfg)
    utility = UtilityPower(float(cfg["experiment.gamma_cross"]))
    T = float(cfg["horizon.T"])
    N = max(1, int(round(T / dlt)))
    T_eff = N * dlt
    quad = QuadratureSpec(int(cfg["solver.quad_nodes"]))
    lam = float(str(cfg["risk.bound"]).split(":", 1)[1])
    rcfg = RiskConstraintConfig(kind=RiskMeasureKind.var(float(cfg["risk.alpha"])),
                                benchmark=Benchmark.fraction(1.0),
                                bound=RiskBound.relative(lam), delta=dlt)
    box = (0.0, 1.0)
    t_steps = max(16, 4 * N)

    mert_d = merton_discrete(params, utility, N, dlt, quad, consumption=False)
    mert_c = hjb_solver.solve_relative(params, utility, None, T_eff, t_steps,
                                       x_grid=np.array([1.0]),
                                       consumption=False, pi_box=box)
    eff_merton = efficiency(mert_d.d[0] / (1.0 - utility.gamma),
                            float(mert_c.h[0]), utility.gamma)

    con_d = mdp_solver.solve_relative(params, utility, rcfg, N, dlt, quad,
                                      consumption=False)
    con_c = hjb_solver.solve_relative(params, utility, rcfg, T_eff, t_steps,
                                      x_grid=np.array([1.0]),
                                      consumption=False, pi_box=box,
                                      frozen_shares=True)
    eff_var = efficiency(con_d.d[0] / (1.0 - utility.gamma),
                         float(con_c.h[0]), utility.gamma)
    return (float(dlt), N, float(T_eff), float(mert_d.d[0]), float(mert_c.h[0]),
            eff_merton, float(con_d.d[0]), float(con_c.h[0]), eff_var)


def _recipe_eff_vs_delta(cfg, threads=1):
    deltas = _parse_grid(cfg["experiment.delta_grid"])
    rows = _map(_delta_point, [(cfg, float(d)) for d in deltas], threads)
    eff_m = np.array([r[5] for r in rows])
    eff_v = np.array([r[8] for r in rows])
    return ExperimentResult(
        name="eff_vs_delta",
        tables={"efficiency": (["delta", "N", "T_eff", "d_merton", "h_merton",
                                "efficiency_merton", "d_var", "h_var",
                                "efficiency_var"], rows)},
        summary={"min_efficiency_merton": float(np.min(eff_m)),
                 "min_efficiency_var": float(np.min(eff_v)),
                 "max_efficiency_merton": float(np.max(eff_m)),
                 "max_efficiency_var": float(np.max(eff_v))})


_RECIPES = {
    "fig1_var_continuous": _recipe_fig1_var_continuous,
    "eff_vs_lambda_continuous": _recipe_eff_vs_lambda_continuous,
    "fig3_absolute_bound": _recipe_fig3_absolute_bound,
    "fig4_bounds_horizons_measures": _recipe_fig4,
    "fig7_var_discrete": _recipe_fig7_var_discrete,
    "eff_vs_lambda_discrete": _recipe_eff_vs_lambda_discrete,
    "eff_vs_delta": _recipe_eff_vs_delta,
}

EXPERIMENT_NAMES = tuple(_RECIPES)

_SWEEP_RECIPES = {"eff_vs_lambda_continuous", "eff_vs_lambda_discrete",
                  "eff_vs_delta"}


def _map(fn, items, threads):
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def run_experiment(name: str, overrides: dict = None,
                   threads: int = 1) -> ExperimentResult:
    """Run a named recipe and return its tables and headline summary."""
    if name not in _RECIPES:
        raise ConfigError(f"unknown experiment {name!r}; known: "
                          + ", ".join(sorted(_RECIPES)))
    cfg = _resolve(overrides)
    start = time.perf_counter()
    if name in _SWEEP_RECIPES:
        result = _RECIPES[name](cfg, threads=threads)
    else:
        result = _RECIPES[name](cfg)
    result.config = cfg
    result.timings = {"total_seconds": time.perf_counter() - start}
    return result
