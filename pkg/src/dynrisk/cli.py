"""Command-line front end.

Subcommands: merton, risk, solve-continuous, solve-discrete, simulate,
efficiency, experiment <name>. Configuration comes from an optional flat
key = value file (dotted keys, # comments) overridden by --key value
pairs on the command line; defaults are the baseline market
(r=0.1, mu=0.18, sigma=0.35, gamma=0.3, T=2, delta=1/24, alpha=0.01).

Exit codes: 0 success, 2 configuration error, 3 infeasible constraint,
4 numerical diagnostic failure.

CSV schemas: continuous surfaces are long-format t,x,value,pi,c; discrete
surfaces n,t,x,value,beta,zeta; efficiency sweeps
sweep_var,value_coeff_a,value_coeff_b,efficiency. All floats are written
with 17 significant digits, so identical config and seed reproduce
byte-identical CSV files. The JSON run summary additionally carries the
resolved config, a version string and wall-clock timings (the timings are
excluded from the byte-identity guarantee by nature).
"""

import argparse
import json
import os
import subprocess
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import __version__, experiments, hjb_solver, mdp_solver
from .errors import ConfigError, DomainError, InfeasibleError, NumericsError
from .experiments import DEFAULT_CONFIG, build_constraint, run_experiment
from .market_model import MarketParams, UtilityPower, simulate_paths
from .mdp_solver import QuadratureSpec
from .merton import merton_continuous, merton_discrete
from .risk import risk_continuous, risk_discrete

_INT_KEYS = {"solver.t_steps", "solver.x_steps", "solver.quad_nodes",
             "solver.mdp_x_steps", "simulation.n_paths", "simulation.seed",
             "experiment.fig3_t_steps", "experiment.fig3_x_steps"}
_STR_KEYS = {"risk.measure", "risk.benchmark", "risk.bound", "risk.regime",
             "output.dir", "output.format", "simulation.policy",
             "experiment.lambda_grid", "experiment.delta_grid"}

OUTPUT_DIR_ENV = "DYNRISK_OUT"


@dataclass
class RunConfig:
    """Validated flat configuration with typed accessors.

    All numeric fields are checked against the domain constraints of the
    target modules before any solver runs.
    """

    values: dict

    @classmethod
    def from_sources(cls, path=None, overrides=None) -> "RunConfig":
        values = dict(DEFAULT_CONFIG)
        if path:
            for key, raw in _read_config_file(path):
                if key not in values:
                    raise ConfigError(f"unknown config key {key!r}")
                values[key] = _coerce(key, raw)
        for key, raw in (overrides or []):
            if key not in values:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = _coerce(key, raw)
        cfg = cls(values)
        cfg.validate()
        return cfg

    def validate(self):
        self.params()
        self.utility()
        if not self.T > 0:
            raise ConfigError("horizon.T must be positive")
        if not self.delta > 0:
            raise ConfigError("horizon.delta must be positive")
        if self.values["risk.measure"] not in ("var", "tce", "el"):
            raise ConfigError("risk.measure must be var, tce or el")
        if self.values["risk.measure"] != "el" and not 0 < float(self.values["risk.alpha"]) < 1:
            raise ConfigError("risk.alpha must lie in (0, 1)")
        if int(self.values["simulation.n_paths"]) < 1:
            raise ConfigError("simulation.n_paths must be positive")

    def params(self) -> MarketParams:
        try:
            return MarketParams(float(self.values["market.r"]),
                                float(self.values["market.mu"]),
                                float(self.values["market.sigma"]))
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc

    def utility(self) -> UtilityPower:
        try:
            return UtilityPower(float(self.values["utility.gamma"]))
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def T(self) -> float:
        return float(self.values["horizon.T"])

    @property
    def delta(self) -> float:
        return float(self.values["horizon.delta"])

    @property
    def seed(self) -> int:
        return int(self.values["simulation.seed"])

    def out_dir(self, cli_value=None) -> str:
        return (cli_value or self.values["output.dir"]
                or os.environ.get(OUTPUT_DIR_ENV, "") or "out")


def _coerce(key, raw):
    if key in _STR_KEYS:
        return str(raw)
    if key in _INT_KEYS:
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"key {key!r} expects an integer, got {raw!r}") from exc
    try:
        return experiments._parse_number(str(raw))
    except ValueError as exc:
        raise ConfigError(f"key {key!r} expects a number, got {raw!r}") from exc


def _read_config_file(path):
    pairs = []
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key = value")
                key, raw = (part.strip() for part in line.split("=", 1))
                pairs.append((key, raw))
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return pairs


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _version_string() -> str:
    try:
        desc = subprocess.run(["git", "describe", "--always", "--dirty"],
                              capture_output=True, text=True, timeout=5,
                              cwd=os.path.dirname(os.path.abspath(__file__)))
        if desc.returncode == 0 and desc.stdout.strip():
            return f"{__version__}+g{desc.stdout.strip()}"
    except Exception:
        pass
    return __version__


def _write_summary(out_dir, name, cfg_values, summary, timings):
    payload = {"name": name, "version": _version_string(),
               "config": {k: cfg_values[k] for k in sorted(cfg_values)},
               "summary": summary, "timings": timings}
    with open(os.path.join(out_dir, f"{name}__summary.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=float)


def _ensure_out(cfg, args):
    out = cfg.out_dir(getattr(args, "out", None))
    os.makedirs(out, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_merton(cfg: RunConfig, args) -> int:
    params, utility = cfg.params(), cfg.utility()
    mc = merton_continuous(params, utility, cfg.T)
    print(f"pi_m = {mc.pi_m:.6f}")
    print(f"tau = {mc.tau:.6f}")
    print(f"c_m(0) = {mc.c_m(0.0):.6f}   c_m(T) = {mc.c_m(cfg.T):.6f}")
    if 0 < utility.gamma < 1:
        N = int(round(cfg.T / cfg.delta))
        md = merton_discrete(params, utility, N, cfg.delta,
                             QuadratureSpec(int(cfg.values["solver.quad_nodes"])))
        print(f"beta_m = {md.beta[0]:.6f}   zeta_m(0) = {md.zeta[0]:.6f}   "
              f"d(0) = {md.d[0]:.6f}")
    return 0


def _cmd_risk(cfg: RunConfig, args) -> int:
    params, utility = cfg.params(), cfg.utility()
    regime = cfg.values["risk.regime"]
    quad = QuadratureSpec(int(cfg.values["solver.quad_nodes"]))
    rcfg = build_constraint(cfg.values, params, utility, regime, quad)
    if regime == "continuous":
        value = risk_continuous(rcfg.kind, 0.0, 1.0,
                                float(cfg.values["control.pi"]),
                                float(cfg.values["control.c"]), rcfg, params)
        print(f"risk = {value:.10g}")
    else:
        value = risk_discrete(rcfg.kind, 0.0, 1.0,
                              float(cfg.values["control.phi"]),
                              float(cfg.values["control.eta"]), rcfg, params)
        print(f"risk = {value:.10g}")
    print(f"bound = {rcfg.bound.value(0.0, 1.0):.10g}")
    print(f"feasible = {value <= rcfg.bound.value(0.0, 1.0)}")
    return 0


def _continuous_solution(cfg: RunConfig):
    params, utility = cfg.params(), cfg.utility()
    rcfg = build_constraint(cfg.values, params, utility, "continuous")
    grid = hjb_solver.GridSpec(int(cfg.values["solver.t_steps"]),
                               float(cfg.values["solver.x_min"]),
                               float(cfg.values["solver.x_max"]),
                               int(cfg.values["solver.x_steps"]))
    homogeneous = (rcfg.bound.is_relative
                   and rcfg.benchmark.kind in ("fraction", "merton"))
    if homogeneous:
        sol = hjb_solver.solve_relative(params, utility, rcfg, cfg.T,
                                        grid.t_steps, x_grid=grid.x_grid())
    else:
        sol = hjb_solver.solve_general(params, utility, rcfg, cfg.T, grid,
                                       compute_residual=False)
    return sol


def _cmd_solve_continuous(cfg: RunConfig, args) -> int:
    sol = _continuous_solution(cfg)
    out = _ensure_out(cfg, args)
    columns, rows = experiments._surface_rows(sol)
    path = os.path.join(out, "continuous_surface.csv")
    write_csv(path, columns, rows)
    print(f"V(0, 1) = {sol.value_at(0.0, 1.0):.8f}")
    p, c = sol.policy_at(0.0, 1.0)
    print(f"pi(0, 1) = {p:.6f}   c(0, 1) = {c:.6f}")
    print(f"wrote {path}")
    return 0


def _cmd_solve_discrete(cfg: RunConfig, args) -> int:
    params, utility = cfg.params(), cfg.utility()
    quad = QuadratureSpec(int(cfg.values["solver.quad_nodes"]))
    rcfg = build_constraint(cfg.values, params, utility, "discrete", quad)
    N = int(round(cfg.T / cfg.delta))
    homogeneous = (rcfg.bound.is_relative
                   and rcfg.benchmark.kind in ("fraction", "merton"))
    out = _ensure_out(cfg, args)
    path = os.path.join(out, "discrete_surface.csv")
    if homogeneous:
        sol = mdp_solver.solve_relative(params, utility, rcfg, N, cfg.delta, quad)
        x_grid = np.exp(np.linspace(np.log(0.25), np.log(4.0), 17))
        columns, rows = experiments._discrete_rows(sol, x_grid)
    else:
        x_grid = np.exp(np.linspace(np.log(float(cfg.values["solver.mdp_x_min"])),
                                    np.log(float(cfg.values["solver.mdp_x_max"])),
                                    int(cfg.values["solver.mdp_x_steps"])))
        sol = mdp_solver.solve_general(params, utility, rcfg, N, cfg.delta,
                                       x_grid, quad)
        columns = ["n", "t", "x", "value", "beta", "zeta"]
        rows = [(n, n * sol.delta, x, sol.value[n, j],
                 sol.beta[n, j] if n < N else np.nan,
                 sol.zeta[n, j] if n < N else np.nan)
                for n in range(N + 1) for j, x in enumerate(sol.x_grid)]
    write_csv(path, columns, rows)
    print(f"V(0, 1) = {sol.value_at(0, 1.0):.8f}")
    b, z = sol.policy_at(0, 1.0)
    print(f"beta(0, 1) = {float(b):.6f}   zeta(0, 1) = {float(z):.6f}")
    print(f"wrote {path}")
    return 0


def _cmd_simulate(cfg: RunConfig, args) -> int:
    params, utility = cfg.params(), cfg.utility()
    policy_name = cfg.values["simulation.policy"]
    if policy_name == "merton":
        mc = merton_continuous(params, utility, cfg.T)
        policy = lambda t, x: (np.full_like(np.asarray(x, dtype=float), mc.pi_m),
                               np.full_like(np.asarray(x, dtype=float), mc.c_m(t)))
    elif policy_name == "bond":
        policy = lambda t, x: (np.zeros_like(np.asarray(x, dtype=float)),
                               np.zeros_like(np.asarray(x, dtype=float)))
    else:
        raise ConfigError(f"unknown simulation.policy {policy_name!r}")
    ens = simulate_paths(params, policy, 0.0, cfg.T,
                         float(cfg.values["simulation.dt"]),
                         int(cfg.values["simulation.n_paths"]), cfg.seed)
    out = _ensure_out(cfg, args)
    rows = []
    for k, t in enumerate(ens.times):
        w = ens.wealth[:, k]
        rows.append((t, float(np.mean(w)), float(np.std(w, ddof=1)) if len(w) > 1 else 0.0,
                     float(np.quantile(w, 0.05)), float(np.quantile(w, 0.5)),
                     float(np.quantile(w, 0.95))))
    path = os.path.join(out, "simulation_stats.csv")
    write_csv(path, ["t", "mean", "std", "q05", "q50", "q95"], rows)
    print(f"terminal mean wealth = {np.mean(ens.wealth[:, -1]):.6f}")
    print(f"wrote {path}")
    return 0


def _cmd_efficiency(cfg: RunConfig, args) -> int:
    params, utility = cfg.params(), cfg.utility()
    regime = cfg.values["risk.regime"]
    if regime == "continuous":
        rcfg = build_constraint(cfg.values, params, utility, "continuous")
        t_steps = int(cfg.values["solver.t_steps"])
        sol = hjb_solver.solve_relative(params, utility, rcfg, cfg.T, t_steps,
                                        x_grid=np.array([1.0]))
        base = hjb_solver.solve_relative(params, utility, None, cfg.T, t_steps,
                                         x_grid=np.array([1.0]))
        k_a, k_b = float(sol.h[0]), float(base.h[0])
    else:
        quad = QuadratureSpec(int(cfg.values["solver.quad_nodes"]))
        rcfg = build_constraint(cfg.values, params, utility, "discrete", quad)
        N = int(round(cfg.T / cfg.delta))
        sol = mdp_solver.solve_relative(params, utility, rcfg, N, cfg.delta, quad)
        base = merton_discrete(params, utility, N, cfg.delta, quad)
        k_a, k_b = float(sol.d[0]), float(base.d[0])
    e = experiments.efficiency(k_a / (1.0 - utility.gamma), k_b, utility.gamma)
    out = _ensure_out(cfg, args)
    path = os.path.join(out, "efficiency.csv")
    write_csv(path, ["sweep_var", "value_coeff_a", "value_coeff_b", "efficiency"],
              [(cfg.values["risk.bound"], k_a, k_b, e)])
    print(f"efficiency = {e:.6f}   loss = {1.0 - e:.6f}")
    print(f"wrote {path}")
    return 0


def _cmd_experiment(cfg: RunConfig, args) -> int:
    overrides = {k: v for k, v in cfg.values.items() if v != DEFAULT_CONFIG[k]}
    start = time.perf_counter()
    result = run_experiment(args.name, overrides, threads=args.threads)
    out = _ensure_out(cfg, args)
    for table, (columns, rows) in result.tables.items():
        write_csv(os.path.join(out, f"{result.name}__{table}.csv"), columns, rows)
    timings = dict(result.timings)
    timings["wall_seconds"] = time.perf_counter() - start
    _write_summary(out, result.name, result.config, result.summary, timings)
    for key, value in result.summary.items():
        if isinstance(value, (int, float)):
            print(f"{key} = {value:.6g}")
    print(f"wrote {len(result.tables)} tables to {out}")
    return 0


_COMMANDS = {
    "merton": _cmd_merton,
    "risk": _cmd_risk,
    "solve-continuous": _cmd_solve_continuous,
    "solve-discrete": _cmd_solve_discrete,
    "simulate": _cmd_simulate,
    "efficiency": _cmd_efficiency,
    "experiment": _cmd_experiment,
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="dynrisk",
        description="Consumption-investment solvers under dynamic "
                    "shortfall-risk constraints")
    parser.add_argument("--version", action="version", version=_version_string())
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="key = value file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--threads", type=int, default=1,
                       help="parallel workers for sweep experiments")
        if name == "experiment":
            p.add_argument("name", help="experiment recipe name")
    return parser


def _split_overrides(argv):
    """Pull generic --dotted.key value pairs out of argv."""
    rest = []
    overrides = []
    i = 0
    while i < len(argv):
        arg = argv[i]
        if arg.startswith("--") and "." in arg.split("=", 1)[0]:
            if "=" in arg:
                key, value = arg[2:].split("=", 1)
            else:
                key = arg[2:]
                if i + 1 >= len(argv):
                    raise ConfigError(f"flag --{key} expects a value")
                i += 1
                value = argv[i]
            overrides.append((key, value))
        else:
            rest.append(arg)
        i += 1
    return rest, overrides


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        rest, overrides = _split_overrides(argv)
        args = _build_parser().parse_args(rest)
        cfg = RunConfig.from_sources(args.config, overrides)
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 3
    except (NumericsError,) as exc:
        print(f"numerical diagnostic: {exc}", file=sys.stderr)
        return 4
    except DomainError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
