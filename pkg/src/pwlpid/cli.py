"""Command-line front-end.

Subcommands: ``approx`` (segment tables + certificate), ``simulate``
(closed-loop trajectory + cost), ``tune`` (swarm search over the gain
box), ``converge`` (mesh-refinement sweep), and the ``example1`` /
``example2`` presets that lock the reproduction settings (alpha=2000,
swarm 30, 5/10 iterations, gains in [0, 10]^3).

Every command writes deterministic CSV/JSON artifacts (no timestamps)
and, unless ``--no-plots`` is given, the matching PNG figures.  A JSON
config file supplies defaults that individual flags override.

Exit codes: 0 ok, 2 configuration error, 3 simulation divergence
(partial files are still written), 4 I/O error.
"""

from dataclasses import dataclass, replace
import argparse
import json
import math
import sys
from pathlib import Path

from . import cost as cost_mod
from .approx import build, certify
from .cost import CostWeights
from .partition import kuhn_partition
from .plant import EvalError, PlantSyntaxError, builtin, plant_from_expression
from .pso import PsoConfig, TuningProblem, optimize, pinned_eval
from .sim import NonFiniteState, SimConfig, converge_sweep, simulate_impulsive_model, \
    simulate_state_space
from .tf import EXAMPLE1_BASELINE_GAINS, PidGains

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_IO = 4

# Gains reported for the nonlinear example's tuned controller, used as a
# reference evaluation by the example2 preset.
EXAMPLE2_REFERENCE_GAINS = PidGains(4.65, 10.0, 0.0)


class ConfigError(ValueError):
    """Invalid run configuration; message carries the field path."""


@dataclass(frozen=True)
class PlantSpec:
    """Builtin name or expression text, plus optional certificates."""

    name: str = None
    expression: str = None
    lipschitz: float = None
    hessian_bound: float = None

    def __post_init__(self):
        if (self.name is None) == (self.expression is None):
            raise ConfigError("plant: exactly one of name/expression required")

    def build(self, domain):
        if self.name is not None:
            model = builtin(self.name)
            if self.lipschitz is not None:
                model = replace(model, lipschitz_L=self.lipschitz)
            if self.hessian_bound is not None:
                model = replace(model, hessian_bound=self.hessian_bound)
            return model
        return plant_from_expression(self.expression, domain,
                                     lipschitz=self.lipschitz,
                                     hessian_bound=self.hessian_bound)

    def to_dict(self):
        return {"name": self.name, "expression": self.expression,
                "lipschitz": self.lipschitz, "hessian_bound": self.hessian_bound}


@dataclass(frozen=True)
class RunConfig:
    """Everything one command needs; reports echo it for reproducibility."""

    plant: PlantSpec
    domain: tuple
    cells: int
    sim: SimConfig
    cost: CostWeights
    pso: PsoConfig
    gains: object = None
    h_list: tuple = None
    impulsive_model: bool = False
    plots: bool = True
    out: str = "out"

    def to_dict(self):
        return {
            "plant": self.plant.to_dict(),
            "domain": list(self.domain),
            "cells": self.cells,
            "sim": self.sim.to_dict(),
            "cost": self.cost.to_dict(),
            "pso": self.pso.to_dict(),
            "gains": list(self.gains.as_tuple()) if self.gains else None,
            "h_list": list(self.h_list) if self.h_list else None,
            "impulsive_model": self.impulsive_model,
            "plots": self.plots,
            "out": self.out,
        }

    @classmethod
    def from_dict(cls, d):
        def section(name, ctor, payload):
            try:
                return ctor(**payload)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{name}: {exc}") from exc

        known = {"plant", "domain", "cells", "sim", "cost", "pso", "gains",
                 "h_list", "impulsive_model", "plots", "out"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")

        plant = section("plant", PlantSpec, d.get("plant") or {})
        domain = d.get("domain") or (-3.0, 3.0)
        if len(domain) != 2 or not float(domain[0]) < float(domain[1]):
            raise ConfigError(f"domain: need [lo, hi] with lo < hi, got {domain}")
        domain = (float(domain[0]), float(domain[1]))
        sim = section("sim", SimConfig, d.get("sim") or {})
        cost_payload = dict(d.get("cost") or {})
        cost_payload.setdefault("horizon", sim.horizon)
        cost = section("cost", CostWeights, cost_payload)
        if cost.horizon > sim.horizon + 1e-12:
            raise ConfigError(
                f"cost.horizon: {cost.horizon} exceeds sim.horizon {sim.horizon}")
        pso = section("pso", PsoConfig, d.get("pso") or {})
        gains = d.get("gains")
        if gains is not None:
            gains = section("gains", PidGains, dict(zip(("kp", "ki", "kd"), gains)))
        h_list = d.get("h_list")
        if h_list is not None:
            h_list = tuple(int(h) for h in h_list)
        cells = d.get("cells")
        if cells is not None:
            cells = int(cells)
            if cells < 1:
                raise ConfigError(f"cells: must be >= 1, got {cells}")
        return cls(plant=plant, domain=domain, cells=cells, sim=sim, cost=cost,
                   pso=pso, gains=gains, h_list=h_list,
                   impulsive_model=bool(d.get("impulsive_model", False)),
                   plots=bool(d.get("plots", True)),
                   out=str(d.get("out", "out")))


# ----------------------------------------------------------------------
# argument parsing

def _build_parser():
    parser = argparse.ArgumentParser(
        prog="pwlpid",
        description="Piecewise-linear plant approximation, PID loop "
                    "simulation, and swarm gain tuning.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="JSON config file")
        p.add_argument("--plant", help="builtin plant name (example1|example2)")
        p.add_argument("--expr", help="plant expression in y, n=1")
        p.add_argument("--domain", nargs=2, type=float, metavar=("LO", "HI"))
        p.add_argument("--cells", type=int, help="partition cells over the domain")
        p.add_argument("--lipschitz", type=float)
        p.add_argument("--hessian-bound", type=float, dest="hessian_bound")
        p.add_argument("--dt", type=float)
        p.add_argument("--T", type=float, dest="horizon")
        p.add_argument("--sigma", type=float)
        p.add_argument("--alpha", type=float)
        p.add_argument("--gains", nargs=3, type=float, metavar=("KP", "KI", "KD"))
        p.add_argument("--swarm", type=int)
        p.add_argument("--iters", type=int)
        p.add_argument("--bounds", nargs=2, type=float, metavar=("LO", "HI"),
                       help="gain box, same for kp/ki/kd")
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--out", type=Path)
        p.add_argument("--paper-model", action="store_true", default=None,
                       dest="impulsive_model",
                       help="also run the differentiated second-order "
                            "impulsive model")
        p.add_argument("--no-plots", action="store_true")

    common(sub.add_parser("approx", help="write the segment table and certificate"))
    common(sub.add_parser("simulate", help="simulate the closed loop"))
    common(sub.add_parser("tune", help="optimize the PID gains"))
    p_conv = sub.add_parser("converge", help="mesh-refinement sweep")
    common(p_conv)
    p_conv.add_argument("--h-list", nargs="+", type=int, dest="h_list")
    common(sub.add_parser("example1", help="linear-plant reproduction preset"))
    common(sub.add_parser("example2", help="nonlinear-plant reproduction preset"))
    return parser


def _config_from_args(args, preset=None):
    data = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError(f"config: cannot read {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: invalid JSON: {exc}") from exc
    if preset:
        for key, val in preset.items():
            if isinstance(val, dict):
                merged = dict(val)
                merged.update(data.get(key) or {})
                data[key] = merged
            else:
                data.setdefault(key, val)

    def setdefaulted(section):
        sec = data.get(section)
        if sec is None:
            sec = {}
            data[section] = sec
        return sec

    if args.plant:
        data["plant"] = {"name": args.plant}
    if args.expr:
        data["plant"] = {"expression": args.expr}
    plant_sec = data.get("plant")
    if plant_sec is not None:
        if args.lipschitz is not None:
            plant_sec["lipschitz"] = args.lipschitz
        if getattr(args, "hessian_bound", None) is not None:
            plant_sec["hessian_bound"] = args.hessian_bound
    if args.domain:
        data["domain"] = list(args.domain)
    if args.cells is not None:
        data["cells"] = args.cells
    sim_sec = setdefaulted("sim")
    if args.dt is not None:
        sim_sec["dt"] = args.dt
    if args.horizon is not None:
        sim_sec["horizon"] = args.horizon
    if args.sigma is not None:
        sim_sec["sigma"] = args.sigma
    cost_sec = setdefaulted("cost")
    if args.alpha is not None:
        cost_sec["alpha"] = args.alpha
    if args.horizon is not None:
        cost_sec["horizon"] = args.horizon
    pso_sec = setdefaulted("pso")
    if args.swarm is not None:
        pso_sec["swarm_size"] = args.swarm
    if args.iters is not None:
        pso_sec["iterations"] = args.iters
    if args.bounds is not None:
        pso_sec["bounds"] = [list(args.bounds)] * 3
    if args.seed is not None:
        pso_sec["seed"] = args.seed
    if args.workers is not None:
        pso_sec["workers"] = args.workers
    if args.gains is not None:
        data["gains"] = list(args.gains)
    if getattr(args, "h_list", None):
        data["h_list"] = list(args.h_list)
    if args.impulsive_model is not None:
        data["impulsive_model"] = args.impulsive_model
    if args.no_plots:
        data["plots"] = False
    if args.out is not None:
        data["out"] = str(args.out)
    return RunConfig.from_dict(data)


# ----------------------------------------------------------------------
# artifact helpers

def _write_text(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def _write_json(path, payload):
    return _write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _outdir(cfg):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _plots():
    # matplotlib import deferred so data-only runs stay light
    from . import plots
    return plots


def _build_approx(cfg, model):
    if cfg.cells is None:
        raise ConfigError("cells: required to build a piecewise approximation")
    part = kuhn_partition(((cfg.domain[0],), (cfg.domain[1],)), [cfg.cells])
    return build(model.f, part)


def _loop_plant(cfg, model):
    """What the simulator integrates: the interpolant when cells are
    configured, the exact nonlinearity otherwise."""
    if cfg.cells is not None:
        return _build_approx(cfg, model)
    return model.f


# ----------------------------------------------------------------------
# commands

def cmd_approx(cfg):
    model = cfg.plant.build(cfg.domain)
    ap = _build_approx(cfg, model)
    cert = certify(ap, model.f, model.hessian_bound)
    out = _outdir(cfg)
    _write_text(out / "segments.csv", ap.segments_to_csv())
    _write_json(out / "segments.json",
                {"segments": ap.segment_rows(), "config": cfg.to_dict()})
    _write_json(out / "certificate.json",
                {**cert.to_dict(), "config": cfg.to_dict()})
    if cfg.plots:
        _plots().segments_figure(model.f, ap, out / "approx.png",
                                 title=model.label or "piecewise approximation")
    print(f"wrote segment table with h={ap.h} pieces to {out}")
    print(f"measured sup error {cert.sup_error_measured:.6g}; "
          f"interpolant Lipschitz constant {cert.lipschitz_pwl:.6g}")
    return EXIT_OK


def _simulate_and_report(cfg, plant, gains, out, stem, title):
    """Run one simulation, write its artifacts; re-raise divergence after
    writing whatever was produced."""
    sim_fn = simulate_impulsive_model if cfg.impulsive_model else simulate_state_space
    try:
        traj = sim_fn(plant, gains, cfg.sim)
    except NonFiniteState as exc:
        if exc.trajectory is not None:
            _write_text(out / f"{stem}.csv", exc.trajectory.to_csv())
        raise
    _write_text(out / f"{stem}.csv", traj.to_csv())
    cost_report = cost_mod.combined(traj, cfg.cost)
    _write_json(out / f"{stem}_cost.json",
                {**cost_report.to_dict(), "gains": list(gains.as_tuple()),
                 "config": cfg.to_dict()})
    if cfg.plots:
        _plots().step_response_figure(traj, out / f"{stem}.png", title=title)
    return traj, cost_report


def cmd_simulate(cfg):
    if cfg.gains is None:
        raise ConfigError("gains: required for simulate")
    model = cfg.plant.build(cfg.domain)
    plant = _loop_plant(cfg, model)
    out = _outdir(cfg)
    gains = cfg.gains
    label = model.label or (cfg.plant.expression or "plant")

    base = replace(cfg, impulsive_model=False)
    traj, cost_report = _simulate_and_report(
        base, plant, gains, out, "trajectory",
        f"{label}, gains {gains.as_tuple()}")
    print(f"simulated {traj.times.size} samples; final y = {traj.final_value():.6g}")
    print(f"itae={cost_report.itae:.6g} iso={cost_report.iso:.6g} "
          f"j={cost_report.j:.6g}")

    if cfg.impulsive_model:
        if cfg.cells is None:
            raise ConfigError("cells: the second-order model needs affine pieces")
        impulsive_cfg = replace(cfg, impulsive_model=True)
        traj_p, _ = _simulate_and_report(
            impulsive_cfg, plant, gains, out, "trajectory_impulsive",
            f"{label} (second-order impulsive model)")
        diff = float(max(abs(a - b) for a, b in zip(traj.y, traj_p.y)))
        print(f"impulsive-model sup deviation from state-space run: {diff:.3g}")
    return EXIT_OK


def cmd_tune(cfg):
    model = cfg.plant.build(cfg.domain)
    plant = _loop_plant(cfg, model)
    problem = TuningProblem(plant=plant, sim_config=cfg.sim, weights=cfg.cost,
                            use_impulsive_model=cfg.impulsive_model)
    report = optimize(problem.objective, cfg.pso)
    out = _outdir(cfg)
    _write_json(out / "tune_report.json",
                {**report.to_dict(), "run_config": cfg.to_dict()})
    _write_text(out / "tune_history.csv", report.history_to_csv())
    best = report.best_gains
    traj = problem.simulate(best)
    _write_text(out / "best_trajectory.csv", traj.to_csv())
    if cfg.plots:
        _plots().tuning_history_figure(report, out / "tune_history.png")
        _plots().step_response_figure(
            traj, out / "best_trajectory.png",
            title=f"tuned gains {tuple(round(g, 4) for g in best.as_tuple())}")
    print(f"best gains kp={best.kp:.4g} ki={best.ki:.4g} kd={best.kd:.4g} "
          f"with cost {report.best_cost:.6g} "
          f"({report.evaluations} evaluations, seed {report.seed})")
    return EXIT_OK


def cmd_converge(cfg):
    if not cfg.h_list:
        raise ConfigError("h_list: required for converge")
    if cfg.gains is None:
        raise ConfigError("gains: required for converge")
    model = cfg.plant.build(cfg.domain)
    if model.hessian_bound is None:
        raise ConfigError("plant.hessian_bound: required for converge")
    report = converge_sweep(model, cfg.domain, cfg.gains, cfg.h_list, cfg.sim)
    out = _outdir(cfg)
    _write_json(out / "convergence.json",
                {**report.to_dict(), "config": cfg.to_dict()})
    _write_text(out / "convergence.csv", report.to_csv())
    if cfg.plots:
        _plots().convergence_figure(report, out / "convergence.png")
    print("h      max_diam     eps_f        sup_error    gronwall(t<=%g)"
          % report.bound_horizon)
    for i, h in enumerate(report.h_values):
        print(f"{h:<6d} {report.max_diams[i]:<12.6g} {report.epsilon_f[i]:<12.6g} "
              f"{report.sup_errors[i]:<12.6g} {report.gronwall_bounds[i]:<12.6g}")
    return EXIT_OK


# ----------------------------------------------------------------------
# presets

EXAMPLE1_PRESET = {
    "plant": {"name": "example1"},
    "domain": [-3.0, 3.0],
    "cost": {"alpha": 2000.0},
    "pso": {"swarm_size": 30, "iterations": 5,
            "bounds": [[0.0, 10.0]] * 3, "seed": 1},
}

EXAMPLE2_PRESET = {
    "plant": {"name": "example2"},
    "domain": [-3.0, 3.0],
    "cells": 6,
    "cost": {"alpha": 2000.0},
    "pso": {"swarm_size": 30, "iterations": 10,
            "bounds": [[0.0, 10.0]] * 3, "seed": 1},
}


def cmd_example1(cfg):
    model = cfg.plant.build(cfg.domain)
    problem = TuningProblem(plant=model.f, sim_config=cfg.sim, weights=cfg.cost)
    out = _outdir(cfg)

    baseline = EXAMPLE1_BASELINE_GAINS
    base_traj = problem.simulate(baseline)
    base_cost = pinned_eval(baseline, problem)
    _write_text(out / "baseline_trajectory.csv", base_traj.to_csv())
    _write_json(out / "baseline_cost.json",
                {**base_cost.to_dict(), "gains": list(baseline.as_tuple()),
                 "config": cfg.to_dict()})

    report = optimize(problem.objective, cfg.pso)
    best = report.best_gains
    best_traj = problem.simulate(best)
    best_cost = pinned_eval(best, problem)
    _write_json(out / "tune_report.json",
                {**report.to_dict(), "run_config": cfg.to_dict()})
    _write_text(out / "tune_history.csv", report.history_to_csv())
    _write_text(out / "best_trajectory.csv", best_traj.to_csv())
    _write_json(out / "comparison.json", {
        "baseline_gains": list(baseline.as_tuple()),
        "baseline_cost": base_cost.to_dict(),
        "tuned_gains": list(best.as_tuple()),
        "tuned_cost": best_cost.to_dict(),
        "improvement_factor": base_cost.j / best_cost.j if best_cost.j > 0
        else math.inf,
        "config": cfg.to_dict(),
    })
    if cfg.plots:
        _plots().step_response_figure(
            base_traj, out / "baseline_trajectory.png",
            title=f"closed-loop tuning baseline {baseline.as_tuple()}, "
                  f"J={base_cost.j:.4g}")
        _plots().step_response_figure(
            best_traj, out / "best_trajectory.png",
            title=f"swarm-tuned gains, J={best_cost.j:.4g}")
        _plots().tuning_history_figure(report, out / "tune_history.png")
        _plots().impulse_figure(cfg.sim.sigma, out / "impulse_approximations.png")
    print(f"baseline J={base_cost.j:.6g} (gains {baseline.as_tuple()})")
    print(f"tuned    J={best_cost.j:.6g} (gains {tuple(round(g, 4) for g in best.as_tuple())})")
    print(f"improvement factor {base_cost.j / best_cost.j:.2f}x")
    return EXIT_OK


def cmd_example2(cfg):
    model = cfg.plant.build(cfg.domain)
    ap = _build_approx(cfg, model)
    cert = certify(ap, model.f, model.hessian_bound)
    out = _outdir(cfg)
    _write_text(out / "segments.csv", ap.segments_to_csv())
    _write_json(out / "segments.json",
                {"segments": ap.segment_rows(), "config": cfg.to_dict()})
    _write_json(out / "certificate.json",
                {**cert.to_dict(), "config": cfg.to_dict()})

    problem = TuningProblem(plant=ap, sim_config=cfg.sim, weights=cfg.cost)
    report = optimize(problem.objective, cfg.pso)
    best = report.best_gains
    best_traj = problem.simulate(best)
    best_cost = pinned_eval(best, problem)
    ref_cost = pinned_eval(EXAMPLE2_REFERENCE_GAINS, problem)
    _write_json(out / "tune_report.json",
                {**report.to_dict(), "run_config": cfg.to_dict()})
    _write_text(out / "tune_history.csv", report.history_to_csv())
    _write_text(out / "best_trajectory.csv", best_traj.to_csv())
    _write_json(out / "comparison.json", {
        "tuned_gains": list(best.as_tuple()),
        "tuned_cost": best_cost.to_dict(),
        "reference_gains": list(EXAMPLE2_REFERENCE_GAINS.as_tuple()),
        "reference_cost": ref_cost.to_dict(),
        "final_output": best_traj.final_value(),
        "config": cfg.to_dict(),
    })
    if cfg.plots:
        _plots().segments_figure(model.f, ap, out / "approx.png", title=model.label)
        _plots().step_response_figure(
            best_traj, out / "best_trajectory.png",
            title=f"tuned nonlinear loop, J={best_cost.j:.4g}")
        _plots().tuning_history_figure(report, out / "tune_history.png")
    print(f"segment table h={ap.h}; measured approximation error "
          f"{cert.sup_error_measured:.4g}")
    print(f"tuned gains kp={best.kp:.4g} ki={best.ki:.4g} kd={best.kd:.4g}, "
          f"J={best_cost.j:.6g}, final y={best_traj.final_value():.4f}")
    return EXIT_OK


COMMANDS = {
    "approx": (cmd_approx, None),
    "simulate": (cmd_simulate, None),
    "tune": (cmd_tune, None),
    "converge": (cmd_converge, None),
    "example1": (cmd_example1, EXAMPLE1_PRESET),
    "example2": (cmd_example2, EXAMPLE2_PRESET),
}


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    command, preset = COMMANDS[args.command]
    try:
        cfg = _config_from_args(args, preset=preset)
    except (ConfigError, PlantSyntaxError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return command(cfg)
    except (ConfigError, PlantSyntaxError, EvalError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonFiniteState as exc:
        print(f"simulation diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
