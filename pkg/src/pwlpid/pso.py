"""Global-best particle swarm optimization over a bounded box.

The swarm is synchronous: all objective evaluations of an iteration are
independent (and may run on a thread pool), followed by a serial
pbest/gbest update and the velocity/position update.  Every random draw
comes from a stream keyed by (seed, iteration, particle), so results
are bit-identical no matter how evaluations are scheduled.
"""

from dataclasses import dataclass
from concurrent.futures import ThreadPoolExecutor
import csv
import io
import json

import numpy as np

from . import cost as cost_mod
from .sim import NonFiniteState, simulate_impulsive_model, simulate_state_space
from .tf import PidGains


@dataclass(frozen=True)
class PsoConfig:
    """Swarm hyperparameters.

    The inertia/cognitive/social defaults (0.5, 0.5, 0.5) are the
    canonical library defaults this toolkit's comparisons assume; set
    (0.729, 1.49445, 1.49445) for the constriction variant.
    ``velocity_clamp`` limits |v| per dimension to that fraction of the
    bound span.
    """

    swarm_size: int = 30
    iterations: int = 5
    bounds: tuple = ((0.0, 10.0), (0.0, 10.0), (0.0, 10.0))
    seed: int = 1
    omega: float = 0.5
    c1: float = 0.5
    c2: float = 0.5
    velocity_clamp: float = 1.0
    workers: int = 1

    def __post_init__(self):
        if self.swarm_size < 2:
            raise ValueError("swarm_size must be >= 2")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        object.__setattr__(self, "bounds", bounds)
        for d, (lo, hi) in enumerate(bounds):
            if not lo < hi:
                raise ValueError(f"bounds[{d}]: need lo < hi, got [{lo}, {hi}]")
        if not 0.0 <= self.omega < 1.0:
            raise ValueError("omega must be in [0, 1)")
        if self.c1 <= 0 or self.c2 <= 0:
            raise ValueError("c1 and c2 must be positive")
        if not 0.0 < self.velocity_clamp <= 1.0:
            raise ValueError("velocity_clamp must be in (0, 1]")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @property
    def dim(self):
        return len(self.bounds)

    def to_dict(self):
        return {"swarm_size": self.swarm_size, "iterations": self.iterations,
                "bounds": [list(b) for b in self.bounds], "seed": self.seed,
                "omega": self.omega, "c1": self.c1, "c2": self.c2,
                "velocity_clamp": self.velocity_clamp, "workers": self.workers}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["bounds"] = tuple(tuple(b) for b in d["bounds"])
        return cls(**d)


@dataclass(frozen=True)
class TuneReport:
    """Optimization outcome: best point, per-iteration best cost
    (non-increasing; the last entry is ``best_cost``), evaluation count,
    and the seed that reproduces the run."""

    best_position: tuple
    best_cost: float
    history: tuple
    evaluations: int
    seed: int
    config: PsoConfig

    @property
    def best_gains(self):
        return PidGains(*self.best_position)

    def to_dict(self):
        return {"best_position": list(self.best_position),
                "best_cost": self.best_cost,
                "history": list(self.history),
                "evaluations": self.evaluations,
                "seed": self.seed,
                "config": self.config.to_dict()}

    def to_json(self, indent=None):
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    def history_to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["iteration", "best_cost"])
        for i, c in enumerate(self.history):
            writer.writerow([i, repr(c)])
        return buf.getvalue()


def _stream(seed, iteration, particle):
    """Independent RNG for one (iteration, particle) pair."""
    return np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, iteration, particle])


def _evaluate_all(objective, positions, workers):
    if workers <= 1:
        return [float(objective(p.copy())) for p in positions]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return [float(v) for v in pool.map(lambda p: objective(p.copy()), positions)]


def optimize(objective, cfg):
    """Minimize ``objective`` over the configured box.

    Standard global-best update
    v <- omega*v + c1*r1*(pbest - x) + c2*r2*(gbest - x), with positions
    clipped to the bounds and velocities clamped.  Exactly
    swarm_size * (iterations + 1) objective evaluations are performed
    (initialization included).  Ties prefer the lower particle index.
    """
    dim = cfg.dim
    lo = np.array([b[0] for b in cfg.bounds])
    hi = np.array([b[1] for b in cfg.bounds])
    span = hi - lo
    vmax = cfg.velocity_clamp * span

    x = np.empty((cfg.swarm_size, dim))
    v = np.empty((cfg.swarm_size, dim))
    for i in range(cfg.swarm_size):
        rng = _stream(cfg.seed, 0, i)
        x[i] = lo + rng.uniform(0.0, 1.0, dim) * span
        v[i] = rng.uniform(-1.0, 1.0, dim) * vmax

    costs = _evaluate_all(objective, x, cfg.workers)
    evaluations = cfg.swarm_size
    pbest = x.copy()
    pbest_cost = np.asarray(costs, dtype=float)
    g_idx = int(np.argmin(pbest_cost))     # argmin takes the first minimum
    gbest = pbest[g_idx].copy()
    gbest_cost = float(pbest_cost[g_idx])
    history = [gbest_cost]

    for it in range(1, cfg.iterations + 1):
        for i in range(cfg.swarm_size):
            rng = _stream(cfg.seed, it, i)
            r1 = rng.uniform(0.0, 1.0, dim)
            r2 = rng.uniform(0.0, 1.0, dim)
            v[i] = (cfg.omega * v[i]
                    + cfg.c1 * r1 * (pbest[i] - x[i])
                    + cfg.c2 * r2 * (gbest - x[i]))
            np.clip(v[i], -vmax, vmax, out=v[i])
            x[i] = np.clip(x[i] + v[i], lo, hi)

        costs = _evaluate_all(objective, x, cfg.workers)
        evaluations += cfg.swarm_size
        for i in range(cfg.swarm_size):
            if costs[i] < pbest_cost[i]:
                pbest_cost[i] = costs[i]
                pbest[i] = x[i]
            if pbest_cost[i] < gbest_cost:
                gbest_cost = float(pbest_cost[i])
                gbest = pbest[i].copy()
        history.append(gbest_cost)

    return TuneReport(
        best_position=tuple(float(c) for c in gbest),
        best_cost=gbest_cost,
        history=tuple(history),
        evaluations=evaluations,
        seed=cfg.seed,
        config=cfg,
    )


@dataclass(frozen=True)
class TuningProblem:
    """Closed-loop gain-tuning objective: simulate, then score ITAE+ISO.

    ``plant`` is whatever the simulators accept (scalar callable,
    PwlApprox, or (a, b) pair).  Diverging candidates receive the
    configured penalty ceiling so the swarm can rank them.
    """

    plant: object
    sim_config: object
    weights: object
    use_impulsive_model: bool = False
    reference: object = 1.0

    def simulate(self, gains):
        if self.use_impulsive_model:
            return simulate_impulsive_model(self.plant, gains, self.sim_config)
        return simulate_state_space(self.plant, gains, self.sim_config)

    def evaluate(self, gains):
        """Full :class:`~pwlpid.cost.CostReport` for one gain triple."""
        traj = self.simulate(gains)
        return cost_mod.combined(traj, self.weights, r=self.reference)

    def objective(self, position):
        """Scalar cost for the optimizer; divergence maps to the penalty."""
        try:
            gains = PidGains(*position)
            return self.evaluate(gains).j
        except NonFiniteState:
            return self.weights.penalty


def pinned_eval(gains, problem):
    """One objective evaluation with the full cost breakdown, for
    baseline pinning and regression checks."""
    if not isinstance(gains, PidGains):
        gains = PidGains(*gains)
    return problem.evaluate(gains)


def tune(problem, cfg):
    """Run :func:`optimize` against a :class:`TuningProblem`."""
    return optimize(problem.objective, cfg)
