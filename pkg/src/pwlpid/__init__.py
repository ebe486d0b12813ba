"""pwlpid: piecewise-linear plant approximation and PID gain tuning.

The toolkit approximates first-order-and-up nonlinear plants by
continuous piecewise-affine interpolants over simplicial partitions,
simulates the PID closed loop (including the impulsive second-order
form with Gaussian delta/doublet approximations), and tunes the gains
by particle swarm optimization of a combined ITAE + overshoot cost.
"""

from .approx import ApproxCertificate, PwlApprox, build, certify, lifted_lipschitz
from .cost import CostReport, CostWeights, combined, iso, itae
from .partition import (BarycentricCoords, BoxDomain, PointOutsideDomain,
                        SimplicialPartition, kuhn_partition, locate,
                        simplex_volume)
from .plant import (EvalError, PlantModel, PlantSyntaxError, builtin,
                    existence_bound_check, parse_plant, plant_from_expression)
from .pso import PsoConfig, TuneReport, TuningProblem, optimize, pinned_eval, tune
from .sim import (ConvergenceReport, DomainExit, NonFiniteState, SimConfig,
                  Trajectory, converge_sweep, gaussian_delta, gaussian_doublet,
                  simulate_impulsive_model, simulate_state_space)
from .tf import (EXAMPLE1_BASELINE_GAINS, PidGains, Poly, RationalTF,
                 analytic_step_example1, closed_loop, initial_value, limit_tf,
                 post_initial_values, region_tf, routh_stable)

__version__ = "0.1.0"

__all__ = [
    "ApproxCertificate", "BarycentricCoords", "BoxDomain", "ConvergenceReport",
    "CostReport", "CostWeights", "DomainExit", "EXAMPLE1_BASELINE_GAINS",
    "EvalError", "NonFiniteState", "PidGains", "PlantModel", "PlantSyntaxError",
    "PointOutsideDomain", "Poly", "PsoConfig", "PwlApprox", "RationalTF",
    "SimConfig", "SimplicialPartition", "Trajectory", "TuneReport",
    "TuningProblem", "analytic_step_example1", "build", "builtin", "certify",
    "closed_loop", "combined", "converge_sweep", "existence_bound_check",
    "gaussian_delta", "gaussian_doublet", "initial_value", "iso", "itae",
    "kuhn_partition", "lifted_lipschitz", "limit_tf", "locate", "optimize",
    "parse_plant", "pinned_eval", "plant_from_expression", "post_initial_values",
    "region_tf", "routh_stable", "simplex_volume", "simulate_impulsive_model",
    "simulate_state_space", "tune",
]
