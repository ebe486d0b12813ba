"""Tracking-cost functionals over simulated trajectories.

ITAE integrates t*|r - y|, ISO integrates the squared overshoot
max(0, y - r)^2, both by the trapezoid rule over [0, T].  The combined
objective is the weighted sum the gain tuner minimizes; in the reduced
form the weights are (1, alpha).
"""

from dataclasses import dataclass
import json

import numpy as np

# Cost assigned to candidates whose simulation diverges, so the
# optimizer can still rank them.
DIVERGENCE_PENALTY = 1e9


@dataclass(frozen=True)
class CostWeights:
    """Weights of the combined objective.

    ``alpha`` is the overshoot weight of the reduced form
    j = itae + alpha * iso (lambda_itae = 1, lambda_iso = alpha); the
    general weighted form is available through the lambda fields.
    """

    alpha: float = 2000.0
    horizon: float = 10.0
    lambda_itae: float = 1.0
    lambda_iso: float = None
    penalty: float = DIVERGENCE_PENALTY

    def __post_init__(self):
        if self.alpha < 0 or self.lambda_itae < 0:
            raise ValueError("weights must be nonnegative")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.lambda_iso is None:
            object.__setattr__(self, "lambda_iso", self.alpha * self.lambda_itae)
        elif self.lambda_iso < 0:
            raise ValueError("weights must be nonnegative")

    def to_dict(self):
        return {"alpha": self.alpha, "horizon": self.horizon,
                "lambda_itae": self.lambda_itae, "lambda_iso": self.lambda_iso,
                "penalty": self.penalty}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass(frozen=True)
class CostReport:
    """ITAE/ISO values and their weighted combination."""

    itae: float
    iso: float
    j: float
    alpha: float
    horizon: float
    dt: float

    def to_dict(self):
        return {"itae": self.itae, "iso": self.iso, "alpha": self.alpha,
                "j": self.j, "T": self.horizon, "dt": self.dt}

    def to_json(self, indent=None):
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)


def _masked(traj, horizon):
    """Samples with 0 <= t <= horizon (costs ignore any pre-step lead-in)."""
    t = np.asarray(traj.times, dtype=float)
    y = np.asarray(traj.y, dtype=float)
    if t.size == 0:
        raise ValueError("empty trajectory")
    if horizon is None:
        horizon = float(t[-1])
    mask = (t >= 0.0) & (t <= horizon + 1e-12)
    if not np.any(mask):
        raise ValueError("trajectory has no samples in [0, T]")
    return t[mask], y[mask]


def _reference(r, t):
    if callable(r):
        return np.asarray([float(r(tk)) for tk in t])
    return np.full_like(t, float(r))


def itae(traj, r=1.0, horizon=None):
    """Integral of time-weighted absolute error, trapezoid rule on [0, T]."""
    t, y = _masked(traj, horizon)
    rv = _reference(r, t)
    return float(np.trapezoid(t * np.abs(rv - y), t))


def iso(traj, r=1.0, horizon=None):
    """Integral of squared overshoot, trapezoid rule on [0, T]."""
    t, y = _masked(traj, horizon)
    rv = _reference(r, t)
    over = np.maximum(0.0, y - rv)
    return float(np.trapezoid(over * over, t))


def combined(traj, weights, r=1.0):
    """Weighted ITAE + ISO cost of a trajectory as a :class:`CostReport`."""
    t = np.asarray(traj.times, dtype=float)
    dt = float(t[1] - t[0]) if t.size > 1 else 0.0
    itae_v = itae(traj, r=r, horizon=weights.horizon)
    iso_v = iso(traj, r=r, horizon=weights.horizon)
    j = weights.lambda_itae * itae_v + weights.lambda_iso * iso_v
    return CostReport(itae=itae_v, iso=iso_v, j=j, alpha=weights.alpha,
                      horizon=weights.horizon, dt=dt)
