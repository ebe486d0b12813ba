"""Closed-loop time-domain simulation with impulsive PID action.

Two equivalent integrators are provided and cross-checked against each
other:

* :func:`simulate_state_space` integrates the loop in (y, int e) form,
  where the derivative action reduces algebraically to
  (1 + kd) y' = -f(y) + kp e + ki int(e) + kd delta(t);
* :func:`simulate_impulsive_model` integrates the differentiated second-order
  form (1 + kd) y'' + (a(y) + kp) y' + ki y =
  (kp - b0) delta(t) + ki step(t) + kd doublet(t), whose impulsive right
  side re-creates the zero pre-initial state's jump.

Both replace the Dirac delta and doublet by a Gaussian of width sigma
centered at t = 0.  Because the Gaussian needs its full mass, the
integration grid starts at t = -lead (default 8 sigma, where the
impulse is numerically zero) with the zero state placed there; samples
at negative times are part of the returned trajectory and cost
functionals ignore them.
"""

from dataclasses import dataclass, field, replace
import csv
import io
import json
import logging
import math

import numpy as np

from .approx import PwlApprox, build, certify
from .partition import kuhn_partition
from .plant import EvalError
from .tf import PidGains

log = logging.getLogger(__name__)

DOMAIN_POLICIES = ("reject", "extrapolate_and_flag", "expand_and_rebuild")

# |y| beyond this is treated as divergence even before overflow.
DIVERGENCE_LIMIT = 1e12

# Errors raised mid-stage that mean the candidate loop diverged rather
# than the code being wrong (ValueError covers int(nan) in region lookup
# and math-domain errors from user nonlinearities).
_DIVERGENCE_ERRORS = (OverflowError, ZeroDivisionError, ValueError, EvalError)


class DomainExit(RuntimeError):
    """State left the approximation domain under the ``reject`` policy."""


class NonFiniteState(RuntimeError):
    """Simulation produced NaN/overflow; carries the partial trajectory."""

    def __init__(self, time, trajectory=None):
        super().__init__(f"state became non-finite at t={time:.6g}")
        self.time = time
        self.trajectory = trajectory


@dataclass(frozen=True)
class SimConfig:
    """Fixed-step RK4 settings for the closed-loop integrators.

    ``dt <= sigma/5`` so the Gaussian impulse approximations are
    resolved; ``startup_window`` is excluded from convergence metrics;
    ``impulse_lead_sigmas`` sets how far before t=0 integration starts.
    """

    dt: float = 1e-3
    horizon: float = 10.0
    sigma: float = 0.01
    integrator: str = "rk4_fixed"
    startup_window: float = 0.1
    domain_policy: str = "expand_and_rebuild"
    # 8 sigma matches the impulse cutoff, so the first sample carries an
    # exactly zero state and derivative.
    impulse_lead_sigmas: float = 8.0

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.dt > self.sigma / 5.0 + 1e-15:
            raise ValueError(
                f"dt={self.dt} must be <= sigma/5={self.sigma / 5.0} to "
                f"resolve the impulse approximations")
        if self.integrator != "rk4_fixed":
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.domain_policy not in DOMAIN_POLICIES:
            raise ValueError(f"unknown domain policy {self.domain_policy!r}")

    @property
    def lead_steps(self):
        return int(round(self.impulse_lead_sigmas * self.sigma / self.dt))

    def to_dict(self):
        return {"dt": self.dt, "horizon": self.horizon, "sigma": self.sigma,
                "integrator": self.integrator,
                "startup_window": self.startup_window,
                "domain_policy": self.domain_policy,
                "impulse_lead_sigmas": self.impulse_lead_sigmas}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class Trajectory:
    """Uniformly sampled closed-loop records.

    The first sample holds the zero pre-initial state (it sits at
    t = -lead when an impulse lead-in is active).  ``domain_exits``
    lists (time, y) pairs for steps whose stage evaluations left the
    approximation domain.
    """

    times: np.ndarray
    y: np.ndarray
    dy: np.ndarray
    u: np.ndarray
    e: np.ndarray
    domain_exits: list = field(default_factory=list)

    @property
    def dt(self):
        return float(self.times[1] - self.times[0])

    def final_value(self):
        return float(self.y[-1])

    def sample_at(self, t):
        """(y, dy) at the grid sample nearest to ``t``."""
        idx = int(np.argmin(np.abs(self.times - t)))
        return float(self.y[idx]), float(self.dy[idx])

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "y", "dy", "u", "e"])
        for k in range(self.times.size):
            writer.writerow([repr(float(self.times[k])), repr(float(self.y[k])),
                             repr(float(self.dy[k])), repr(float(self.u[k])),
                             repr(float(self.e[k]))])
        return buf.getvalue()


def gaussian_delta(t, sigma):
    """Gaussian approximation of the Dirac delta:
    exp(-t^2 / (2 sigma^2)) / (sigma sqrt(2 pi))."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    t = np.asarray(t, dtype=float)
    out = np.exp(-(t * t) / (2.0 * sigma * sigma)) / (sigma * math.sqrt(2.0 * math.pi))
    return float(out) if out.ndim == 0 else out


def gaussian_doublet(t, sigma):
    """Derivative of :func:`gaussian_delta`, approximating the Dirac
    doublet: -t / sigma^2 times the Gaussian."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    t = np.asarray(t, dtype=float)
    out = -(t / (sigma * sigma)) * np.exp(-(t * t) / (2.0 * sigma * sigma)) \
        / (sigma * math.sqrt(2.0 * math.pi))
    return float(out) if out.ndim == 0 else out


def _impulse_factory(sigma):
    """Fast scalar delta/doublet closures; tails beyond 8 sigma (below
    1e-13 of the peak) are rounded to zero."""
    inv = 1.0 / (sigma * math.sqrt(2.0 * math.pi))
    half = 0.5 / (sigma * sigma)
    two = 1.0 / (sigma * sigma)
    cut = 8.0 * sigma

    def delta(t):
        if -cut < t < cut:
            return inv * math.exp(-t * t * half)
        return 0.0

    def doublet(t):
        if -cut < t < cut:
            return -t * two * inv * math.exp(-t * t * half)
        return 0.0

    return delta, doublet


class _ScalarPlant:
    """Adapter for a plain scalar nonlinearity (no domain bookkeeping)."""

    def __init__(self, f):
        self.f = f
        self.pending_exits = ()

    def __call__(self, y):
        return self.f(y)

    def piece(self, y):
        raise TypeError("plain callables have no affine pieces")

    def drain(self):
        return ()


class _AffinePlant:
    """Single-region affine plant a*y + b (whole real line)."""

    def __init__(self, a, b):
        self.a = float(a)
        self.b = float(b)

    def __call__(self, y):
        return self.a * y + self.b

    def piece(self, y):
        return self.a, self.b

    def drain(self):
        return ()

    @property
    def b0(self):
        return self.b


class PwlPlantRuntime:
    """Mutable view of a 1-d piecewise-linear plant during simulation.

    Wraps a :class:`~pwlpid.approx.PwlApprox` over a regular grid and
    resolves the active affine piece in O(1) from the cell index.  When
    the state leaves the box the configured policy applies: reject,
    extrapolate the boundary piece and flag, or expand the box by 50% of
    its width on the violated side and rebuild the interpolant at the
    same cells-per-unit density.
    """

    def __init__(self, approx, policy="expand_and_rebuild"):
        if approx.dim != 1:
            raise ValueError("runtime plant lookup supports 1-d plants only")
        if policy not in DOMAIN_POLICIES:
            raise ValueError(f"unknown domain policy {policy!r}")
        if policy == "expand_and_rebuild" and approx.source is None:
            raise ValueError(
                "expand_and_rebuild needs the interpolated function; build "
                "the approximation with pwlpid.approx.build")
        self.policy = policy
        self.pending_exits = []
        self.rebuild_count = 0
        self._install(approx)

    def _install(self, approx):
        self.approx = approx
        dom = approx.partition.domain
        self.lo = dom.lower[0]
        self.hi = dom.upper[0]
        self.cells = approx.partition.cells_per_axis[0]
        self.inv_delta = self.cells / (self.hi - self.lo)
        self.a = approx.a[:, 0].copy()
        self.b = approx.b.copy()

    def piece(self, y):
        """(slope, intercept) of the region containing ``y``."""
        if y < self.lo or y > self.hi or not math.isfinite(y):
            self._outside(y)
            # expand_and_rebuild made y interior; the other policies
            # continue the outermost piece.
            if y < self.lo:
                return self.a[0], self.b[0]
            if y > self.hi:
                return self.a[-1], self.b[-1]
        idx = int((y - self.lo) * self.inv_delta)
        if idx < 0:
            idx = 0
        elif idx >= self.cells:
            idx = self.cells - 1
        return self.a[idx], self.b[idx]

    def __call__(self, y):
        a, b = self.piece(y)
        return a * y + b

    def _outside(self, y):
        if not math.isfinite(y):
            raise OverflowError(f"plant state is not finite: {y}")
        self.pending_exits.append(float(y))
        if self.policy == "reject":
            raise DomainExit(f"state {y} left domain [{self.lo}, {self.hi}]")
        if self.policy == "expand_and_rebuild":
            self._expand(y)

    MAX_REBUILD_CELLS = 1_000_000

    def _expand(self, y):
        density = self.cells / (self.hi - self.lo)
        lo, hi = self.lo, self.hi
        while y < lo:
            lo -= 0.5 * (hi - lo)
        while y > hi:
            hi += 0.5 * (hi - lo)
        new_cells = max(1, int(round(density * (hi - lo))))
        if new_cells > self.MAX_REBUILD_CELLS:
            raise OverflowError(
                f"domain expansion to [{lo:g}, {hi:g}] would need {new_cells} "
                f"cells; treating as divergence")
        part = kuhn_partition(((lo,), (hi,)), [new_cells])
        self._install(build(self.approx.source, part))
        self.rebuild_count += 1
        log.info("expanded plant domain to [%g, %g] (%d cells) after exit at y=%g",
                 lo, hi, new_cells, y)

    def drain(self):
        out = tuple(self.pending_exits)
        self.pending_exits.clear()
        return out

    @property
    def b0(self):
        """Intercept of the region containing y = 0."""
        return self.piece(0.0)[1]


def _as_runtime(plant_f, cfg):
    if isinstance(plant_f, (PwlPlantRuntime, _AffinePlant, _ScalarPlant)):
        return plant_f
    if isinstance(plant_f, PwlApprox):
        return PwlPlantRuntime(plant_f, policy=cfg.domain_policy)
    if isinstance(plant_f, tuple) and len(plant_f) == 2:
        return _AffinePlant(*plant_f)
    if callable(plant_f):
        return _ScalarPlant(plant_f)
    raise TypeError(f"cannot interpret plant {plant_f!r}")


def _grid(cfg):
    lead = cfg.lead_steps
    steps = lead + int(round(cfg.horizon / cfg.dt))
    times = (np.arange(steps + 1) - lead) * cfg.dt
    return times, steps


def simulate_state_space(plant_f, gains, cfg=SimConfig()):
    """Integrate the reduced closed loop in (y, int e) coordinates.

    The PID output u = kp e + ki int(e) + kd e' with e = step(t) - y
    folds into (1 + kd) y' = -f(y) + kp e + ki int(e) + kd delta(t);
    the region of a piecewise-linear plant is re-resolved at every RK4
    stage.  Starts from the zero state at t = -lead.
    """
    if not isinstance(gains, PidGains):
        gains = PidGains(*gains)
    kp, ki, kd = gains.kp, gains.ki, gains.kd
    plant = _as_runtime(plant_f, cfg)
    delta, _ = _impulse_factory(cfg.sigma)
    times, steps = _grid(cfg)
    dt = cfg.dt
    half = 0.5 * dt
    sixth = dt / 6.0
    scale = 1.0 / (1.0 + kd)

    ys = np.empty(steps + 1)
    dys = np.empty(steps + 1)
    us = np.empty(steps + 1)
    es = np.empty(steps + 1)
    exits = []

    y = 0.0
    z = 0.0
    for k in range(steps + 1):
        t = float(times[k])
        try:
            e = (1.0 if t >= 0.0 else 0.0) - y
            d0 = delta(t)
            dy = (-plant(y) + kp * e + ki * z + kd * d0) * scale
        except _DIVERGENCE_ERRORS as exc:
            raise NonFiniteState(
                t, _partial_trajectory(times, ys, dys, us, es, exits, k)) from exc
        ys[k] = y
        dys[k] = dy
        es[k] = e
        us[k] = kp * e + ki * z + kd * (d0 - dy)
        if k == steps:
            break

        try:
            # RK4 on (y, z) with z' = e.  The reference step is frozen at
            # its value on [t, t+dt): the jump sits exactly on a grid
            # node, so the right-hand side stays smooth inside every
            # step and the integrator keeps its full order.  Stage 1
            # reuses the recorded sample (eta(t) equals the frozen value
            # at the step start).
            r_step = 1.0 if t >= 0.0 else 0.0
            t2 = t + half
            e2 = r_step - (y + half * dy)
            dy2 = (-plant(y + half * dy) + kp * e2 + ki * (z + half * e)
                   + kd * delta(t2)) * scale
            e3 = r_step - (y + half * dy2)
            dy3 = (-plant(y + half * dy2) + kp * e3 + ki * (z + half * e2)
                   + kd * delta(t2)) * scale
            e4 = r_step - (y + dt * dy3)
            dy4 = (-plant(y + dt * dy3) + kp * e4 + ki * (z + dt * e3)
                   + kd * delta(t + dt)) * scale
            y += sixth * (dy + 2.0 * dy2 + 2.0 * dy3 + dy4)
            z += sixth * (e + 2.0 * e2 + 2.0 * e3 + e4)
        except _DIVERGENCE_ERRORS as exc:
            raise NonFiniteState(
                t, _partial_trajectory(times, ys, dys, us, es, exits, k + 1)) from exc
        for ye in plant.drain():
            exits.append((t, ye))
        if not (math.isfinite(y) and abs(y) < DIVERGENCE_LIMIT and math.isfinite(z)):
            raise NonFiniteState(
                float(times[k + 1]),
                _partial_trajectory(times, ys, dys, us, es, exits, k + 1))

    return Trajectory(times=times, y=ys, dy=dys, u=us, e=es,
                      domain_exits=exits)


def simulate_impulsive_model(schedule, gains, cfg=SimConfig()):
    """Integrate the differentiated second-order closed-loop model.

    ``schedule`` supplies the per-region affine pieces: either a 1-d
    :class:`~pwlpid.approx.PwlApprox` or an ``(a, b)`` pair for a single
    global region.  The slope is re-resolved from the current y at every
    stage; the impulse coefficient (kp - b0) uses the region containing
    y(0) = 0.  Starts from the zero state at t = -lead.
    """
    if not isinstance(gains, PidGains):
        gains = PidGains(*gains)
    kp, ki, kd = gains.kp, gains.ki, gains.kd
    plant = _as_runtime(schedule, cfg)
    if isinstance(plant, _ScalarPlant):
        raise TypeError("the second-order model needs affine pieces; pass a "
                        "PwlApprox or an (a, b) pair")
    b0 = plant.b0
    delta, doublet = _impulse_factory(cfg.sigma)
    times, steps = _grid(cfg)
    dt = cfg.dt
    half = 0.5 * dt
    sixth = dt / 6.0
    scale = 1.0 / (1.0 + kd)
    kpb = kp - b0

    ys = np.empty(steps + 1)
    dys = np.empty(steps + 1)
    us = np.empty(steps + 1)
    es = np.empty(steps + 1)
    exits = []

    def accel(t, y, v, r_step):
        a_reg = plant.piece(y)[0]
        return (kpb * delta(t) + ki * r_step + kd * doublet(t)
                - (a_reg + kp) * v - ki * y) * scale

    y = 0.0
    v = 0.0
    z = 0.0  # running int of e, for reporting u only
    for k in range(steps + 1):
        t = float(times[k])
        e = (1.0 if t >= 0.0 else 0.0) - y
        ys[k] = y
        dys[k] = v
        es[k] = e
        us[k] = kp * e + ki * z + kd * (delta(t) - v)
        if k == steps:
            break

        try:
            # Reference step frozen on [t, t+dt), as in the state-space
            # integrator; the impulse approximations are smooth and stay
            # time-exact.
            r_step = 1.0 if t >= 0.0 else 0.0
            t2 = t + half
            t4 = t + dt
            dv1 = accel(t, y, v, r_step)
            dv2 = accel(t2, y + half * v, v + half * dv1, r_step)
            dy2 = v + half * dv1
            dv3 = accel(t2, y + half * dy2, v + half * dv2, r_step)
            dy3 = v + half * dv2
            dv4 = accel(t4, y + dt * dy3, v + dt * dv3, r_step)
            dy4 = v + dt * dv3
            e2 = r_step - (y + half * v)
            e3 = r_step - (y + half * dy2)
            e4 = r_step - (y + dt * dy3)
            y += sixth * (v + 2.0 * dy2 + 2.0 * dy3 + dy4)
            v += sixth * (dv1 + 2.0 * dv2 + 2.0 * dv3 + dv4)
            z += sixth * (e + 2.0 * e2 + 2.0 * e3 + e4)
        except _DIVERGENCE_ERRORS as exc:
            raise NonFiniteState(
                t, _partial_trajectory(times, ys, dys, us, es, exits, k + 1)) from exc
        for ye in plant.drain():
            exits.append((t, ye))
        if not (math.isfinite(y) and abs(y) < DIVERGENCE_LIMIT and math.isfinite(v)):
            raise NonFiniteState(
                float(times[k + 1]),
                _partial_trajectory(times, ys, dys, us, es, exits, k + 1))

    return Trajectory(times=times, y=ys, dy=dys, u=us, e=es,
                      domain_exits=exits)


def _partial_trajectory(times, ys, dys, us, es, exits, count):
    return Trajectory(times=times[:count], y=ys[:count], dy=dys[:count],
                      u=us[:count], e=es[:count], domain_exits=list(exits))


@dataclass(frozen=True)
class ConvergenceReport:
    """Mesh-refinement sweep: per h, the interpolation error eps_f, the
    closed-loop sup-norm deviation from the exact-plant reference, and
    the Gronwall envelope eps_f * (exp(Lt*t) - 1) / Lt evaluated at
    ``bound_horizon`` (the bound grows exponentially, so it is only
    informative on a short sub-horizon)."""

    h_values: tuple
    max_diams: tuple
    epsilon_f: tuple
    sup_errors: tuple
    gronwall_bounds: tuple
    bound_horizon: float
    bound_window_sup_errors: tuple
    startup_window: float

    def to_dict(self):
        by_h = {}
        for i, h in enumerate(self.h_values):
            by_h[str(h)] = {
                "max_diam": self.max_diams[i],
                "eps_f": self.epsilon_f[i],
                "sup_error": self.sup_errors[i],
                "gronwall_bound": self.gronwall_bounds[i],
                "bound_window_sup_error": self.bound_window_sup_errors[i],
            }
        return {"h_values": list(self.h_values), "by_h": by_h,
                "bound_horizon": self.bound_horizon,
                "startup_window": self.startup_window}

    def to_json(self, indent=None):
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["h", "max_diam", "eps_f", "sup_error", "gronwall_bound"])
        for i, h in enumerate(self.h_values):
            writer.writerow([h, repr(self.max_diams[i]), repr(self.epsilon_f[i]),
                             repr(self.sup_errors[i]),
                             repr(self.gronwall_bounds[i])])
        return buf.getvalue()


def converge_sweep(plant, domain, gains, h_list, cfg=SimConfig(),
                   ref_refinement=10):
    """Refine the plant approximation and measure closed-loop convergence.

    The reference trajectory integrates the exact nonlinearity at
    dt / ``ref_refinement``; each h in ``h_list`` (ascending cell
    counts) is simulated on the coarse grid and compared on the shared
    samples over [startup_window, T].
    """
    h_list = [int(h) for h in h_list]
    if any(b <= a for a, b in zip(h_list, h_list[1:])):
        raise ValueError("h_list must be strictly increasing")
    if plant.order != 1:
        raise ValueError("convergence sweep supports first-order plants")
    if plant.hessian_bound is None:
        raise ValueError("plant needs a hessian_bound for the certificate")

    ref_cfg = replace(cfg, dt=cfg.dt / ref_refinement)
    ref = simulate_state_space(plant.f, gains, ref_cfg)
    ref_y = ref.y[::ref_refinement]

    times, _ = _grid(cfg)
    metric_mask = times >= cfg.startup_window - 1e-12
    bound_horizon = min(2.0, cfg.horizon)
    bound_mask = metric_mask & (times <= bound_horizon + 1e-12)
    lt = plant.lifted_L()

    max_diams, eps_fs, sups, bounds, bound_sups = [], [], [], [], []
    for h in h_list:
        part = kuhn_partition(domain, [h])
        ap = build(plant.f, part)
        cert = certify(ap, plant.f, plant.hessian_bound)
        traj = simulate_state_space(ap, gains, cfg)
        if traj.y.size != ref_y.size:
            raise RuntimeError("reference and sweep grids are misaligned")
        diff = np.abs(traj.y - ref_y)
        eps_f = cert.sup_error_measured
        max_diams.append(part.max_diam)
        eps_fs.append(eps_f)
        sups.append(float(np.max(diff[metric_mask])))
        bounds.append(eps_f * (math.exp(lt * bound_horizon) - 1.0) / lt)
        bound_sups.append(float(np.max(diff[bound_mask])))

    return ConvergenceReport(
        h_values=tuple(h_list),
        max_diams=tuple(max_diams),
        epsilon_f=tuple(eps_fs),
        sup_errors=tuple(sups),
        gronwall_bounds=tuple(bounds),
        bound_horizon=bound_horizon,
        bound_window_sup_errors=tuple(bound_sups),
        startup_window=cfg.startup_window,
    )
