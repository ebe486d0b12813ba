import numpy as np
import pytest

from pwlpid import EXAMPLE1_BASELINE_GAINS, DomainExit, NonFiniteState, PidGains, \
    SimConfig, analytic_step_example1, build, closed_loop, converge_sweep, \
    gaussian_delta, gaussian_doublet, kuhn_partition, region_tf, routh_stable, \
    simulate_impulsive_model, simulate_state_space
from pwlpid.sim import PwlPlantRuntime
from pwlpid.tf import analytic_step_example1_derivatives


# ----------------------------------------------------------------------
# Gaussian impulse approximations

def test_gaussian_delta_peak_value():
    assert gaussian_delta(0.0, 0.01) == pytest.approx(39.894228040143275)


def test_gaussian_delta_even():
    for t in (0.003, 0.01, 0.02):
        assert gaussian_delta(t, 0.01) == gaussian_delta(-t, 0.01)


def test_gaussian_delta_unit_mass():
    sigma = 0.01
    t = np.arange(-5 * sigma, 5 * sigma + sigma / 100, sigma / 100)
    mass = np.trapezoid(gaussian_delta(t, sigma), t)
    assert mass == pytest.approx(1.0, abs=1e-6)


def test_gaussian_doublet_odd_and_zero_at_origin():
    assert gaussian_doublet(0.0, 0.01) == 0.0
    assert gaussian_doublet(0.004, 0.01) == -gaussian_doublet(-0.004, 0.01)


def test_gaussian_doublet_first_moment():
    sigma = 0.01
    t = np.arange(-5 * sigma, 5 * sigma + sigma / 200, sigma / 200)
    moment = np.trapezoid(t * gaussian_doublet(t, sigma), t)
    assert moment == pytest.approx(-1.0, abs=1e-4)


def test_gaussian_doublet_matches_finite_difference():
    sigma = 0.01
    for t in np.linspace(-3 * sigma, 3 * sigma, 61):
        fd = (gaussian_delta(t + 1e-7, sigma) - gaussian_delta(t - 1e-7, sigma)) / 2e-7
        assert gaussian_doublet(t, sigma) == pytest.approx(fd, rel=1e-6, abs=1e-4)


def test_sim_config_validation():
    with pytest.raises(ValueError):
        SimConfig(dt=0.01, sigma=0.01)  # dt > sigma/5
    with pytest.raises(ValueError):
        SimConfig(horizon=-1.0)
    with pytest.raises(ValueError):
        SimConfig(domain_policy="bounce")
    with pytest.raises(ValueError):
        SimConfig(integrator="euler")


# ----------------------------------------------------------------------
# state-space loop

def test_state_space_matches_analytic_oracle(example1):
    cfg = SimConfig()
    traj = simulate_state_space(example1.f, EXAMPLE1_BASELINE_GAINS, cfg)
    assert traj.times[0] == pytest.approx(-0.08)
    assert traj.y[0] == 0.0 and traj.dy[0] == 0.0
    mask = traj.times >= 0.05
    oracle = analytic_step_example1(traj.times[mask])
    assert np.max(np.abs(traj.y[mask] - oracle)) < 5e-3


def test_zero_gains_zero_forcing(example1):
    traj = simulate_state_space(example1.f, PidGains(0, 0, 0),
                                SimConfig(horizon=2.0))
    assert np.all(traj.y == 0.0)
    assert np.all(traj.u == 0.0)
    assert np.all(traj.dy == 0.0)


def test_example2_pwl_settles(example2, part6):
    ap = build(example2.f, part6)
    traj = simulate_state_space(ap, PidGains(4.65, 10.0, 0.0), SimConfig())
    assert abs(traj.final_value() - 1.0) <= 0.01


def test_rk4_fourth_order_on_smooth_loop(example1):
    # kd = 0 keeps the forcing smooth (no impulse), so truncation
    # dominates; gains (1,0,0) give y(t) = (1 - exp(-3t))/3 exactly
    gains = PidGains(1.0, 0.0, 0.0)
    errs = []
    for dt in (0.02, 0.01):
        cfg = SimConfig(dt=dt, sigma=0.1, horizon=8.0)
        traj = simulate_state_space(example1.f, gains, cfg)
        mask = traj.times >= 0.0
        exact = (1.0 - np.exp(-3.0 * traj.times[mask])) / 3.0
        errs.append(np.max(np.abs(traj.y[mask] - exact)))
    assert errs[0] / errs[1] >= 8.0


# ----------------------------------------------------------------------
# second-order impulsive model

def test_impulsive_model_post_initial_state(example1):
    part = kuhn_partition(((-3.0,), (3.0,)), [6])
    ap = build(example1.f, part)
    cfg = SimConfig()
    traj = simulate_impulsive_model(ap, EXAMPLE1_BASELINE_GAINS, cfg)
    # after the impulse window the state follows the post-initial values
    # (0.2, 1.216) propagated by the analytic solution
    t_check = 10 * cfg.sigma
    y_sim, dy_sim = traj.sample_at(t_check)
    y_ref, dy_ref, _ = analytic_step_example1_derivatives(t_check)
    assert y_sim == pytest.approx(y_ref, rel=0.02)
    assert dy_sim == pytest.approx(dy_ref, rel=0.02)


def test_impulsive_model_zero_gains_affine():
    traj = simulate_impulsive_model((2.0, 0.0), PidGains(0, 0, 0),
                                SimConfig(horizon=2.0))
    assert np.all(traj.y == 0.0)


def test_impulsive_model_agrees_with_state_space(example1):
    cfg = SimConfig()
    gains = EXAMPLE1_BASELINE_GAINS
    ss = simulate_state_space(example1.f, gains, cfg)
    pm = simulate_impulsive_model((2.0, 0.0), gains, cfg)
    mask = ss.times >= 25 * cfg.sigma
    assert np.max(np.abs(pm.y[mask] - ss.y[mask])) <= 1e-2


def test_cross_simulator_agreement_random_stable_gains(example1):
    # the differentiated second-order model and the reduced state-space
    # loop describe the same dynamics
    rng = np.random.default_rng(47)
    cfg = SimConfig(horizon=5.0)
    plant_tf = region_tf([2.0])
    checked = 0
    while checked < 20:
        gains = PidGains(*rng.uniform(0.0, 10.0, 3))
        if not routh_stable(closed_loop(plant_tf, gains).den.coeffs):
            continue
        ss = simulate_state_space(example1.f, gains, cfg)
        pm = simulate_impulsive_model((2.0, 0.0), gains, cfg)
        mask = ss.times >= cfg.startup_window
        assert np.max(np.abs(pm.y[mask] - ss.y[mask])) <= 1e-2
        checked += 1


def test_final_value_with_integral_action(example1):
    # ki > 0 plus a stable loop means the integral action removes the
    # steady-state error; Routh screens stability, a root-speed floor
    # keeps the limit observable at a finite horizon
    rng = np.random.default_rng(53)
    plant_tf = region_tf([2.0])
    cfg = SimConfig(dt=2e-3, horizon=40.0)
    checked = 0
    while checked < 8:
        gains = PidGains(*rng.uniform(0.05, 10.0, 3))
        den = closed_loop(plant_tf, gains).den.coeffs
        if not routh_stable(den):
            continue
        roots = np.roots(den[::-1])
        if np.max(roots.real) > -0.25:
            continue  # too slow to settle within the horizon
        traj = simulate_state_space(example1.f, gains, cfg)
        assert abs(traj.final_value() - 1.0) <= 1e-3, gains
        checked += 1


def test_impulse_width_insensitivity(example1):
    # halving sigma changes the post-window state by < 1%
    gains = EXAMPLE1_BASELINE_GAINS
    states = []
    for sigma in (0.01, 0.005):
        cfg = SimConfig(dt=sigma / 10, sigma=sigma, horizon=1.0)
        traj = simulate_state_space(example1.f, gains, cfg)
        states.append(traj.sample_at(10 * 0.01))
    (y1, dy1), (y2, dy2) = states
    assert abs(y2 - y1) / abs(y1) < 0.01
    assert abs(dy2 - dy1) / abs(dy1) < 0.01


def test_divergent_gains_raise_nonfinite(example1):
    # an unstable loop must fail loudly with the partial trajectory
    def antistable(y):
        return -5.0 * y  # plant pole at +5, ki=kp=0 leaves it unstable

    with pytest.raises(NonFiniteState) as err:
        simulate_state_space(antistable, PidGains(0.0, 0.0, 0.5),
                             SimConfig(horizon=50.0))
    partial = err.value.trajectory
    assert partial is not None
    assert partial.times.size < 50_000
    assert np.all(np.isfinite(partial.y))


# ----------------------------------------------------------------------
# domain policies

def _drifting_plant():
    # constant negative drive pushes y up and out of a small domain
    part = kuhn_partition(((-0.5,), (0.5,)), [4])
    return build(lambda y: -1.0, part)


def test_policy_reject_raises():
    ap = _drifting_plant()
    with pytest.raises(DomainExit):
        simulate_state_space(PwlPlantRuntime(ap, policy="reject"),
                             PidGains(0.0, 0.0, 0.0), SimConfig(horizon=2.0))


def test_policy_extrapolate_flags_exits():
    ap = _drifting_plant()
    runtime = PwlPlantRuntime(ap, policy="extrapolate_and_flag")
    traj = simulate_state_space(runtime, PidGains(0.0, 0.0, 0.0),
                                SimConfig(horizon=2.0))
    assert traj.domain_exits
    t_first, y_first = traj.domain_exits[0]
    assert y_first > 0.5
    assert traj.final_value() > 0.5  # integrates straight through


def test_policy_expand_and_rebuild(example2):
    part = kuhn_partition(((-0.5,), (0.5,)), [2])
    ap = build(example2.f, part)
    runtime = PwlPlantRuntime(ap, policy="expand_and_rebuild")
    traj = simulate_state_space(runtime, PidGains(4.65, 10.0, 0.0), SimConfig())
    assert runtime.rebuild_count >= 1
    assert runtime.hi >= 1.0  # grew to cover the setpoint
    assert traj.domain_exits
    assert abs(traj.final_value() - 1.0) <= 0.01
    # density preserved: 2 cells per unit width
    assert runtime.cells == pytest.approx(2 * (runtime.hi - runtime.lo), abs=1)


def test_affine_plant_pwl_is_exact_per_h(example1):
    # piecewise interpolation of an affine plant is exact for every h
    gains = PidGains(1.5, 2.0, 0.0)
    cfg = SimConfig(horizon=4.0)
    ref = simulate_state_space(example1.f, gains, cfg)
    for cells in (1, 3, 17):
        part = kuhn_partition(((-3.0,), (3.0,)), [cells])
        ap = build(example1.f, part)
        traj = simulate_state_space(ap, gains, cfg)
        assert np.max(np.abs(traj.y - ref.y)) < 1e-8


# ----------------------------------------------------------------------
# convergence sweep

def test_converge_sweep_example2(example2):
    cfg = SimConfig()
    report = converge_sweep(example2, (-3.0, 3.0), PidGains(4.65, 10.0, 0.0),
                            [6, 12, 24, 48], cfg)
    sups = report.sup_errors
    assert all(b < a for a, b in zip(sups, sups[1:]))
    assert sups[-1] < sups[0] / 8.0
    # interpolation errors obey the certificate 0.5*2*diam^2
    for eps, diam in zip(report.epsilon_f, report.max_diams):
        assert eps <= diam * diam
    # Gronwall envelope holds on the short sub-horizon
    for sup_w, bound in zip(report.bound_window_sup_errors,
                            report.gronwall_bounds):
        assert sup_w <= bound
    slope = np.polyfit(np.log(report.max_diams), np.log(sups), 1)[0]
    assert slope >= 1.5
    # non-increasing with 10% slack
    for a, b in zip(sups, sups[1:]):
        assert b <= 1.1 * a


def test_converge_sweep_requires_increasing_h(example2):
    with pytest.raises(ValueError):
        converge_sweep(example2, (-3.0, 3.0), PidGains(1, 1, 0), [6, 6],
                       SimConfig(horizon=1.0))


def test_converge_report_serialization(example2):
    report = converge_sweep(example2, (-3.0, 3.0), PidGains(4.65, 10.0, 0.0),
                            [4, 8], SimConfig(horizon=2.0))
    payload = report.to_dict()
    assert payload["h_values"] == [4, 8]
    assert set(payload["by_h"]["4"]) == {"max_diam", "eps_f", "sup_error",
                                         "gronwall_bound",
                                         "bound_window_sup_error"}
    csv_text = report.to_csv()
    assert csv_text.splitlines()[0] == "h,max_diam,eps_f,sup_error,gronwall_bound"


# ----------------------------------------------------------------------
# trajectory surface

def test_trajectory_csv_format(example1):
    traj = simulate_state_space(example1.f, PidGains(1, 1, 0),
                                SimConfig(horizon=0.5))
    lines = traj.to_csv().splitlines()
    assert lines[0] == "t,y,dy,u,e"
    assert len(lines) == traj.times.size + 1


def test_trajectory_uniform_spacing(example1):
    traj = simulate_state_space(example1.f, PidGains(1, 1, 0),
                                SimConfig(horizon=0.5))
    steps = np.diff(traj.times)
    assert np.allclose(steps, steps[0], rtol=0, atol=1e-12)
    assert {len(traj.y), len(traj.dy), len(traj.u), len(traj.e)} == \
        {traj.times.size}
