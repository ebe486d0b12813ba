"""Figure rendering for the CLI report paths.

Every command that writes CSV/JSON artifacts can also render the
matching figure next to them; these helpers own the matplotlib usage so
the numeric modules stay plot-free.  The Agg backend keeps rendering
headless.
"""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .sim import gaussian_delta, gaussian_doublet

DPI = 150


def _save(fig, path):
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def step_response_figure(traj, path, title="Closed-loop step response",
                         setpoint=1.0, extra=None):
    """Plot y(t) against the setpoint, with the control signal below.

    ``extra`` optionally adds (label, times, values) overlays on the
    output axis (e.g. an analytic reference).
    """
    fig, (ax_y, ax_u) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    ax_y.plot(traj.times, traj.y, label="y(t)")
    ax_y.axhline(setpoint, color="k", linestyle="--", linewidth=0.8,
                 label="setpoint")
    if extra:
        for label, ts, vals in extra:
            ax_y.plot(ts, vals, linestyle=":", label=label)
    ax_y.set_ylabel("output")
    ax_y.legend()
    ax_y.grid(True, alpha=0.3)
    ax_y.set_title(title)

    ax_u.plot(traj.times, traj.u, color="tab:orange")
    ax_u.set_ylabel("control u")
    ax_u.set_xlabel("time [s]")
    ax_u.grid(True, alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def segments_figure(f, approx, path, title="Piecewise linear approximation",
                    samples=600):
    """Overlay a 1-d nonlinearity and its interpolant, marking the knots."""
    dom = approx.partition.domain
    lo, hi = dom.lower[0], dom.upper[0]
    ys = np.linspace(lo, hi, samples)
    fig, ax = plt.subplots(figsize=(7, 5))
    ax.plot(ys, [f(float(y)) for y in ys], label="f(y)")
    ax.plot(ys, [approx.evaluate((y,)) for y in ys], "--",
            label=f"interpolant (h={approx.h})")
    knots = approx.partition.vertices[:, 0]
    ax.plot(knots, approx.vertex_values, "o", markersize=4, color="tab:red",
            label="knots")
    ax.set_xlabel("y")
    ax.set_ylabel("f(y)")
    ax.legend()
    ax.grid(True, alpha=0.3)
    ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def convergence_figure(report, path, title="Mesh refinement convergence"):
    """Log-log sup-error and interpolation error against the mesh size."""
    fig, ax = plt.subplots(figsize=(7, 5))
    ax.loglog(report.max_diams, report.sup_errors, "o-",
              label="closed-loop sup error")
    ax.loglog(report.max_diams, report.epsilon_f, "s--",
              label="interpolation error")
    ref = [report.sup_errors[0] * (d / report.max_diams[0]) ** 2
           for d in report.max_diams]
    ax.loglog(report.max_diams, ref, ":", color="gray", label="slope 2")
    ax.set_xlabel("max cell diameter")
    ax.set_ylabel("error")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def tuning_history_figure(report, path, title="Swarm best cost per iteration"):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(range(len(report.history)), report.history, "o-")
    ax.set_xlabel("iteration")
    ax.set_ylabel("best cost J")
    ax.set_yscale("log")
    ax.grid(True, alpha=0.3)
    ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def impulse_figure(sigma, path, title=None):
    """The Gaussian delta and doublet approximations side by side."""
    t = np.linspace(-5 * sigma, 5 * sigma, 801)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.plot(t, gaussian_delta(t, sigma))
    ax1.set_title(f"delta, sigma={sigma:g}")
    ax1.set_xlabel("time [s]")
    ax1.grid(True, alpha=0.3)
    ax2.plot(t, gaussian_doublet(t, sigma), color="tab:red")
    ax2.set_title(f"doublet, sigma={sigma:g}")
    ax2.set_xlabel("time [s]")
    ax2.grid(True, alpha=0.3)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    return _save(fig, path)
