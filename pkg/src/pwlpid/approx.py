"""Continuous piecewise-linear interpolation over simplicial partitions.

Builds the interpolant that agrees with a scalar function at every
partition vertex, caches one affine piece (gradient ``a``, intercept
``b``) per simplex, and produces interpolation-error and Lipschitz
certificates.  The cached pieces make evaluation O(locate); the closed
-loop simulator queries them millions of times.
"""

from dataclasses import dataclass
import csv
import io
import json
import math
import warnings

import numpy as np

from .partition import PointOutsideDomain, SimplicialPartition


class DomainExitWarning(UserWarning):
    """Issued when evaluation extrapolates beyond the partitioned box."""


class DegenerateSimplexError(ValueError):
    """Interpolation system is singular (cannot occur for Kuhn grids)."""


def _call_scalar(f, point, n):
    """Call a user function: plain float for 1-d domains, array otherwise."""
    if n == 1:
        return float(f(float(point[0])))
    return float(f(np.asarray(point, dtype=float)))


@dataclass(frozen=True)
class ApproxCertificate:
    """Interpolation quality report.

    ``sup_error_estimate`` is the a-priori bound
    0.5 * hessian_bound * max_diam**2; ``sup_error_measured`` is the
    observed maximum |f - interpolant| over a dense sample grid and is
    bounded by the estimate whenever the supplied Hessian bound is valid.
    """

    sup_error_estimate: float
    sup_error_measured: float
    lipschitz_pwl: float
    hessian_bound_used: float

    def to_dict(self):
        return {
            "sup_error_estimate": self.sup_error_estimate,
            "sup_error_measured": self.sup_error_measured,
            "lipschitz_pwl": self.lipschitz_pwl,
            "hessian_bound_used": self.hessian_bound_used,
        }

    def to_json(self, indent=None):
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)


@dataclass(frozen=True)
class PwlApprox:
    """Piecewise-affine interpolant of a scalar function on a partition.

    Each simplex i carries the affine piece a[i] . y + b[i]; the pieces
    agree with the vertex values, so the interpolant is continuous
    across shared facets.  Immutable after build; concurrent evaluation
    is safe.
    """

    partition: SimplicialPartition
    vertex_values: np.ndarray    # (n_vertices,)
    a: np.ndarray                # (h, n) per-simplex gradients
    b: np.ndarray                # (h,) per-simplex intercepts
    source: object = None        # function the interpolant was built from

    @property
    def dim(self):
        return self.partition.dim

    @property
    def h(self):
        return self.partition.h

    def lipschitz_pwl(self):
        """max_i |a_i|, the Lipschitz constant of the interpolant."""
        return float(np.max(np.linalg.norm(self.a, axis=1)))

    # ------------------------------------------------------------------
    # evaluation

    def piece_at(self, point, extrapolate=False, tol=None):
        """Locate the affine piece governing ``point``.

        Returns ``(index, outside)``.  Outside the box the nearest
        boundary simplex is used when ``extrapolate`` is set (the
        outermost affine piece continues); otherwise
        :class:`PointOutsideDomain` propagates.
        """
        p = np.atleast_1d(np.asarray(point, dtype=float))
        kwargs = {} if tol is None else {"tol": tol}
        try:
            bc = self.partition.locate(p, **kwargs)
            return bc.simplex_index, False
        except PointOutsideDomain:
            if not extrapolate:
                raise
            lower = np.asarray(self.partition.domain.lower)
            upper = np.asarray(self.partition.domain.upper)
            clipped = np.clip(p, lower, upper)
            bc = self.partition.locate(clipped, **kwargs)
            warnings.warn(
                f"evaluating outside domain at {p.tolist()}; continuing the "
                f"boundary piece", DomainExitWarning, stacklevel=2)
            return bc.simplex_index, True

    def evaluate(self, point, extrapolate=False):
        """Value of the interpolant at ``point`` (affine continuation
        outside the box when ``extrapolate`` is set)."""
        p = np.atleast_1d(np.asarray(point, dtype=float))
        idx, _ = self.piece_at(p, extrapolate=extrapolate)
        return float(self.a[idx] @ p + self.b[idx])

    def __call__(self, point, extrapolate=False):
        return self.evaluate(point, extrapolate=extrapolate)

    # ------------------------------------------------------------------
    # export

    def segment_rows(self):
        """One row per simplex: index, vertex ids, gradient components, b."""
        rows = []
        for i in range(self.h):
            rows.append({
                "index": i,
                "vertices": [int(v) for v in self.partition.simplices[i]],
                "a": [float(c) for c in self.a[i]],
                "b": float(self.b[i]),
            })
        return rows

    def segments_to_json(self, indent=None):
        return json.dumps(self.segment_rows(), indent=indent, sort_keys=True)

    def segments_to_csv(self):
        n = self.dim
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = (["index"]
                  + [f"v{j}" for j in range(n + 1)]
                  + [f"a{k}" for k in range(n)]
                  + ["b"])
        writer.writerow(header)
        for row in self.segment_rows():
            writer.writerow([row["index"], *row["vertices"],
                             *[repr(c) for c in row["a"]], repr(row["b"])])
        return buf.getvalue()


def build(f, partition):
    """Interpolate ``f`` at the partition vertices.

    Per simplex the affine coefficients (a_i, b_i) solve the n+1 vertex
    interpolation conditions; evaluating the piece at any interior point
    reproduces the barycentric combination of the vertex values.

    ``f`` receives a plain float for 1-d domains and an ndarray of shape
    (n,) otherwise.
    """
    n = partition.dim
    values = np.array(
        [_call_scalar(f, v, n) for v in partition.vertices], dtype=float)

    h = partition.h
    a = np.empty((h, n))
    b = np.empty(h)
    for i in range(h):
        verts = partition.simplex_vertices(i)
        mat = np.ones((n + 1, n + 1))
        mat[:, :n] = verts
        rhs = values[partition.simplices[i]]
        try:
            coef = np.linalg.solve(mat, rhs)
        except np.linalg.LinAlgError as exc:
            raise DegenerateSimplexError(
                f"simplex {i} is degenerate: {exc}") from exc
        a[i] = coef[:n]
        b[i] = coef[n]
    return PwlApprox(partition=partition, vertex_values=values, a=a, b=b,
                     source=f)


def default_sample_grid(n):
    """Default per-axis sample density for certificates."""
    return 1001 if n == 1 else 201


def certify(approx, f, hessian_bound, samples_per_axis=None):
    """Measure interpolation error and bound it a priori.

    ``hessian_bound`` must dominate the largest absolute Hessian
    eigenvalue of ``f`` over the domain (caller-asserted; built-in
    plants carry analytic bounds).  The measured error is the maximum of
    |f - interpolant| over a dense regular grid.  Passing ``None`` for
    the bound leaves the a-priori estimate undefined (the measurement is
    still performed); bounds are never estimated numerically here.
    """
    part = approx.partition
    n = part.dim
    if samples_per_axis is None:
        samples_per_axis = default_sample_grid(n)
    axes = [np.linspace(lo, hi, samples_per_axis)
            for lo, hi in zip(part.domain.lower, part.domain.upper)]
    worst = 0.0
    if n == 1:
        for y in axes[0]:
            err = abs(float(f(float(y))) - approx.evaluate((y,)))
            if err > worst:
                worst = err
    else:
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        for p in pts:
            err = abs(_call_scalar(f, p, n) - approx.evaluate(p))
            if err > worst:
                worst = err
    if hessian_bound is None:
        estimate = None
    else:
        estimate = 0.5 * float(hessian_bound) * part.max_diam ** 2
        hessian_bound = float(hessian_bound)
    return ApproxCertificate(
        sup_error_estimate=estimate,
        sup_error_measured=worst,
        lipschitz_pwl=approx.lipschitz_pwl(),
        hessian_bound_used=hessian_bound,
    )


def lifted_lipschitz(L, n):
    """Lipschitz constant sqrt(n - 1 + L**2) of the first-order companion
    field obtained by stacking the n-1 coordinate shifts on top of a
    scalar function with Lipschitz constant ``L``."""
    if L < 0:
        raise ValueError("L must be nonnegative")
    if n < 1:
        raise ValueError("n must be >= 1")
    return math.sqrt((n - 1) + L * L)
