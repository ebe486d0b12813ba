"""Simplicial partitions of axis-aligned boxes.

A box domain in R^n is split into a regular grid of cells and each cell
into n! simplices (Kuhn/Freudenthal triangulation).  For n=1 this
degenerates to consecutive intervals.  Partitions are immutable after
construction and safe to share between threads.
"""

from dataclasses import dataclass, field
from itertools import permutations, product
import json
import math

import numpy as np

# Absolute tolerance for barycentric containment tests: well above the
# double-precision solve error, well below any grid scale of interest.
TOL_BARY = 1e-9


class PointOutsideDomain(ValueError):
    """Raised when a query point is not inside the partitioned box."""


@dataclass(frozen=True)
class BoxDomain:
    """Compact axis-aligned box [lower[0], upper[0]] x ... in R^n."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if len(lower) != len(upper):
            raise ValueError("lower and upper must have the same length")
        if len(lower) < 1:
            raise ValueError("domain dimension must be >= 1")
        for k, (lo, hi) in enumerate(zip(lower, upper)):
            if not lo < hi:
                raise ValueError(f"domain axis {k}: need lower < upper, got [{lo}, {hi}]")

    @property
    def dim(self):
        return len(self.lower)

    def contains(self, point, tol=TOL_BARY):
        p = np.atleast_1d(np.asarray(point, dtype=float))
        return bool(
            np.all(p >= np.asarray(self.lower) - tol)
            and np.all(p <= np.asarray(self.upper) + tol)
        )

    def volume(self):
        return float(np.prod(np.asarray(self.upper) - np.asarray(self.lower)))

    def to_dict(self):
        return {"lower": list(self.lower), "upper": list(self.upper)}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["lower"]), tuple(d["upper"]))


@dataclass(frozen=True)
class BarycentricCoords:
    """Barycentric weights of a point within one simplex of a partition."""

    lam: np.ndarray
    simplex_index: int


@dataclass(frozen=True)
class SimplicialPartition:
    """Vertices plus (n+1)-tuples of vertex indices covering a box.

    ``h`` is the simplex count and ``max_diam`` the largest pairwise
    vertex distance over all simplices (for a regular Kuhn grid this is
    the diagonal of one grid cell).
    """

    domain: BoxDomain
    vertices: np.ndarray            # (n_vertices, n)
    simplices: np.ndarray           # (h, n+1) vertex indices
    h: int
    max_diam: float
    cells_per_axis: tuple = field(default=(), compare=False)

    @property
    def dim(self):
        return self.domain.dim

    # ------------------------------------------------------------------
    # queries

    def simplex_vertices(self, index):
        """Vertex coordinates of simplex ``index`` as an (n+1, n) array."""
        return self.vertices[self.simplices[index]]

    def simplex_volume(self, index):
        """|det(edge matrix)| / n! for simplex ``index``."""
        verts = self.simplex_vertices(index)
        edges = verts[1:] - verts[0]
        return abs(float(np.linalg.det(edges))) / math.factorial(self.dim)

    def barycentric_in(self, index, point):
        """Solve the (n+1)x(n+1) affine system for the weights of ``point``.

        The weights need not be nonnegative; callers test containment.
        """
        verts = self.simplex_vertices(index)
        n = self.dim
        a = np.ones((n + 1, n + 1))
        a[:n, :] = verts.T
        rhs = np.ones(n + 1)
        rhs[:n] = np.atleast_1d(np.asarray(point, dtype=float))
        return np.linalg.solve(a, rhs)

    def locate(self, point, tol=TOL_BARY):
        """Find the lowest-index simplex containing ``point``.

        Returns a :class:`BarycentricCoords`; raises
        :class:`PointOutsideDomain` when the point is more than ``tol``
        outside the box.  On shared facets the lowest simplex index wins
        (value-irrelevant for continuous interpolants).
        """
        p = np.atleast_1d(np.asarray(point, dtype=float))
        if p.shape != (self.dim,):
            raise ValueError(f"point has dimension {p.shape}, domain is {self.dim}-d")
        if not self.domain.contains(p, tol):
            raise PointOutsideDomain(f"point {p.tolist()} outside domain")

        for idx in self._candidate_simplices(p, tol):
            lam = self.barycentric_in(idx, p)
            if np.all(lam >= -tol):
                return BarycentricCoords(lam=lam, simplex_index=int(idx))
        # Fall back to a full scan; only reachable through rounding at corners.
        for idx in range(self.h):
            lam = self.barycentric_in(idx, p)
            if np.all(lam >= -tol):
                return BarycentricCoords(lam=lam, simplex_index=int(idx))
        raise PointOutsideDomain(f"no simplex contains point {p.tolist()}")

    def _candidate_simplices(self, p, tol):
        """Indices of simplices in grid cells near ``p``, ascending."""
        n = self.dim
        cells = np.asarray(self.cells_per_axis, dtype=int)
        lower = np.asarray(self.domain.lower)
        upper = np.asarray(self.domain.upper)
        delta = (upper - lower) / cells
        frac = (p - lower) / delta
        base = np.clip(np.floor(frac).astype(int), 0, cells - 1)
        # Near a grid plane the lower-index neighbour cell also contains p.
        options = []
        for k in range(n):
            cands = {int(base[k])}
            if frac[k] - base[k] <= tol / delta[k] and base[k] > 0:
                cands.add(int(base[k]) - 1)
            if base[k] + 1 - frac[k] <= tol / delta[k] and base[k] + 1 < cells[k]:
                cands.add(int(base[k]) + 1)
            options.append(sorted(cands))
        nperm = math.factorial(n)
        out = []
        for combo in product(*options):
            cell_rank = 0
            for k in range(n):
                cell_rank = cell_rank * cells[k] + combo[k]
            out.extend(range(cell_rank * nperm, (cell_rank + 1) * nperm))
        return sorted(out)

    # ------------------------------------------------------------------
    # serialization

    def to_dict(self):
        return {
            "domain": self.domain.to_dict(),
            "vertices": self.vertices.tolist(),
            "simplices": self.simplices.tolist(),
            "h": self.h,
            "max_diam": self.max_diam,
        }

    def to_json(self, indent=None):
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)


def kuhn_partition(domain, cells_per_axis):
    """Kuhn (Freudenthal) triangulation of a regular grid over ``domain``.

    Each grid cell is split into n! simplices, one per axis permutation:
    starting at the cell corner, each permutation visits the axes in
    order, advancing one cell edge at a time.  h = n! * prod(cells).

    Parameters
    ----------
    domain : BoxDomain or (lower, upper) pair
    cells_per_axis : int or sequence of ints, one per axis (each >= 1)
    """
    if not isinstance(domain, BoxDomain):
        domain = BoxDomain(*domain)
    n = domain.dim
    cells = np.atleast_1d(np.asarray(cells_per_axis, dtype=int))
    if cells.shape != (n,):
        if cells.size == 1:
            cells = np.full(n, int(cells[0]))
        else:
            raise ValueError(
                f"cells_per_axis has {cells.size} entries, domain is {n}-d")
    if np.any(cells < 1):
        raise ValueError("cells_per_axis entries must be >= 1")

    lower = np.asarray(domain.lower)
    upper = np.asarray(domain.upper)
    delta = (upper - lower) / cells

    # Grid vertices, C-ordered so vertex id == ravelled grid multi-index.
    axes = [lower[k] + delta[k] * np.arange(cells[k] + 1) for k in range(n)]
    mesh = np.meshgrid(*axes, indexing="ij")
    vertices = np.stack([m.ravel() for m in mesh], axis=-1)

    grid_shape = tuple(int(c) + 1 for c in cells)

    def vid(multi):
        return int(np.ravel_multi_index(multi, grid_shape))

    perms = list(permutations(range(n)))
    simplices = []
    for cell in product(*[range(int(c)) for c in cells]):
        for perm in perms:
            corner = list(cell)
            ids = [vid(corner)]
            for axis in perm:
                corner[axis] += 1
                ids.append(vid(corner))
            simplices.append(ids)

    max_diam = float(np.linalg.norm(delta))
    return SimplicialPartition(
        domain=domain,
        vertices=vertices,
        simplices=np.asarray(simplices, dtype=int),
        h=len(simplices),
        max_diam=max_diam,
        cells_per_axis=tuple(int(c) for c in cells),
    )


def locate(partition, point, tol=TOL_BARY):
    """Module-level alias for :meth:`SimplicialPartition.locate`."""
    return partition.locate(point, tol=tol)


def simplex_volume(partition, index):
    """Module-level alias for :meth:`SimplicialPartition.simplex_volume`."""
    return partition.simplex_volume(index)


def volume_ratio_coords(partition, index, point):
    """Barycentric weights via the volume-ratio definition.

    lambda_j = Vol(simplex with vertex j replaced by the point) / Vol(simplex),
    signed volumes so the identity holds anywhere in the plane of the simplex.
    Used as an independent cross-check of the affine solve.
    """
    verts = partition.simplex_vertices(index)
    n = partition.dim
    p = np.atleast_1d(np.asarray(point, dtype=float))

    def signed_vol(vs):
        return float(np.linalg.det(vs[1:] - vs[0])) / math.factorial(n)

    total = signed_vol(verts)
    lam = np.empty(n + 1)
    for j in range(n + 1):
        sub = verts.copy()
        sub[j] = p
        lam[j] = signed_vol(sub) / total
    return lam
