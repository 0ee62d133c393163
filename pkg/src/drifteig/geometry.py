"""Domains, uniform grids, and distance-to-boundary fields.

Domains are open connected subsets of R^n (n = 1 or 2), described either by a
primitive shape (interval, rectangle, disk, annulus) or by a cell bitmap.
Grids are uniform lattices with spacing h; a node is interior iff it lies
strictly inside the domain, so curved boundaries become stair-step sets with
O(h) geometric error.  All objects are immutable after construction and safe
to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from itertools import product

import numpy as np
from scipy import ndimage

INTERIOR = np.int8(1)
BOUNDARY = np.int8(2)
EXTERIOR = np.int8(0)

_PRIMITIVE_KINDS = ("interval", "rectangle", "disk", "annulus")

# Fixed ridge-detection threshold: the Eikonal property |grad d| = 1 fails
# only on the cut locus, where central differences average opposing slopes.
RIDGE_GRAD_THRESHOLD = 0.9

_SWEEP_TOL = 1e-12
_SWEEP_MAX_ROUNDS = 64


class ResolutionError(ValueError):
    """Grid spacing too coarse to resolve the thinnest feature of the domain."""


class DegenerateDomainError(ValueError):
    """Discretization produced an empty or disconnected interior."""


class NoClosedFormError(ValueError):
    """Exact distance has no closed form for bitmap domains."""


class SweepConvergenceError(RuntimeError):
    """Fast sweeping failed to reach a fixed point on a connected grid."""


@dataclass(frozen=True, eq=False)
class DomainSpec:
    """Parametric description of a domain with exact-geometry metadata.

    kind is one of interval(L), rectangle(a, b), disk(R), annulus(r, R) or
    mask(bitmap, cell).  Use the factory classmethods; they validate the
    parameters.  The bitmap is indexed [i, j] with i along x, and the cell
    with index (i, j) covers [i*cell, (i+1)*cell] x [j*cell, (j+1)*cell].
    """

    kind: str
    params: tuple = ()
    bitmap: np.ndarray | None = None
    cell: float | None = None

    @classmethod
    def interval(cls, L: float) -> "DomainSpec":
        if not (L > 0):
            raise ValueError(f"interval length must be positive, got L={L}")
        return cls("interval", (float(L),))

    @classmethod
    def rectangle(cls, a: float, b: float) -> "DomainSpec":
        if not (a > 0 and b > 0):
            raise ValueError(f"rectangle sides must be positive, got a={a}, b={b}")
        return cls("rectangle", (float(a), float(b)))

    @classmethod
    def disk(cls, R: float) -> "DomainSpec":
        if not (R > 0):
            raise ValueError(f"disk radius must be positive, got R={R}")
        return cls("disk", (float(R),))

    @classmethod
    def annulus(cls, r: float, R: float) -> "DomainSpec":
        if not (0 < r < R):
            raise ValueError(f"annulus requires 0 < r < R, got r={r}, R={R}")
        return cls("annulus", (float(r), float(R)))

    @classmethod
    def mask(cls, bitmap, cell: float) -> "DomainSpec":
        bm = np.asarray(bitmap, dtype=bool)
        if bm.ndim not in (1, 2):
            raise ValueError(f"mask bitmap must be 1D or 2D, got ndim={bm.ndim}")
        if not (cell > 0):
            raise ValueError(f"mask cell size must be positive, got {cell}")
        if not bm.any():
            raise ValueError("mask bitmap has no active cells")
        structure = np.ones(3, bool) if bm.ndim == 1 else np.array(
            [[0, 1, 0], [1, 1, 1], [0, 1, 0]], bool)
        _, ncomp = ndimage.label(bm, structure=structure)
        if ncomp != 1:
            raise ValueError(
                f"mask bitmap must describe a connected open set, found {ncomp} components")
        bm = bm.copy()
        bm.setflags(write=False)
        return cls("mask", (), bitmap=bm, cell=float(cell))

    @property
    def ndim(self) -> int:
        if self.kind == "interval":
            return 1
        if self.kind == "mask":
            return self.bitmap.ndim
        return 2

    @property
    def bounds(self) -> tuple[tuple[float, float], ...]:
        """Axis-aligned bounding box of the closed domain, per axis."""
        if self.kind == "interval":
            return ((0.0, self.params[0]),)
        if self.kind == "rectangle":
            a, b = self.params
            return ((0.0, a), (0.0, b))
        if self.kind == "disk":
            R = self.params[0]
            return ((-R, R), (-R, R))
        if self.kind == "annulus":
            R = self.params[1]
            return ((-R, R), (-R, R))
        ext = tuple(n * self.cell for n in self.bitmap.shape)
        return tuple((0.0, e) for e in ext)

    @property
    def min_feature(self) -> tuple[float, str]:
        """Thinnest geometric feature and its name, for resolution checks."""
        if self.kind == "interval":
            return self.params[0], "interval length"
        if self.kind == "rectangle":
            a, b = self.params
            return min(a, b), "rectangle short side"
        if self.kind == "disk":
            return 2.0 * self.params[0], "disk diameter"
        if self.kind == "annulus":
            r, R = self.params
            return R - r, "annulus width"
        # No closed-form neck width for bitmaps; the grid must at least
        # resolve the bitmap cells themselves.
        return 4.0 * self.cell, "mask cell size"

    def contains(self, points: np.ndarray, eps: float = 0.0) -> np.ndarray:
        """Strict interiority test with margin eps, vectorized over rows."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "interval":
            x = pts[:, 0]
            L = self.params[0]
            return (x > eps) & (x < L - eps)
        if self.kind == "rectangle":
            a, b = self.params
            x, y = pts[:, 0], pts[:, 1]
            return (x > eps) & (x < a - eps) & (y > eps) & (y < b - eps)
        if self.kind == "disk":
            R = self.params[0]
            return np.hypot(pts[:, 0], pts[:, 1]) < R - eps
        if self.kind == "annulus":
            r, R = self.params
            rad = np.hypot(pts[:, 0], pts[:, 1])
            return (rad > r + eps) & (rad < R - eps)
        return self._mask_contains(pts, eps)

    def _mask_contains(self, pts: np.ndarray, eps: float) -> np.ndarray:
        # A point is strictly inside iff every cell whose closure contains it
        # (up to the eps margin) is an active in-range cell.  A point on the
        # shared edge of two active cells is interior; on an edge adjacent to
        # an inactive or out-of-range cell it is not.
        bm = self.bitmap
        u = pts / self.cell
        teps = eps / self.cell
        inside = np.ones(len(pts), dtype=bool)
        los = [np.floor(u[:, a] - teps).astype(np.int64) for a in range(bm.ndim)]
        his = [np.floor(u[:, a] + teps).astype(np.int64) for a in range(bm.ndim)]
        for combo in product((0, 1), repeat=bm.ndim):
            idx = [los[a] if c == 0 else his[a] for a, c in enumerate(combo)]
            ok = np.ones(len(pts), dtype=bool)
            for a in range(bm.ndim):
                ok &= (idx[a] >= 0) & (idx[a] < bm.shape[a])
            clipped = tuple(np.clip(idx[a], 0, bm.shape[a] - 1) for a in range(bm.ndim))
            inside &= ok & bm[clipped]
        return inside


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform lattice with interior/boundary/exterior node classes.

    Node coordinates are integer multiples of h (``origin + index * h``).
    Flat node indices are C-ordered with axis 0 = x, so ascending flat order
    is lexicographic order in (x, y).  Boundary nodes are the non-interior
    nodes with at least one interior axis neighbor; they carry the Dirichlet
    condition.  Every axis neighbor of an interior node is interior or
    boundary (the lattice carries a one-node exterior margin).
    """

    spec: DomainSpec
    h: float
    origin: tuple[float, ...]
    shape: tuple[int, ...]
    node_class: np.ndarray      # int8, C-ordered flat, len = prod(shape)
    interior_flat: np.ndarray   # ascending flat indices of interior nodes
    interior_index: np.ndarray  # flat -> interior rank, -1 elsewhere
    neighbors: np.ndarray       # (n_interior, 2*ndim) interior rank, -1 if boundary

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.shape))

    @property
    def n_interior(self) -> int:
        return len(self.interior_flat)

    @cached_property
    def strides(self) -> tuple[int, ...]:
        s = [1] * self.ndim
        for a in range(self.ndim - 2, -1, -1):
            s[a] = s[a + 1] * self.shape[a + 1]
        return tuple(s)

    def node_coords(self, flat: np.ndarray) -> np.ndarray:
        """Coordinates of the given flat node indices, shape (m, ndim)."""
        flat = np.asarray(flat)
        idx = np.unravel_index(flat, self.shape)
        return np.stack([self.origin[a] + idx[a] * self.h
                         for a in range(self.ndim)], axis=-1)

    @cached_property
    def interior_coords(self) -> np.ndarray:
        return self.node_coords(self.interior_flat)

    @cached_property
    def boundary_flat(self) -> np.ndarray:
        return np.flatnonzero(self.node_class == BOUNDARY)

    @cached_property
    def interior_mask(self) -> np.ndarray:
        return self.node_class == INTERIOR


def build_grid(spec: DomainSpec, nodes_per_unit: int) -> Grid:
    """Discretize the domain on a uniform lattice with h = 1/nodes_per_unit.

    Raises ResolutionError when the thinnest feature spans fewer than 4 cells
    and DegenerateDomainError when the interior is empty or disconnected
    under axis adjacency.
    """
    npu = int(nodes_per_unit)
    if npu <= 0:
        raise ValueError(f"nodes_per_unit must be a positive integer, got {nodes_per_unit}")
    h = 1.0 / npu

    feature, feature_name = spec.min_feature
    if feature < 4.0 * h * (1.0 - 1e-12):
        raise ResolutionError(
            f"too-coarse resolution: {feature_name} {feature:g} spans fewer than "
            f"4 cells at h={h:g}")

    lo_idx, counts = [], []
    for lo, hi in spec.bounds:
        i0 = math.floor(lo / h) - 1
        i1 = math.ceil(hi / h) + 1
        lo_idx.append(i0)
        counts.append(i1 - i0 + 1)
    origin = tuple(i0 * h for i0 in lo_idx)
    shape = tuple(counts)

    axes = [origin[a] + h * np.arange(shape[a]) for a in range(spec.ndim)]
    if spec.ndim == 1:
        coords = axes[0][:, None]
    else:
        X, Y = np.meshgrid(axes[0], axes[1], indexing="ij")
        coords = np.stack([X.ravel(), Y.ravel()], axis=1)

    eps = 1e-9 * h
    interior = spec.contains(coords, eps=eps).reshape(shape)

    if not interior.any():
        raise DegenerateDomainError(
            f"degenerate discretization: no interior nodes at h={h:g}")
    structure = np.ones(3, bool) if spec.ndim == 1 else np.array(
        [[0, 1, 0], [1, 1, 1], [0, 1, 0]], bool)
    _, ncomp = ndimage.label(interior, structure=structure)
    if ncomp != 1:
        raise DegenerateDomainError(
            f"degenerate discretization: interior splits into {ncomp} components "
            f"at h={h:g}")

    near = np.zeros(shape, dtype=bool)
    for a in range(spec.ndim):
        for shift in (1, -1):
            near |= np.roll(interior, shift, axis=a)
    # roll wraps, but the one-node exterior margin keeps wrapped values False
    node_class = np.full(shape, EXTERIOR, dtype=np.int8)
    node_class[interior] = INTERIOR
    node_class[near & ~interior] = BOUNDARY

    flat_class = node_class.ravel()
    interior_flat = np.flatnonzero(flat_class == INTERIOR)
    interior_index = np.full(flat_class.size, -1, dtype=np.int64)
    interior_index[interior_flat] = np.arange(len(interior_flat))

    strides = [1] * spec.ndim
    for a in range(spec.ndim - 2, -1, -1):
        strides[a] = strides[a + 1] * shape[a + 1]
    nbr = np.empty((len(interior_flat), 2 * spec.ndim), dtype=np.int64)
    for a in range(spec.ndim):
        nbr[:, 2 * a] = interior_index[interior_flat - strides[a]]
        nbr[:, 2 * a + 1] = interior_index[interior_flat + strides[a]]

    return Grid(spec=spec, h=h, origin=origin, shape=shape,
                node_class=flat_class, interior_flat=interior_flat,
                interior_index=interior_index, neighbors=nbr)


def exact_distance(spec: DomainSpec, point) -> float | np.ndarray:
    """Exact Euclidean distance to the boundary for primitive domains.

    Accepts a single point or an (m, ndim) array; values are negative outside
    the closed domain.  Raises NoClosedFormError for mask domains.
    """
    if spec.kind == "mask":
        raise NoClosedFormError(
            "no closed form for mask domains; use distance_field")
    pts = np.asarray(point, dtype=float)
    scalar = pts.ndim <= 1
    pts = np.atleast_2d(pts)
    if spec.kind == "interval":
        L = spec.params[0]
        x = pts[:, 0]
        d = np.minimum(x, L - x)
    elif spec.kind == "rectangle":
        a, b = spec.params
        x, y = pts[:, 0], pts[:, 1]
        d = np.minimum.reduce([x, a - x, y, b - y])
    elif spec.kind == "disk":
        R = spec.params[0]
        d = R - np.hypot(pts[:, 0], pts[:, 1])
    else:
        r, R = spec.params
        rad = np.hypot(pts[:, 0], pts[:, 1])
        d = np.minimum(rad - r, R - rad)
    return float(d[0]) if scalar else d


def distance_field(grid: Grid, spec: DomainSpec | None = None):
    """Distance to the boundary at every node (zero on boundary nodes).

    Primitive domains get the exact distance at interior nodes; mask domains
    are solved by first-order fast sweeping of |grad d| = 1, d = 0 on the
    boundary nodes, to O(h) accuracy.
    """
    from .fields import ScalarField

    spec = grid.spec if spec is None else spec
    values = np.zeros(grid.n_nodes)
    if spec.kind in _PRIMITIVE_KINDS:
        values[grid.interior_flat] = exact_distance(spec, grid.interior_coords)
    else:
        values = _fast_sweep(grid)
    return ScalarField(grid=grid, values=values, tag="distance")


def _fast_sweep(grid: Grid) -> np.ndarray:
    """Gauss-Seidel fast sweeping for the Eikonal equation on the lattice.

    Alternates all 2^ndim sweep orderings until the update falls below a
    fixed-point tolerance.  First-order accurate; boundary nodes are the
    zero level set.
    """
    h = grid.h
    big = np.inf
    cls = grid.node_class.reshape(grid.shape)
    V = np.where(cls == BOUNDARY, 0.0, big)
    V[cls == EXTERIOR] = big

    if grid.ndim == 1:
        n = grid.shape[0]
        for _ in range(_SWEEP_MAX_ROUNDS):
            change = 0.0
            for order in (range(1, n - 1), range(n - 2, 0, -1)):
                for i in order:
                    if cls[i] != INTERIOR:
                        continue
                    cand = min(V[i - 1], V[i + 1]) + h
                    if cand < V[i] - 0.0:
                        change = max(change, V[i] - cand)
                        V[i] = cand
            if change <= _SWEEP_TOL:
                return V.ravel()
        raise SweepConvergenceError("fast sweeping did not converge")

    interior_ij = np.argwhere(cls == INTERIOR)
    orders = [interior_ij[np.lexsort((sy * interior_ij[:, 1],
                                      sx * interior_ij[:, 0]))]
              for sx, sy in ((1, 1), (-1, 1), (1, -1), (-1, -1))]
    for _ in range(_SWEEP_MAX_ROUNDS):
        change = 0.0
        for order in orders:
            for i, j in order:
                a = min(V[i - 1, j], V[i + 1, j])
                b = min(V[i, j - 1], V[i, j + 1])
                if abs(a - b) >= h:
                    cand = min(a, b) + h
                else:
                    cand = 0.5 * (a + b + math.sqrt(2.0 * h * h - (a - b) ** 2))
                if cand < V[i, j]:
                    change = max(change, V[i, j] - cand)
                    V[i, j] = cand
        if change <= _SWEEP_TOL:
            return V.ravel()
    raise SweepConvergenceError("fast sweeping did not converge")


def inradius_and_argmax(d, tol: float) -> tuple[float, np.ndarray]:
    """Max of the distance field and all nodes within tol of it.

    Returns (R, argmax_flat) with argmax_flat ascending, i.e. sorted
    lexicographically by node coordinates; storage order cannot affect it.
    """
    grid = d.grid
    if grid.n_interior == 0:
        raise DegenerateDomainError("empty interior")
    vals = d.values[grid.interior_flat]
    R = float(vals.max())
    argmax = grid.interior_flat[vals >= R - tol]
    return R, argmax


def boundary_layer_mask(d, delta: float) -> np.ndarray:
    """Boolean node mask of the interior layer {0 < d(x) < delta}."""
    if not (delta > 0):
        raise ValueError(f"layer width must be positive, got {delta}")
    return d.grid.interior_mask & (d.values < delta)


def grad_distance(d):
    """Discrete gradient of the distance field with a ridge validity mask.

    Central differences where both axis neighbors are interior, one-sided
    otherwise.  Nodes where |grad d| < 0.9 are flagged invalid: the unit
    gradient property fails only on the cut locus.
    """
    from .fields import gradient

    g = gradient(d)
    mag = np.linalg.norm(g.values, axis=1)
    valid = d.grid.interior_mask & (mag >= RIDGE_GRAD_THRESHOLD)
    return type(g)(grid=g.grid, values=g.values, valid=valid, tag="grad_distance")


def interior_depth_layers(grid: Grid, cap: int) -> np.ndarray:
    """Graph distance of interior nodes from the boundary, capped.

    Returns an int array over all nodes: 0 for non-interior nodes, k for
    interior nodes whose shortest axis-adjacency path to a boundary node has
    length k <= cap, and cap + 1 for anything deeper.
    """
    n_int = grid.n_interior
    depth = np.zeros(n_int, dtype=np.int32)
    frontier = np.any(grid.neighbors < 0, axis=1)
    depth[frontier] = 1
    for level in range(2, cap + 1):
        prev = frontier
        touched = grid.neighbors[prev].ravel()
        touched = touched[touched >= 0]
        frontier = np.zeros(n_int, dtype=bool)
        frontier[touched] = True
        frontier &= depth == 0
        if not frontier.any():
            break
        depth[frontier] = level
    depth[depth == 0] = cap + 1
    out = np.zeros(grid.n_nodes, dtype=np.int32)
    out[grid.interior_flat] = depth
    return out
