"""Node-indexed scalar and vector fields over a grid.

Values are stored for every lattice node in flat C order; exterior nodes
carry zeros.  Eigenfunctions tagged "phi" are zero on boundary nodes and
nonnegative; drift fields tagged "drift" satisfy |v| <= bound up to
round-off on their valid nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .geometry import Grid


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid
    values: np.ndarray          # (n_nodes,)
    tag: str = ""

    def __post_init__(self):
        if self.values.shape != (self.grid.n_nodes,):
            raise ValueError(
                f"scalar field shape {self.values.shape} does not match grid "
                f"({self.grid.n_nodes} nodes)")

    @property
    def interior_values(self) -> np.ndarray:
        return self.values[self.grid.interior_flat]

    def validate(self) -> None:
        if not np.isfinite(self.interior_values).all():
            raise ValueError(f"field '{self.tag}': non-finite interior values")
        if self.tag == "phi":
            if np.any(self.values[self.grid.boundary_flat] != 0.0):
                raise ValueError("field 'phi': nonzero boundary values")
            if np.any(self.values < 0.0):
                raise ValueError("field 'phi': negative values")


@dataclass(frozen=True, eq=False)
class VectorField:
    grid: Grid
    values: np.ndarray          # (n_nodes, ndim)
    valid: np.ndarray | None = None   # node mask where the field is defined
    tag: str = ""

    def __post_init__(self):
        if self.values.shape != (self.grid.n_nodes, self.grid.ndim):
            raise ValueError(
                f"vector field shape {self.values.shape} does not match grid "
                f"({self.grid.n_nodes} nodes, ndim={self.grid.ndim})")

    @property
    def interior_values(self) -> np.ndarray:
        return self.values[self.grid.interior_flat]

    def magnitude(self) -> np.ndarray:
        return np.linalg.norm(self.values, axis=1)

    def validate(self, bound: float | None = None) -> None:
        sel = self.grid.interior_mask if self.valid is None else self.valid
        if not np.isfinite(self.values[sel]).all():
            raise ValueError(f"field '{self.tag}': non-finite values on valid nodes")
        if self.tag == "drift" and bound is not None:
            mag = self.magnitude()[sel]
            if mag.size and mag.max() > bound * (1 + 1e-12) + 1e-300:
                raise ValueError(
                    f"field 'drift': |v| exceeds the bound {bound:g} "
                    f"(max {mag.max():g})")


def zero_vector_field(grid: Grid, tag: str = "drift") -> VectorField:
    return VectorField(grid=grid, values=np.zeros((grid.n_nodes, grid.ndim)),
                       valid=None, tag=tag)


def gradient(f: ScalarField) -> VectorField:
    """Discrete gradient at interior nodes.

    Central differences where both axis neighbors are interior; one-sided
    toward the interior neighbor at boundary-adjacent nodes; zero where a
    node has no interior axis neighbor on either side.
    """
    grid = f.grid
    h = grid.h
    vin = f.interior_values
    out = np.zeros((grid.n_nodes, grid.ndim))
    g_int = np.zeros((grid.n_interior, grid.ndim))
    for a in range(grid.ndim):
        w = grid.neighbors[:, 2 * a]
        e = grid.neighbors[:, 2 * a + 1]
        has_w, has_e = w >= 0, e >= 0
        vw = vin[np.where(has_w, w, 0)]
        ve = vin[np.where(has_e, e, 0)]
        ga = np.zeros(grid.n_interior)
        both = has_w & has_e
        ga[both] = (ve[both] - vw[both]) / (2 * h)
        east_only = has_e & ~has_w
        ga[east_only] = (ve[east_only] - vin[east_only]) / h
        west_only = has_w & ~has_e
        ga[west_only] = (vin[west_only] - vw[west_only]) / h
        g_int[:, a] = ga
    out[grid.interior_flat] = g_int
    return VectorField(grid=grid, values=out, valid=None, tag="")


def interpolate(f: ScalarField, points: np.ndarray) -> np.ndarray:
    """Multilinear interpolation of a scalar field at off-node points.

    Boundary nodes participate with their stored values (zero for "phi"), so
    samples just inside the domain are pulled toward the Dirichlet value.
    """
    grid = f.grid
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    u = (pts - np.asarray(grid.origin)) / grid.h
    base = np.floor(u).astype(np.int64)
    for a in range(grid.ndim):
        base[:, a] = np.clip(base[:, a], 0, grid.shape[a] - 2)
    t = np.clip(u - base, 0.0, 1.0)

    strides = np.asarray(grid.strides)
    vals = np.zeros(len(pts))
    for corner in product((0, 1), repeat=grid.ndim):
        flat = (base + np.asarray(corner)) @ strides
        w = np.ones(len(pts))
        for a, c in enumerate(corner):
            w *= t[:, a] if c else (1.0 - t[:, a])
        vals += w * f.values[flat]
    return vals
