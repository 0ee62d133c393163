"""Dirichlet discretization of -laplace + v.grad and its principal eigenpair.

The Laplacian uses the standard 2n+1-point stencil; the advection term is
upwinded per component (backward difference when v_i > 0, forward when
v_i < 0), which keeps the matrix an M-matrix for any drift magnitude:
positive diagonal, nonpositive off-diagonals, nonnegative row sums, and
irreducibility on a connected grid.  The principal eigenpair then exists
with a strictly positive eigenvector and is computed by inverse power
iteration (plain inversion, no shift: the matrix is nonsymmetric and its
principal eigenvalue is the smallest-real-part one).
"""

from __future__ import annotations

from dataclasses import dataclass

import math

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fields import ScalarField, VectorField
from .geometry import Grid

# Above this many unknowns a direct factorization gets memory-hungry; switch
# to AMG-preconditioned BiCGStab when pyamg is importable.
DIRECT_SOLVE_MAX = 900_000


class ConvergenceError(RuntimeError):
    """Iteration budget exhausted before the tolerance was met."""

    def __init__(self, message: str, residual: float = np.nan,
                 iterations: int = 0, lambda_trace=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.lambda_trace = lambda_trace


class InternalSolverError(RuntimeError):
    """Invariant violation that signals an assembly bug, not bad input."""


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    grid: Grid
    matrix: sp.csr_matrix       # interior-node indexing
    h: float
    drift_bound: float          # max |v_i| folded into the upwind stencil


@dataclass(frozen=True, eq=False)
class EigenPair:
    lam: float
    phi: ScalarField            # max-normalized, positive on interior nodes
    iterations: int
    residual: float


def assemble(grid: Grid, v: VectorField) -> OperatorMatrix:
    """Assemble -laplace + v.grad with Dirichlet rows eliminated.

    Boundary values are zero, so stencil legs that reach a boundary node are
    simply dropped; those rows get strictly positive row sums.
    """
    if v.grid is not grid:
        raise ValueError("dimension mismatch: drift is defined on a different grid")
    vin = v.interior_values
    if not np.isfinite(vin).all():
        raise ValueError("drift has non-finite values on interior nodes")

    h = grid.h
    n = grid.n_interior
    inv_h2 = 1.0 / (h * h)
    diag = np.full(n, 2.0 * grid.ndim * inv_h2)
    rows = [np.arange(n)]
    cols = [np.arange(n)]
    data = [diag]

    for a in range(grid.ndim):
        va = vin[:, a]
        pos = np.maximum(va, 0.0)
        neg = np.minimum(va, 0.0)
        data[0] = data[0] + (pos - neg) / h

        w = grid.neighbors[:, 2 * a]
        has_w = w >= 0
        rows.append(np.flatnonzero(has_w))
        cols.append(w[has_w])
        data.append(-inv_h2 - pos[has_w] / h)

        e = grid.neighbors[:, 2 * a + 1]
        has_e = e >= 0
        rows.append(np.flatnonzero(has_e))
        cols.append(e[has_e])
        data.append(-inv_h2 + neg[has_e] / h)

    mat = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n)).tocsr()
    bound = float(np.abs(vin).max()) if n else 0.0
    return OperatorMatrix(grid=grid, matrix=mat, h=h, drift_bound=bound)


def _direct_solver(mat: sp.csr_matrix):
    lu = spla.splu(mat.tocsc())
    return lu.solve


def _amg_solver(mat: sp.csr_matrix, rtol: float = 1e-12):
    import pyamg

    ml = pyamg.ruge_stuben_solver(mat)
    M = ml.aspreconditioner(cycle="V")

    def solve(b):
        x, info = spla.bicgstab(mat, b, M=M, rtol=rtol, atol=0.0, maxiter=600)
        if info != 0:
            raise ConvergenceError(f"inner BiCGStab failed (info={info})")
        return x

    return solve


def make_inner_solver(mat: sp.csr_matrix, direct_limit: int = DIRECT_SOLVE_MAX):
    """Pick a linear-solve backend: sparse LU, or AMG-BiCGStab for large n."""
    if mat.shape[0] <= direct_limit:
        return _direct_solver(mat)
    try:
        return _amg_solver(mat)
    except ImportError:
        return _direct_solver(mat)


def inverse_power(mat: sp.csr_matrix, tol: float, max_iter: int,
                  x0: np.ndarray | None = None,
                  direct_limit: int = DIRECT_SOLVE_MAX,
                  tol_resid: float | None = None,
                  solve=None,
                  stagnation_window: int = 0):
    """Inverse power iteration on a sparse M-matrix.

    Iterates x <- normalize(A^-1 x) from a positive seed, estimating the
    eigenvalue by the ratio (Ax.x)/(x.x) on the iterate; stops when the
    eigenvalue increment and the sup-norm residual ||Ax - lam x|| / ||x||
    both fall below tol (the residual against tol_resid when given).
    Returns (lam, x, iterations, residual) with max(x) = 1.

    Floating-point notes.  The computed residual cannot fall below the
    rounding noise of the stencil-scale matvec, roughly eps/h^2 times a
    problem-dependent constant; callers on very fine grids pass
    ``stagnation_window`` > 0 to accept a residual that has stopped
    improving over that many iterations while the eigenvalue is stationary.
    When the eigenvalue itself sits below the matvec noise (extremely large
    drifts), the Rayleigh ratio degenerates to noise of arbitrary sign; the
    estimate then falls back to the inverse-iteration growth factor, which
    is the eigenvalue of a nearby M-matrix and therefore always positive.
    """
    n = mat.shape[0]
    if x0 is None:
        x = np.ones(n)
    else:
        x = np.asarray(x0, dtype=float).copy()
        if x.max() <= 0:
            raise ValueError("seed iterate must have a positive maximum")
        x /= x.max()
    if solve is None:
        solve = make_inner_solver(mat, direct_limit)
    if tol_resid is None:
        tol_resid = tol
    row_scale = float(np.abs(mat).sum(axis=1).max())
    eps = np.finfo(float).eps
    # Sign-reliability floor for the Rayleigh ratio: matvec rounding scale.
    rq_floor = 8.0 * eps * row_scale
    # The eigenvalue estimate itself wobbles at the averaged matvec noise;
    # in stagnation mode the increment test cannot demand better.
    lam_tol = tol
    if stagnation_window:
        lam_tol = max(tol, 4.0 * eps * row_scale / math.sqrt(n))

    lam_prev = np.inf
    resid = np.inf
    best_resid = np.inf
    since_improved = 0
    for k in range(1, max_iter + 1):
        y = solve(x)
        m = float(y.max())
        if m <= 0 or (y <= 0).any():
            raise InternalSolverError(
                "non-positive inverse-power iterate: M-matrix assembly is broken")
        growth_lam = float(x.max()) / m   # x is max-normalized, so = 1/m
        y /= m
        Ay = mat @ y
        lam = float(Ay @ y) / float(y @ y)
        if lam <= rq_floor:
            lam = growth_lam
        resid = float(np.abs(Ay - lam * y).max())  # ||y||_inf == 1
        x = y
        if resid < 0.9 * best_resid:
            best_resid = min(best_resid, resid)
            since_improved = 0
        else:
            since_improved += 1
        lam_ok = abs(lam - lam_prev) <= lam_tol
        if lam_ok and resid <= tol_resid:
            return lam, x, k, resid
        if (lam_ok and stagnation_window
                and since_improved >= stagnation_window):
            return lam, x, k, resid
        lam_prev = lam
    raise ConvergenceError(
        f"inverse power iteration did not converge in {max_iter} iterations "
        f"(last residual {resid:.3e})", residual=resid, iterations=max_iter)


def principal_eigenpair(A: OperatorMatrix, tol: float = 1e-10,
                        max_iter: int = 500,
                        x0: ScalarField | np.ndarray | None = None,
                        direct_limit: int = DIRECT_SOLVE_MAX) -> EigenPair:
    """Principal eigenpair (lambda, phi) of the assembled operator.

    phi is returned max-normalized and strictly positive on interior nodes;
    lambda > 0 follows from the M-matrix structure.
    """
    if not (tol > 0):
        raise ValueError(f"tolerance must be positive, got {tol}")
    seed = None
    if isinstance(x0, ScalarField):
        seed = x0.interior_values
    elif x0 is not None:
        seed = np.asarray(x0, dtype=float)
    lam, x, iters, resid = inverse_power(A.matrix, tol, max_iter, seed,
                                         direct_limit)
    grid = A.grid
    values = np.zeros(grid.n_nodes)
    values[grid.interior_flat] = x / x.max()
    phi = ScalarField(grid=grid, values=values, tag="phi")
    return EigenPair(lam=lam, phi=phi, iterations=iters, residual=resid)


def residual(A: OperatorMatrix, p: EigenPair) -> float:
    """Sup-norm eigen-residual ||A phi - lambda phi|| over interior nodes."""
    if p.phi.grid is not A.grid:
        raise ValueError("eigenpair and operator live on different grids")
    x = p.phi.interior_values
    return float(np.abs(A.matrix @ x - p.lam * x).max())
