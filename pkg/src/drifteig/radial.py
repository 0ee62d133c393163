"""High-accuracy 1D and radial solvers used as ground truth.

Two independent code paths:

* ``interval_eigenvalue`` exploits that on either side of the interior
  maximum the 1D problem -phi'' -+ tau phi' = lam phi has constant
  coefficients; matching the two closed-form halves at the midpoint gives a
  scalar transcendental equation solved by bracketed root finding to machine
  precision.

* ``radial_eigenpair`` discretizes the radial reduction
  -Phi'' - ((n-1)/rho) Phi' - tau |Phi'| = lam Phi on a fine 1D grid and
  runs the same alternating scheme as the 2D optimizer (the 1D drift is a
  sign), with the curvature term differenced centrally so the tau = 0 case
  stays second-order accurate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq

from .operator import ConvergenceError, InternalSolverError, inverse_power


@dataclass(frozen=True, eq=False)
class RadialResult:
    lam: float
    rho: np.ndarray             # sample radii (or 1D positions)
    Phi: np.ndarray             # max-normalized profile, zero at Dirichlet ends
    r_tau: float                # turning point (annulus), 0 for the ball
    n: int                      # space dimension of the reduction
    r_inner: float
    r_outer: float
    tau: float
    outer_iters: int = 0
    residual: float = float("nan")


class TurningPointError(ValueError):
    """Profile does not have the single increasing-then-decreasing shape."""


def _matching_function(lam: float, tau: float, L: float) -> float:
    """tau * T(lam) - 1 with T = tanh(c*s)/s, s = sqrt(tau^2 - 4 lam), c = L/4.

    Analytic across s = 0 (continues as tan(c*sigma)/sigma for lam > tau^2/4),
    strictly increasing in lam on the relevant bracket, and free of the
    spurious root the raw matching condition has at lam = tau^2/4.
    """
    c = 0.25 * L
    z = tau * tau - 4.0 * lam
    if abs(z) * c * c < 1e-6:
        T = c * (1.0 - (c * c * z) / 3.0 + 2.0 * (c * c * z) ** 2 / 15.0)
    elif z > 0:
        s = math.sqrt(z)
        T = math.tanh(c * s) / s
    else:
        sig = math.sqrt(-z)
        T = math.tan(c * sig) / sig
    return tau * T - 1.0


def interval_eigenvalue(L: float, tau: float, nodes: int = 4097) -> RadialResult:
    """Optimal-drift eigenvalue and profile on the interval (0, L).

    By symmetry the maximum sits at L/2; the matching condition for the
    closed-form halves is solved by bracketed root finding on
    (0, (pi/L)^2], which always contains the eigenvalue.  Resolves lambda to
    near machine precision relative for tau*L up to several hundred.
    """
    if not (L > 0):
        raise ValueError(f"interval length must be positive, got {L}")
    if tau < 0:
        raise ValueError(f"drift bound must be nonnegative, got {tau}")
    x = np.linspace(0.0, L, int(nodes))

    lam0 = (math.pi / L) ** 2
    if tau == 0.0:
        Phi = np.sin(math.pi * x / L)
        Phi[0] = Phi[-1] = 0.0
        return RadialResult(lam=lam0, rho=x, Phi=Phi, r_tau=L / 2, n=1,
                            r_inner=0.0, r_outer=L, tau=tau)

    f_lo = _matching_function(0.0, tau, L)
    f_hi = _matching_function(lam0, tau, L)
    if not (f_lo < 0.0 < f_hi):
        raise InternalSolverError(
            f"matching-condition bracket failure at tau={tau}, L={L} "
            f"(f(0)={f_lo:.3e}, f(lam0)={f_hi:.3e}); this signals a formula bug "
            "or tau*L beyond floating-point range")
    lam = brentq(_matching_function, 0.0, lam0, args=(tau, L),
                 xtol=1e-300, rtol=8.9e-16, maxiter=200)

    s_left = np.minimum(x, L - x)
    z = tau * tau - 4.0 * lam
    if z > 1e-12 * tau * tau:
        s = math.sqrt(z)
        mu1, mu2 = (-tau + s) / 2.0, (-tau - s) / 2.0
        half = np.exp(mu1 * s_left) - np.exp(mu2 * s_left)
        peak = math.exp(mu1 * L / 2) - math.exp(mu2 * L / 2)
    elif z < -1e-12 * tau * tau:
        omega = math.sqrt(-z) / 2.0
        half = np.exp(-tau * s_left / 2) * np.sin(omega * s_left)
        peak = math.exp(-tau * L / 4) * math.sin(omega * L / 2)
    else:
        half = s_left * np.exp(-tau * s_left / 2)
        peak = (L / 2) * math.exp(-tau * L / 4)
    Phi = half / peak
    Phi[0] = Phi[-1] = 0.0
    return RadialResult(lam=float(lam), rho=x, Phi=Phi, r_tau=L / 2, n=1,
                        r_inner=0.0, r_outer=L, tau=tau)


def _assemble_radial(rho: np.ndarray, h: float, n: int, ball: bool,
                     w: np.ndarray) -> sp.csr_matrix:
    """Tridiagonal operator for -Phi'' - ((n-1)/rho) Phi' + w Phi'.

    Unknowns are rho[0..m-1] for the ball (center included, Neumann by
    symmetry) and the interior nodes rho[1..m-2] of [r, R] for the annulus.
    The curvature term is centrally differenced (M-matrix safe for n <= 3);
    the drift w is upwinded per node.
    """
    m = len(rho)
    inv_h2 = 1.0 / (h * h)
    diag = np.full(m, 2.0 * inv_h2)
    lower = np.full(m - 1, -inv_h2)   # coefficient on Phi_{j-1}, rows 1..m-1
    upper = np.full(m - 1, -inv_h2)   # coefficient on Phi_{j+1}, rows 0..m-2

    start = 0
    if ball:
        # Center row: laplacian -> 2n (Phi_0 - Phi_1)/h^2, no drift (grad = 0).
        diag[0] = 2.0 * n * inv_h2
        upper[0] = -2.0 * n * inv_h2
        start = 1

    # -((n-1)/rho) Phi' central: +curv on the west leg, -curv on the east leg.
    curv = np.zeros(m)
    curv[start:] = (n - 1) / (2.0 * rho[start:] * h)
    lower[max(start, 1) - 1:] += curv[max(start, 1):]
    upper[start:] -= curv[start:m - 1]

    pos = np.maximum(w, 0.0)
    neg = np.minimum(w, 0.0)
    if ball:
        pos[0] = neg[0] = 0.0
    diag += (pos - neg) / h
    lower -= pos[1:] / h
    upper[start:] += neg[start:m - 1] / h
    return sp.diags([lower, diag, upper], offsets=[-1, 0, 1], format="csr")


def radial_eigenpair(n: int, r: float, R: float, tau: float,
                     nodes: int = 100_001, tol: float = 1e-12,
                     max_outer: int = 100) -> RadialResult:
    """Radial optimal-drift eigenpair on the ball (r = 0) or annulus.

    Alternates between a frozen-sign linear eigensolve and the 1D drift
    update w = -tau * sign(Phi'), on a uniform grid of ``nodes`` points over
    [r, R].  The ball uses the symmetry condition Phi'(0) = 0 at the center.
    Returns the max-normalized profile and, for the annulus, the turning
    point located by the sign change of the discrete derivative.
    """
    if n < 2:
        raise ValueError(f"radial reduction needs dimension n >= 2, got {n}")
    if not (0 <= r < R):
        raise ValueError(f"radii must satisfy 0 <= r < R, got r={r}, R={R}")
    if nodes < 100:
        raise ValueError(f"need at least 100 grid nodes, got {nodes}")
    if tau < 0:
        raise ValueError(f"drift bound must be nonnegative, got {tau}")

    ball = r == 0.0
    full = np.linspace(r, R, int(nodes))
    h = float(full[1] - full[0])
    rho = full[:-1] if ball else full[1:-1]
    m = len(rho)

    # The attainable residual floor on a fine grid scales like eps/h^2 (the
    # stencil magnitude); measure convergence against it.
    tol_resid = max(tol, 50.0 * np.finfo(float).eps / (h * h))

    w = np.zeros(m)
    phi = None
    lam_prev = np.inf
    lam = np.inf
    iters_total = 0
    lam_floor = 0.0
    for outer in range(1, max_outer + 1):
        A = _assemble_radial(rho, h, n, ball, w)
        lam_floor = (4.0 * np.finfo(float).eps
                     * float(np.abs(A).sum(axis=1).max()) / math.sqrt(m))
        lam, phi, it, resid = inverse_power(A, tol, max_iter=2000, x0=phi,
                                            tol_resid=tol_resid,
                                            stagnation_window=20)
        iters_total += it
        g = np.zeros(m)
        g[1:-1] = (phi[2:] - phi[:-2]) / (2 * h)
        if ball:
            g[0] = 0.0
            g[-1] = (0.0 - phi[-2]) / (2 * h)      # Dirichlet 0 beyond the end
        else:
            g[0] = (phi[1] - 0.0) / (2 * h)
            g[-1] = (0.0 - phi[-2]) / (2 * h)
        floor = h * h * np.abs(g).max()
        w_new = np.where(np.abs(g) > floor, -tau * np.sign(g), 0.0)
        if ball:
            w_new[0] = 0.0
        nl_resid = float(np.abs(_assemble_radial(rho, h, n, ball, w_new) @ phi
                                - lam * phi).max())
        if (abs(lam - lam_prev) <= tol * max(abs(lam), 1.0)
                and nl_resid <= max(tol_resid, 4.0 * resid)):
            break
        lam_prev = lam
        w = w_new
    else:
        raise ConvergenceError(
            f"radial alternating solve did not converge in {max_outer} outer "
            f"iterations at tau={tau}", iterations=max_outer)

    Phi = np.zeros(len(full))
    if ball:
        Phi[:-1] = phi
    else:
        Phi[1:-1] = phi
    Phi /= Phi.max()

    if ball:
        r_tau = 0.0
    else:
        r_tau = turning_point(full, Phi)
        if not (r < r_tau < R):
            raise InternalSolverError(
                f"turning point {r_tau:g} escaped ({r:g}, {R:g})")
    return RadialResult(lam=float(lam), rho=full, Phi=Phi, r_tau=float(r_tau),
                        n=n, r_inner=float(r), r_outer=float(R), tau=float(tau),
                        outer_iters=outer, residual=nl_resid)


def turning_point(rho: np.ndarray, Phi: np.ndarray) -> float:
    """Radius where the profile switches from increasing to decreasing.

    Requires exactly one sign change of the discrete derivative, from + to -;
    anything else violates the single-turning-point structure and flags a
    solver bug.  The location interpolates the derivative zero linearly
    between the two bracketing cell midpoints (the profile has a kink there,
    so higher order is unjustified).
    """
    rho = np.asarray(rho, dtype=float)
    Phi = np.asarray(Phi, dtype=float)
    if len(rho) != len(Phi) or len(rho) < 3:
        raise ValueError("profile table needs matching rho/Phi with >= 3 samples")
    d = np.diff(Phi)
    tiny = 1e-14 * max(np.abs(Phi).max(), 1e-300)
    sign = np.sign(d)
    sign[np.abs(d) <= tiny] = 0
    nz = np.flatnonzero(sign)
    if len(nz) == 0:
        raise TurningPointError("no turning point: profile is flat")
    comp = sign[nz]
    flips = np.flatnonzero(comp[:-1] != comp[1:])
    if comp[0] < 0 or comp[-1] > 0 or len(flips) == 0:
        raise TurningPointError("no turning point: profile is monotone")
    if len(flips) > 1:
        raise TurningPointError(
            f"multiple turning points ({len(flips)} monotonicity changes)")
    i = nz[flips[0]]          # last increasing cell
    j = nz[flips[0] + 1]      # first decreasing cell
    h = rho[1] - rho[0]
    mid_i = 0.5 * (rho[i] + rho[i + 1])
    mid_j = 0.5 * (rho[j] + rho[j + 1])
    di, dj = d[i] / h, d[j] / h
    return float(mid_i + (mid_j - mid_i) * di / (di - dj))
