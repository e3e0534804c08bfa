"""Implicit finite-difference solvers on the degenerate 1-D operator.

The discrete operator L approximates (a u_x)_x with a evaluated at cell
midpoints, which is symmetric and negative semidefinite in the dual-cell
weighted inner product.  The backward solver is the exact discrete adjoint of
the forward map (discretize-then-optimize), which the control iterations
rely on.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_banded

from .coeffs import DegeneracyCoefficient, ProblemData
from .errors import PicardDivergence
from .grid import SpaceTimeGrid, integrate_space

__all__ = [
    "DegenerateOperator",
    "assemble_degenerate_operator",
    "apply_operator",
    "forward_solve_linear",
    "adjoint_solve",
    "forward_solve_nonlinear",
    "omega_indicator",
    "duality_pairing",
    "h1a_norm_sq",
]

TOL_PICARD = 1e-10
MAXIT_PICARD = 50


@dataclass
class DegenerateOperator:
    """Tridiagonal representation of u -> (a u_x)_x on interior nodes.

    lower/diag/upper have length nx-1 (interior nodes 1..nx-1); lower[0] and
    upper[-1] are never used.  a_mid holds a at the nx cell midpoints.
    """

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    a_mid: np.ndarray
    dual: np.ndarray  # interior dual-cell widths, length nx-1


def assemble_degenerate_operator(
    a: DegeneracyCoefficient, grid: SpaceTimeGrid
) -> DegenerateOperator:
    x = grid.x
    nx = grid.nx
    xm = 0.5 * (x[:-1] + x[1:])
    a_mid = np.asarray(a(xm), dtype=float)
    hx = np.diff(x)  # length nx
    dual = grid.dual_widths[1:-1]  # interior widths

    # flux coefficients: c_right[i] = a_{i+1/2}/h_{i+1/2}, for interior i
    c_left = a_mid[:-1] / hx[:-1]  # couples node i with i-1
    c_right = a_mid[1:] / hx[1:]  # couples node i with i+1

    diag = -(c_left + c_right) / dual
    lower = np.empty(nx - 1)
    upper = np.empty(nx - 1)
    lower[1:] = c_left[1:] / dual[1:]
    upper[:-1] = c_right[:-1] / dual[:-1]
    lower[0] = 0.0
    upper[-1] = 0.0
    return DegenerateOperator(
        lower=lower, diag=diag, upper=upper, a_mid=a_mid, dual=dual
    )


def apply_operator(op: DegenerateOperator, u: np.ndarray) -> np.ndarray:
    """(L u) at all nodes of one row; Dirichlet rows map to 0."""
    out = np.zeros_like(u)
    out[1:-1] = op.diag * u[1:-1]
    out[2:-1] += op.lower[1:] * u[1:-2]
    out[1:-2] += op.upper[:-1] * u[2:-1]
    return out


def _step_matrix_banded(op: DegenerateOperator, dt: float, c_row: np.ndarray):
    """Banded form of I/dt - L + diag(c) on interior nodes."""
    n = op.diag.size
    ab = np.zeros((3, n))
    ab[0, 1:] = -op.upper[:-1]
    ab[1, :] = 1.0 / dt - op.diag + c_row
    ab[2, :-1] = -op.lower[1:]
    return ab


def omega_indicator(omega, grid: SpaceTimeGrid) -> np.ndarray:
    xl, xr = omega
    return ((grid.x >= xl) & (grid.x <= xr)).astype(float)


def forward_solve_linear(
    c: np.ndarray,
    g: Optional[np.ndarray],
    h: Optional[np.ndarray],
    u0: np.ndarray,
    grid: SpaceTimeGrid,
    op: DegenerateOperator,
) -> np.ndarray:
    """Implicit Euler for u_t - (a u_x)_x + c u = h + g.

    c, g, h are (nt+1, nx+1) tabulations (g/h may be None for zero); h is
    used as given — restriction to the control window is the caller's job.
    Returns the full (nt+1, nx+1) trajectory with exact Dirichlet rows.
    """
    nt, nx, dt = grid.nt, grid.nx, grid.dt
    u = np.zeros((nt + 1, nx + 1))
    u[0] = u0
    u[0, 0] = 0.0
    u[0, -1] = 0.0
    for j in range(1, nt + 1):
        rhs = u[j - 1, 1:-1] / dt
        if h is not None:
            rhs = rhs + h[j, 1:-1]
        if g is not None:
            rhs = rhs + g[j, 1:-1]
        ab = _step_matrix_banded(op, dt, c[j, 1:-1])
        u[j, 1:-1] = solve_banded((1, 1), ab, rhs)
    return u


def adjoint_solve(
    source: np.ndarray,
    c: np.ndarray,
    grid: SpaceTimeGrid,
    op: DegenerateOperator,
    terminal: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Backward implicit Euler for -p_t - (a p_x)_x + c p = source.

    Exact discrete adjoint of forward_solve_linear: with p[nt] = 0,
    sum_j dt*(source_j, u_j)_D = sum_j dt*(p_j, h_j)_D for u the forward
    solution with u0 = 0.  The step at row j uses the forward step matrix of
    row j itself; p[nt] is the terminal condition (default 0), and the
    backward recursion fills rows nt-1 .. 0 as p_j = M_{j+1}^{-1}(p_{j+1}/dt
    + source_{j+1}) shifted so that p_j pairs with forward row j+1... kept in
    the convention p[j] solves M_j p[j] = p[j+1]/dt + source[j] for j = nt..1
    and p[0] = p[1] (no equation at j=0; row 0 never enters the pairing).
    """
    nt, nx, dt = grid.nt, grid.nx, grid.dt
    p = np.zeros((nt + 1, nx + 1))
    if terminal is not None:
        p[nt] = terminal
        p[nt, 0] = 0.0
        p[nt, -1] = 0.0
    p_next = p[nt, 1:-1]
    for j in range(nt, 0, -1):
        rhs = p_next / dt + source[j, 1:-1]
        ab = _step_matrix_banded(op, dt, c[j, 1:-1])
        p[j, 1:-1] = solve_banded((1, 1), ab, rhs)
        p_next = p[j, 1:-1]
    p[0] = p[1]
    return p


def duality_pairing(a_traj: np.ndarray, b_traj: np.ndarray, grid: SpaceTimeGrid):
    """dt * sum_{j=1..nt} (a_j, b_j)_D — the pairing under which the backward
    solve is the exact transpose of the forward one."""
    rows = np.einsum("ji,i,ji->j", a_traj[1:], grid.dual_widths, b_traj[1:])
    return grid.dt * float(np.sum(rows))


def forward_solve_nonlinear(
    pd: ProblemData,
    h: Optional[np.ndarray],
    grid: SpaceTimeGrid,
    op: DegenerateOperator,
    tol: float = TOL_PICARD,
    maxit: int = MAXIT_PICARD,
) -> np.ndarray:
    """Implicit Euler for the nonlocal semilinear equation
    u_t - ell(int u) (a u_x)_x + f(t, x, u) = h.

    Per step, the nonlocal factor is lagged and f is Newton-linearized around
    the current inner iterate; the inner loop runs until the relative
    increment drops below tol.
    """
    nt, nx, dt = grid.nt, grid.nx, grid.dt
    x = grid.x
    u = np.zeros((nt + 1, nx + 1))
    u[0] = pd.u0
    u[0, 0] = 0.0
    u[0, -1] = 0.0
    f, df = pd.f.f, pd.f.df_du
    ell = pd.ell.ell

    for j in range(1, nt + 1):
        tj = grid.t[j]
        uk = u[j - 1].copy()
        base = u[j - 1, 1:-1] / dt
        if h is not None:
            base = base + h[j, 1:-1]
        for it in range(maxit):
            r = integrate_space(uk, grid)
            lk = float(ell(r))
            fk = np.asarray(f(tj, x[1:-1], uk[1:-1]), dtype=float)
            dfk = np.asarray(df(tj, x[1:-1], uk[1:-1]), dtype=float)
            rhs = base - fk + dfk * uk[1:-1]
            n = op.diag.size
            ab = np.zeros((3, n))
            ab[0, 1:] = -lk * op.upper[:-1]
            ab[1, :] = 1.0 / dt - lk * op.diag + dfk
            ab[2, :-1] = -lk * op.lower[1:]
            unew = np.zeros_like(uk)
            unew[1:-1] = solve_banded((1, 1), ab, rhs)
            scale = max(float(np.max(np.abs(unew))), 1e-300)
            inc = float(np.max(np.abs(unew - uk))) / scale
            uk = unew
            if inc <= tol:
                break
        else:
            raise PicardDivergence(
                f"inner loop at t={tj:.4g} did not reach tol={tol} "
                f"within {maxit} iterations (last increment {inc:.3g})"
            )
        u[j] = uk
    return u


def h1a_norm_sq(
    row: np.ndarray, op: DegenerateOperator, grid: SpaceTimeGrid
) -> float:
    """||w||^2 + ||sqrt(a) w_x||^2 with the gradient term on cell midpoints."""
    l2 = integrate_space(row * row, grid)
    dw = np.diff(row) / np.diff(grid.x)
    grad = float(np.sum(op.a_mid * dw * dw * np.diff(grid.x)))
    return l2 + grad
