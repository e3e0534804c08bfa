"""Local null control of the nonlinear nonlocal equation.

Simplified Newton iteration frozen at the zero linearization: each outer
step solves the *linear* null-control problem against the current nonlinear
residual, exactly the right-inverse construction that proves local
controllability.  The final control is replayed through the genuine
nonlinear solver before success is declared.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .coeffs import ProblemData
from .errors import NewtonDivergence
from .grid import LogValue, SpaceTimeGrid, integrate_space
from .hum import LinearControlProblem, PenaltySchedule, solve_null_control, terminal_l2
from .pde import apply_operator, forward_solve_nonlinear

__all__ = ["NewtonState", "residual_source", "local_null_control"]

TOL_NEWTON = 1e-6
MAXIT_NEWTON = 25


@dataclass
class NewtonState:
    k: int
    residual_norm: LogValue
    step_norm: Optional[LogValue]
    terminal_norm_linear: float
    terminal_norm_nonlinear: Optional[float] = None


def residual_source(
    u: np.ndarray, pd: ProblemData, c: np.ndarray, prob: LinearControlProblem
) -> np.ndarray:
    """Source g(u) that makes the zero-linearized equation reproduce the
    nonlinear one: g = -[f(t,x,u) - c u] + [(ell(int u) - 1) (a u_x)_x],
    with the same discrete operator as the solvers (u_t - ell (a u_x)_x + f
    = h rearranged around the zero linearization)."""
    grid = prob.grid
    x = grid.x
    g = np.zeros_like(u)
    for j in range(1, grid.nt + 1):
        t = grid.t[j]
        row = u[j]
        fval = np.asarray(pd.f.f(float(t), x, row), dtype=float)
        r = integrate_space(row, grid)
        lfac = float(pd.ell.ell(r)) - 1.0
        g[j] = -(fval - c[j] * row) + lfac * apply_operator(prob.op, row)
        g[j, 0] = 0.0
        g[j, -1] = 0.0
    return g


def _residual_weights(prob: LinearControlProblem):
    """Effective squared rho0 weights for measuring residual sources: same
    shift-and-cap treatment as the control functional (exact weights
    overflow; the shift is reported back through the LogValue)."""
    lw = 2.0 * prob.fields.log_rho0
    interior = slice(1, prob.grid.nt)
    kappa2 = float(np.min(lw[interior]))
    W = np.zeros_like(lw)
    W[interior] = np.exp(np.minimum(lw[interior] - kappa2, prob.log_weight_cap))
    return W, kappa2


def _weighted_norm(
    W: np.ndarray, kappa2: float, v: np.ndarray, grid: SpaceTimeGrid
) -> LogValue:
    wt = grid.interior_time_weights
    d = grid.dual_widths
    with np.errstate(over="ignore"):
        val = float(np.einsum("j,ji,i->", wt, W[1:-1] * v[1:-1] ** 2, d))
    return LogValue.from_float(val).shifted(kappa2)


def local_null_control(
    pd: ProblemData,
    prob: LinearControlProblem,
    schedule: PenaltySchedule,
    tol_newton: float = TOL_NEWTON,
    maxit: int = MAXIT_NEWTON,
):
    """Outer Newton loop: returns (h, u_nonlinear, history).

    Raises NewtonDivergence after 3 consecutive residual-norm increases,
    which is the numerical witness that the initial datum sits outside the
    local controllability basin.
    """
    grid = prob.grid
    u0 = pd.u0
    W, kappa2 = _residual_weights(prob)
    c = prob.c

    history: List[NewtonState] = []
    u = np.zeros((grid.nt + 1, grid.nx + 1))
    h = None
    g_prev = None
    prev_res: Optional[LogValue] = None
    grow = 0
    converged = False

    for k in range(maxit):
        g = residual_source(u, pd, c, prob)
        res_norm = _weighted_norm(W, kappa2, g, grid)
        if prev_res is not None and not prev_res.is_zero():
            if res_norm.ratio(prev_res).log() > 0.0:
                grow += 1
                if grow >= 3:
                    raise NewtonDivergence(
                        f"residual norm grew {grow} consecutive iterations "
                        f"(iteration {k}); initial datum outside the local basin"
                    )
            else:
                grow = 0
        step_norm = None
        if g_prev is not None:
            step_norm = _weighted_norm(W, kappa2, g - g_prev, grid)
        result = solve_null_control(g, u0, schedule, prob)
        u, h = result.u, result.h
        history.append(
            NewtonState(
                k=k,
                residual_norm=res_norm,
                step_norm=step_norm,
                terminal_norm_linear=result.terminal_norm,
            )
        )
        if step_norm is not None:
            if res_norm.is_zero() or step_norm.ratio(res_norm).log() <= math.log(
                tol_newton
            ):
                converged = True
                break
        g_prev = g
        prev_res = res_norm

    u_nl = forward_solve_nonlinear(pd, h, grid, prob.op)
    history[-1].terminal_norm_nonlinear = terminal_l2(u_nl, grid)
    return h, u_nl, history, converged
