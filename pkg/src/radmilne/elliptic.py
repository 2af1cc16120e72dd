"""The temperature half of the system: -T'' + c*phi(T) = g on [0, B] with
T(0) = T_b and T'(B) = 0.

``phi`` is the strictly increasing extension of T^4 used to run the
maximum-principle arguments outside [0, gamma]:

    phi(T) = T / (1 - T)                      for T < 0,
    phi(T) = T^4                              for 0 <= T <= gamma,
    phi(T) = gamma^4 + (T-gamma)/(1+T-gamma)  for T > gamma.

The Green operator of -d^2/dx^2 with these boundary conditions is the
double integral f(x) = int_0^x int_t^B h(s) ds dt; ``green_apply``
evaluates it with per-cell trapezoids.  ``solve_monotone_ode`` solves the
nonlinear two-point problem by damped Newton on the second-order
finite-difference system (Dirichlet row at x=0, ghost-node symmetric
stencil for T'(B)=0).  The Jacobian is a tridiagonal M-matrix because phi
is nondecreasing, so the discrete solution inherits the comparison
principle exactly: larger source or boundary data never produces a
smaller temperature anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .discretization import TemperatureField
from .errors import ContractViolationError, IterationFailureError

__all__ = [
    "PhiExtension",
    "green_apply",
    "solve_monotone_ode",
    "ode_monotone_check",
    "neg_laplacian_banded",
]


@dataclass(frozen=True)
class PhiExtension:
    """Monotone extension of T^4 capped at gamma."""

    gamma: float

    def __post_init__(self):
        if self.gamma < 0:
            raise ContractViolationError("gamma must be nonnegative")

    def __call__(self, T):
        arr = np.asarray(T, dtype=float)
        scalar = arr.ndim == 0
        arr = np.atleast_1d(arr)
        g = self.gamma
        below = arr < 0
        above = arr > g
        out = arr**4
        if below.any():
            out[below] = arr[below] / (1.0 - arr[below])
        if above.any():
            out[above] = g**4 + (arr[above] - g) / (1.0 + arr[above] - g)
        return float(out[0]) if scalar else out

    def deriv(self, T):
        arr = np.asarray(T, dtype=float)
        scalar = arr.ndim == 0
        arr = np.atleast_1d(arr)
        g = self.gamma
        below = arr < 0
        above = arr > g
        out = 4.0 * arr**3
        if below.any():
            out[below] = 1.0 / (1.0 - arr[below]) ** 2
        if above.any():
            out[above] = 1.0 / (1.0 + arr[above] - g) ** 2
        return float(out[0]) if scalar else out


def neg_laplacian_banded(grid):
    """Diagonals (lower, diag, upper) of the -d^2/dx^2 stencil with a
    Dirichlet row at node 0 and the ghost-node Neumann row at node nx-1.

    Row i of the matrix is lower[i-1]*u[i-1] + diag[i]*u[i] + upper[i]*u[i+1].
    """
    x = grid.x
    nx = grid.nx
    lower = np.zeros(nx - 1)
    diag = np.zeros(nx)
    upper = np.zeros(nx - 1)
    diag[0] = 1.0
    hm = np.diff(x)[:-1]
    hp = np.diff(x)[1:]
    lower[:-1] = -2.0 / (hm * (hm + hp))
    diag[1:-1] = 2.0 / (hm * hp)
    upper[1:] = -2.0 / (hp * (hm + hp))
    hL = x[-1] - x[-2]
    lower[-1] = -2.0 / hL**2
    diag[-1] = 2.0 / hL**2
    return lower, diag, upper


def banded_to_dense(lower, diag, upper):
    A = np.diag(diag)
    A += np.diag(lower, -1)
    A += np.diag(upper, 1)
    return A


def _solve_tridiag(lower, diag, upper, rhs):
    nx = diag.size
    ab = np.zeros((3, nx))
    ab[0, 1:] = upper
    ab[1, :] = diag
    ab[2, :-1] = lower
    return solve_banded((1, 1), ab, rhs)


def green_apply(grid, h):
    """f(x) = int_0^x int_t^B h(s) ds dt, per-cell trapezoids.

    Satisfies f(0) = 0 exactly and T'(B) = 0 structurally (the inner
    integral vanishes at B).
    """
    h = np.asarray(h, dtype=float)
    if h.shape != (grid.nx,):
        raise ContractViolationError("source must have one value per node")
    dx = np.diff(grid.x)
    cells = 0.5 * dx * (h[:-1] + h[1:])
    # F[i] = int_{x_i}^B h
    F = np.concatenate([np.cumsum(cells[::-1])[::-1], [0.0]])
    inner = 0.5 * dx * (F[:-1] + F[1:])
    return np.concatenate([[0.0], np.cumsum(inner)])


def solve_monotone_ode(grid, g, T_b, c, phi, tol=1e-10, max_iter=60):
    """Solve -T'' + c*phi(T) = g, T(0)=T_b, T'(B)=0 by damped Newton.

    Preconditions (maximum-principle regime): 0 <= g <= c*phi(gamma) and
    0 <= T_b <= gamma.  The returned temperature then lies in [0, gamma]
    up to roundoff.  The discrete residual is driven below ``tol`` in max
    norm; non-convergence raises IterationFailureError.
    """
    g = np.asarray(g, dtype=float)
    if g.shape != (grid.nx,):
        raise ContractViolationError("source must have one value per node")
    cap = c * phi(phi.gamma)
    scale = max(1.0, abs(cap))
    if np.any(g < -1e-9 * scale) or np.any(g > cap + 1e-9 * scale):
        raise ContractViolationError("source must satisfy 0 <= g <= c*phi(gamma)")
    if not (0.0 <= T_b <= phi.gamma + 1e-12):
        raise ContractViolationError("need 0 <= T_b <= gamma")

    lower, diag, upper = neg_laplacian_banded(grid)
    # the 1/h^2 rows cap how small the residual can be evaluated
    eps = np.finfo(float).eps
    noise = eps * (np.max(diag) * max(1.0, phi.gamma) + cap + np.max(np.abs(g)) + 1.0)
    eff_tol = max(tol, 4.0 * noise)

    def residual(T):
        AT = diag * T
        AT[1:] += lower * T[:-1]
        AT[:-1] += upper * T[1:]
        F = AT + c * phi(T) - g
        F[0] = T[0] - T_b
        return F

    T = np.full(grid.nx, min(max(T_b, 0.0), phi.gamma))
    F = residual(T)
    for _ in range(max_iter):
        err = np.max(np.abs(F))
        if err < eff_tol:
            return TemperatureField(grid, T)
        dphi = c * phi.deriv(T)
        dphi[0] = 0.0
        jl = lower.copy()
        jl[0] = 0.0  # Dirichlet row has no coupling
        ju = upper.copy()
        ju[0] = 0.0
        step = _solve_tridiag(jl, diag + dphi, ju, -F)
        lam = 1.0
        while lam > 1e-10:
            T_try = T + lam * step
            F_try = residual(T_try)
            if np.max(np.abs(F_try)) <= (1.0 - 1e-4 * lam) * err:
                T, F = T_try, F_try
                break
            lam *= 0.5
        else:
            if err <= 16.0 * noise:
                return TemperatureField(grid, T)  # at the fp floor
            T = T + step
            F = residual(T)
    raise IterationFailureError(
        f"monotone ODE solve did not reach tol={tol:g} in {max_iter} iterations",
        residual=float(np.max(np.abs(F))))


def ode_monotone_check(grid, g1, g2, T_b1, T_b2, c, phi, tol=1e-10, slack=None):
    """True iff the solution for (g1, T_b1) stays below the one for
    (g2, T_b2) pointwise, for ordered admissible inputs."""
    g1 = np.asarray(g1, dtype=float)
    g2 = np.asarray(g2, dtype=float)
    if np.any(g1 < 0) or np.any(g1 > g2) or not (0.0 <= T_b1 <= T_b2 <= phi.gamma):
        raise ContractViolationError(
            "need 0 <= g1 <= g2 <= c*phi(gamma) and 0 <= T_b1 <= T_b2 <= gamma")
    T1 = solve_monotone_ode(grid, g1, T_b1, c, phi, tol=tol)
    T2 = solve_monotone_ode(grid, g2, T_b2, c, phi, tol=tol)
    if slack is None:
        slack = tol
    return bool(np.min(T2.values - T1.values) >= -slack)
