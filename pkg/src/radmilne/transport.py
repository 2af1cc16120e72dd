"""Exact-in-x solves of the linear transport equation mu dpsi/dx + psi = h.

The bounded-interval problem carries inflow psi(0, mu) = psi_b(mu) for
mu > 0 and the reflective condition psi(B, mu) = psi(B, -mu); the
half-space problem replaces reflection by the downwind integral from
infinity, with the source extended by its last value h(x) = h(B) for
x > B.

The source is treated as piecewise linear between nodes, and each cell is
integrated in closed form against the exponential kernel.  With
r = dx / |mu| and E = exp(-r) the two primitive integrals are

    P0(r) = int_0^r e^{-u} du       = 1 - E,
    P1(r) = int_0^r (u/r) e^{-u} du = (1 - (1 + r) E) / r,

so a downwind-marching step picks up E * psi_prev plus
h_near * P1 + h_far * (P0 - P1) from the cell (near = upwind node).  P1
switches to its power series for small r where the closed form cancels
catastrophically; both branches are exact for linear sources.  All
coefficients are nonnegative, so the discrete solution inherits the
kernel's monotonicity exactly.
"""

from __future__ import annotations

import numpy as np

from .discretization import IntensityField, bracket
from .errors import ContractViolationError

__all__ = [
    "solve_bounded",
    "solve_halfspace",
    "monotone_check",
    "BoundedSourceOperator",
]

# below this optical depth the P1 closed form loses digits; the series is
# exact to machine precision there
_SERIES_CUTOFF = 1e-2


def _p1(r):
    """(1 - (1+r) e^{-r}) / r, accurate for all r >= 0."""
    r = np.asarray(r, dtype=float)
    out = np.empty_like(r)
    small = r < _SERIES_CUTOFF
    rs = r[small]
    # sum_{n>=2} (-1)^n (n-1) r^{n-1} / n!
    out[small] = rs * (1 / 2 + rs * (-1 / 3 + rs * (1 / 8 + rs * (
        -1 / 30 + rs * (1 / 144 + rs * (-1 / 840 + rs / 5760))))))
    rl = r[~small]
    out[~small] = (-np.expm1(-rl) - rl * np.exp(-rl)) / rl
    return out


def _cell_coeffs(dx, mu_abs):
    """Marching coefficients per (cell, angle): E, near, far."""
    r = dx[:, None] / mu_abs[None, :]
    E = np.exp(-r)
    P1 = _p1(r)
    P0 = -np.expm1(-r)
    return E, P1, P0 - P1


def _check_source(grid, h):
    h = np.asarray(h, dtype=float)
    if h.ndim == 1:
        if h.shape != (grid.nx,):
            raise ContractViolationError("source must have one value per node")
        h = np.broadcast_to(h[:, None], (grid.nx, grid.nmu))
    elif h.shape != (grid.nx, grid.nmu):
        raise ContractViolationError("per-angle source must be (nx, nmu)")
    if not np.all(np.isfinite(h)):
        raise ContractViolationError("source must be finite")
    return h


def _check_inflow(grid, psi_b):
    npos = grid.nmu // 2
    if np.isscalar(psi_b):
        return np.full(npos, float(psi_b))
    psi_b = np.asarray(psi_b, dtype=float)
    if psi_b.shape != (npos,):
        raise ContractViolationError(
            f"inflow must have {npos} values (positive nodes, ascending)")
    return psi_b


def _march(grid, h, psi_b, neg_start):
    """Shared marching core.  ``neg_start`` maps the final positive-mu row
    psi(B, mu) and the source to the start value of the negative branch."""
    nx, nmu = grid.nx, grid.nmu
    pos, neg = grid.pos, grid.neg
    dx = np.diff(grid.x)
    mu_abs_pos = grid.mu[pos]          # ascending
    mu_abs_neg = -grid.mu[neg]         # descending (mirror of pos)

    psi = np.empty((nx, nmu))

    E, P1, P0mP1 = _cell_coeffs(dx, mu_abs_pos)
    psi[0, pos] = psi_b
    hp = h[:, pos]
    for i in range(nx - 1):
        psi[i + 1, pos] = E[i] * psi[i, pos] + P0mP1[i] * hp[i + 1] + P1[i] * hp[i]

    En, P1n, P0mP1n = _cell_coeffs(dx, mu_abs_neg)
    psi[nx - 1, neg] = neg_start(psi[nx - 1, pos])
    hn = h[:, neg]
    for i in range(nx - 2, -1, -1):
        psi[i, neg] = En[i] * psi[i + 1, neg] + P0mP1n[i] * hn[i] + P1n[i] * hn[i + 1]

    return psi


def solve_bounded(grid, h, psi_b):
    """Solve on [0, B] with inflow at x=0 and reflection at x=B.

    Parameters
    ----------
    h : (nx,) or (nx, nmu) array
        Source values at the nodes (piecewise linear in between).
    psi_b : scalar or (nmu/2,) array
        Inflow for the positive nodes, ascending-mu order.
    """
    h = _check_source(grid, h)
    psi_b = _check_inflow(grid, psi_b)
    # reflection: psi(B, -mu_j) = psi(B, mu_j); pos row is ascending in mu,
    # neg row is ascending in mu i.e. descending in |mu|, hence the flip
    psi = _march(grid, h, psi_b, neg_start=lambda top: top[::-1])
    return IntensityField(grid, psi)


def solve_halfspace(grid, h, psi_b):
    """Solve on [0, inf) sampled on [0, B]; h is extended by h(B) beyond B.

    For mu < 0 the start value at x = B is the closed-form downwind tail
    of the constant extension, which is h(B) itself.
    """
    h = _check_source(grid, h)
    psi_b = _check_inflow(grid, psi_b)
    h_end = h[-1, grid.neg]
    psi = _march(grid, h, psi_b, neg_start=lambda top: h_end.copy())
    return IntensityField(grid, psi)


def monotone_check(grid, h1, h2, psi_b1, psi_b2, slack=1e-12):
    """True iff the solution for (h1, psi_b1) stays below the one for
    (h2, psi_b2) at every node and angle, given ordered nonnegative inputs."""
    h1 = _check_source(grid, h1)
    h2 = _check_source(grid, h2)
    b1 = _check_inflow(grid, psi_b1)
    b2 = _check_inflow(grid, psi_b2)
    if np.any(h1 < 0) or np.any(b1 < 0):
        raise ContractViolationError("inputs must be nonnegative")
    if np.any(h1 > h2) or np.any(b1 > b2):
        raise ContractViolationError("inputs must be ordered: h1 <= h2, psi_b1 <= psi_b2")
    psi1 = solve_bounded(grid, h1, b1).values
    psi2 = solve_bounded(grid, h2, b2).values
    return bool(np.min(psi2 - psi1) >= -slack)


class BoundedSourceOperator:
    """Discrete response of <psi> to nodal sources on a fixed grid.

    ``matrix`` is the (nx, nx) map from angle-independent nodal source
    values to <psi> at the nodes (zero inflow, reflective right boundary).
    It is what couples the transport sweep into Newton / direct solves of
    the temperature equation, and it only depends on the grid, so build it
    once and share it.
    """

    def __init__(self, grid):
        self.grid = grid
        self.matrix = self._assemble()

    def _assemble(self):
        grid = self.grid
        nx = grid.nx
        dx = np.diff(grid.x)
        mu_abs_pos = grid.mu[grid.pos]
        w_pos = grid.w[grid.pos]
        w_neg = grid.w[grid.neg]

        E, P1, P0mP1 = _cell_coeffs(dx, mu_abs_pos)
        bra = np.zeros((nx, nx))

        # positive branch: hat sources = identity, march all columns at once
        cur = np.zeros((mu_abs_pos.size, nx))
        bra[0] += w_pos @ cur
        eye = np.eye(nx)
        for i in range(nx - 1):
            cur = E[i][:, None] * cur \
                + P0mP1[i][:, None] * eye[i + 1][None, :] \
                + P1[i][:, None] * eye[i][None, :]
            bra[i + 1] += w_pos @ cur

        # negative branch: start from the reflected positive values at B;
        # |mu| ordering is the mirror of the positive one
        En, P1n, P0mP1n = _cell_coeffs(dx, mu_abs_pos[::-1])
        cur = cur[::-1]
        bra[nx - 1] += w_neg @ cur
        for i in range(nx - 2, -1, -1):
            cur = En[i][:, None] * cur \
                + P0mP1n[i][:, None] * eye[i][None, :] \
                + P1n[i][:, None] * eye[i + 1][None, :]
            bra[i] += w_neg @ cur
        return bra

    def bracket_from_inflow(self, psi_b):
        """<psi> at the nodes for zero source and the given inflow."""
        psi = solve_bounded(self.grid, np.zeros(self.grid.nx), psi_b)
        return bracket(self.grid, psi.values)
