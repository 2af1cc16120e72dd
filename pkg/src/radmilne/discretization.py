"""Spatial grid, angular quadrature and the integral/derivative primitives.

The slab lives on x in [0, B] (dimensionless optical depth) and direction
cosines mu in [-1, 1].  Angular integrals use the bracket

    <f> = int_{-1}^{1} f(mu) dmu  ~  sum_j w_j f(mu_j),

with a quadrature that is symmetric about mu = 0 and has no node at zero
(transport formulas divide by mu, and the reflective right boundary pairs
+mu with -mu).

Two angular rules are supported:

* ``"double-gauss"`` (default): Gauss-Legendre with nmu/2 nodes on each of
  (0, 1) and (-1, 0).  Half-range moments such as int_0^1 mu psi_b(mu) dmu
  are then exact for polynomial boundary data, which the boundary-flux
  functionals require.
* ``"legendre"``: classic Gauss-Legendre on [-1, 1] (higher full-range
  degree, but half-range moments pick up the |mu|-kink error).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError

__all__ = [
    "Grid",
    "TemperatureField",
    "IntensityField",
    "BoundaryData",
    "bracket",
    "moment",
    "ddx",
]


def _angular_rule(nmu, rule):
    if nmu < 2 or nmu % 2 != 0:
        raise ContractViolationError(f"nmu must be even and >= 2, got {nmu}")
    if rule == "double-gauss":
        t, wt = np.polynomial.legendre.leggauss(nmu // 2)
        mu_pos = 0.5 * (t + 1.0)
        w_pos = 0.5 * wt
        mu = np.concatenate([-mu_pos[::-1], mu_pos])
        w = np.concatenate([w_pos[::-1], w_pos])
    elif rule == "legendre":
        mu, w = np.polynomial.legendre.leggauss(nmu)
    else:
        raise ContractViolationError(f"unknown angular rule {rule!r}")
    return mu, w


@dataclass
class Grid:
    """Spatial nodes on [0, B] plus a symmetric angular quadrature.

    Immutable after construction; safe to share across concurrent solves.
    """

    B: float
    x: np.ndarray
    mu: np.ndarray
    w: np.ndarray
    angular_rule: str = "double-gauss"

    def __post_init__(self):
        self.x = np.ascontiguousarray(np.asarray(self.x, dtype=float))
        self.mu = np.ascontiguousarray(np.asarray(self.mu, dtype=float))
        self.w = np.ascontiguousarray(np.asarray(self.w, dtype=float))
        if self.x.ndim != 1 or self.x.size < 3:
            raise ContractViolationError("grid needs at least 3 spatial nodes")
        if self.x[0] != 0.0:
            raise ContractViolationError("x[0] must be exactly 0")
        if abs(self.x[-1] - self.B) > 1e-12 * max(1.0, self.B):
            raise ContractViolationError("x[-1] must equal B")
        if np.any(np.diff(self.x) <= 0):
            raise ContractViolationError("x must be strictly increasing")
        nmu = self.mu.size
        if nmu % 2 != 0 or self.w.size != nmu:
            raise ContractViolationError("mu/w must have matching even length")
        if abs(self.w.sum() - 2.0) > 1e-12:
            raise ContractViolationError("quadrature weights must sum to 2")
        if np.min(np.abs(self.mu)) < 1e-12:
            raise ContractViolationError("mu = 0 node is not allowed")
        # +/- pairing: mu[j] = -mu[nmu-1-j] with equal weights
        if not (np.allclose(self.mu, -self.mu[::-1], rtol=0, atol=1e-14)
                and np.allclose(self.w, self.w[::-1], rtol=0, atol=1e-14)):
            raise ContractViolationError("angular nodes must come in +/- pairs")
        if np.any(self.w <= 0):
            raise ContractViolationError("quadrature weights must be positive")
        for a in (self.x, self.mu, self.w):
            a.setflags(write=False)

    @classmethod
    def uniform(cls, B, nx=401, nmu=16, angular_rule="double-gauss"):
        """Uniform spatial grid with the requested angular rule."""
        if nx < 3:
            raise ContractViolationError("nx must be >= 3")
        if B <= 0:
            raise ContractViolationError("B must be positive")
        x = np.linspace(0.0, float(B), int(nx))
        mu, w = _angular_rule(int(nmu), angular_rule)
        return cls(B=float(B), x=x, mu=mu, w=w, angular_rule=angular_rule)

    @property
    def nx(self):
        return self.x.size

    @property
    def nmu(self):
        return self.mu.size

    @property
    def pos(self):
        """Indices of the positive angular nodes (ascending mu)."""
        return np.arange(self.nmu // 2, self.nmu)

    @property
    def neg(self):
        """Indices of the negative angular nodes (ascending mu)."""
        return np.arange(0, self.nmu // 2)

    @property
    def mu_pos(self):
        return self.mu[self.pos]

    @property
    def w_pos(self):
        return self.w[self.pos]

    def reflect(self, values):
        """Map per-angle values f(mu) to f(-mu) using the +/- pairing."""
        values = np.asarray(values)
        if values.shape[-1] != self.nmu:
            raise ContractViolationError("angular length mismatch")
        return values[..., ::-1]


def bracket(grid, f):
    """<f> = int_{-1}^1 f dmu by the grid quadrature.

    ``f`` carries the angular index on its last axis.
    """
    f = np.asarray(f, dtype=float)
    if f.shape[-1] != grid.nmu:
        raise ContractViolationError(
            f"expected last axis of length {grid.nmu}, got {f.shape}")
    return f @ grid.w


def moment(grid, f, k):
    """k-th angular moment int mu^k f dmu for k in {0, 1, 2}."""
    if k not in (0, 1, 2):
        raise ContractViolationError("moment power k must be 0, 1 or 2")
    f = np.asarray(f, dtype=float)
    if f.shape[-1] != grid.nmu:
        raise ContractViolationError(
            f"expected last axis of length {grid.nmu}, got {f.shape}")
    return f @ (grid.w * grid.mu**k)


def ddx(grid, values):
    """Spatial derivative: second-order central interior, second-order
    one-sided at the endpoints.  ``values`` indexed by node on axis 0."""
    values = np.asarray(values, dtype=float)
    if grid.nx < 3:
        raise ContractViolationError("ddx needs nx >= 3")
    if values.shape[0] != grid.nx:
        raise ContractViolationError("node count mismatch")
    return np.gradient(values, grid.x, axis=0, edge_order=2)


@dataclass
class TemperatureField:
    """T(x) sampled on the spatial nodes."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.nx,):
            raise ContractViolationError("temperature values must be (nx,)")
        if not np.all(np.isfinite(self.values)):
            raise ContractViolationError("temperature values must be finite")

    def deriv(self):
        return ddx(self.grid, self.values)


@dataclass
class IntensityField:
    """psi(x, mu) sampled on (spatial nodes) x (angular nodes)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.nx, self.grid.nmu):
            raise ContractViolationError("intensity values must be (nx, nmu)")
        if not np.all(np.isfinite(self.values)):
            raise ContractViolationError("intensity values must be finite")


@dataclass
class BoundaryData:
    """Dirichlet data: temperature T_b at x=0 and inflow psi_b(mu) for mu>0.

    ``psi_b`` holds values on the positive angular nodes in ascending-mu
    order.  Use :meth:`make` to build it from a scalar, a callable or an
    array.
    """

    T_b: float
    psi_b: np.ndarray

    def __post_init__(self):
        self.T_b = float(self.T_b)
        self.psi_b = np.asarray(self.psi_b, dtype=float)
        if self.T_b < 0:
            raise ContractViolationError("T_b must be nonnegative")
        if np.any(self.psi_b < 0) or not np.all(np.isfinite(self.psi_b)):
            raise ContractViolationError("psi_b must be finite and nonnegative")

    @classmethod
    def make(cls, grid, T_b, psi_b):
        """psi_b may be a scalar, a callable of mu, or an array of length
        nmu/2 (positive nodes, ascending)."""
        mu_pos = grid.mu_pos
        if callable(psi_b):
            vals = np.asarray([psi_b(m) for m in mu_pos], dtype=float)
        elif np.isscalar(psi_b):
            vals = np.full(mu_pos.size, float(psi_b))
        else:
            vals = np.asarray(psi_b, dtype=float)
            if vals.shape != mu_pos.shape:
                raise ContractViolationError(
                    f"psi_b table must have length {mu_pos.size}")
        return cls(T_b=float(T_b), psi_b=vals)

    @property
    def gamma(self):
        """gamma = max(T_b, sup psi_b^(1/4)), the maximum-principle cap."""
        top = float(self.psi_b.max()) if self.psi_b.size else 0.0
        return max(self.T_b, top ** 0.25)

    def well_preparedness(self, grid):
        """Half-range boundary gap (1/2) int_0^1 mu (psi_b - T_b^4)^2 dmu.

        Zero exactly when the data is well-prepared (psi_b = T_b^4).
        """
        d = self.psi_b - self.T_b**4
        return 0.5 * float(np.sum(grid.w_pos * grid.mu_pos * d * d))
