"""Quantitative estimate checks evaluated on converged solutions.

Every inequality here is a theorem for the continuum solution, so a
failure beyond the stated discretization slack points at a solver bug,
not at the estimate.  The checks:

* the weighted energy estimate with weight e^{2 alpha x},
* the temperature decay envelope M_alpha e^{-alpha x},
* the per-angle intensity decay bounds,
* the flux identity T' = <mu psi> and the moment-invariant drift.

On the moment invariant: bracketing mu * (transport equation) gives
d/dx <mu^2 psi> = -<mu psi>, so with the flux identity it is
T + <mu^2 psi> that stays constant.  The drift of T - <mu^2 psi> is
reported as well, without a sign assertion, since the two appear
interchanged in parts of the source material; only the flux identity
itself is asserted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .discretization import bracket, ddx, moment
from .errors import ContractViolationError
from .spectral import m_alpha

__all__ = [
    "weighted_estimate_nonlinear",
    "decay_envelope",
    "intensity_decay",
    "conservation_report",
    "ConservationReport",
]


def weighted_estimate_nonlinear(solution, alpha, bd, tol_rel=0.02):
    """Evaluate lhs <= rhs * (1 + tol_rel) for the energy estimate

    lhs = int e^{2ax} 4T^3 |T'|^2 dx
        + (1-a) int <e^{2ax} (psi - T^4)^2> dx
        + (1/2) int_{-1}^0 |mu| (psi(0,.) - T_b^4)^2 dmu,
    rhs = (1/2) int_0^1 mu (psi_b - T_b^4)^2 dmu.

    Returns (lhs, rhs, passed).
    """
    if not (0.0 <= alpha < 1.0):
        raise ContractViolationError("alpha must lie in [0, 1)")
    grid = solution.grid
    x = grid.x
    T = solution.T.values
    psi = solution.psi.values
    wgt = np.exp(2.0 * alpha * x)
    dT = ddx(grid, T)
    term1 = np.trapezoid(wgt * 4.0 * T**3 * dT**2, x)
    dev = psi - T[:, None] ** 4
    term2 = (1.0 - alpha) * np.trapezoid(wgt * bracket(grid, dev**2), x)
    out0 = psi[0, grid.neg] - bd.T_b**4
    term3 = 0.5 * float(np.sum(grid.w[grid.neg] * (-grid.mu[grid.neg]) * out0**2))
    lhs = float(term1 + term2 + term3)
    rhs = bd.well_preparedness(grid)
    return lhs, rhs, bool(lhs <= rhs * (1.0 + tol_rel) + 1e-14)


def weighted_estimate_partial(solution, alpha, bd):
    """Cumulative-in-x left side of the energy estimate (nonneg integrands
    plus the constant outflow term), for the monotonicity diagnostic."""
    grid = solution.grid
    x = grid.x
    T = solution.T.values
    psi = solution.psi.values
    wgt = np.exp(2.0 * alpha * x)
    dT = ddx(grid, T)
    f1 = wgt * 4.0 * T**3 * dT**2
    f2 = (1.0 - alpha) * wgt * bracket(grid, (psi - T[:, None] ** 4) ** 2)
    out0 = psi[0, grid.neg] - bd.T_b**4
    term3 = 0.5 * float(np.sum(grid.w[grid.neg] * (-grid.mu[grid.neg]) * out0**2))
    dxc = np.diff(x)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * dxc * ((f1 + f2)[:-1] + (f1 + f2)[1:]))])
    return cum + term3


def decay_envelope(solution, alpha, T_inf=None, bd=None, tol_rel=0.02,
                   atol=0.0, fit_floor=1e-12):
    """Check |T(x) - T_inf| <= M_alpha e^{-alpha x} (1 + tol_rel) + atol
    at every node and fit the observed log-decay rate.

    Returns (max_violation, fitted_rate); the rate is None when fewer
    than two nodes sit above ``fit_floor`` (nothing to fit, e.g. the
    well-prepared constant solution).
    """
    if not (0.0 < alpha < 1.0):
        raise ContractViolationError("alpha must lie in (0, 1)")
    if bd is None:
        raise ContractViolationError("boundary data is required for M_alpha")
    grid = solution.grid
    if T_inf is None:
        T_inf = solution.T_inf
    dev = np.abs(solution.T.values - T_inf)
    env = m_alpha(grid, bd, alpha) * np.exp(-alpha * grid.x)
    violation = dev - env * (1.0 + tol_rel) - atol
    max_violation = float(np.max(violation))
    mask = dev > fit_floor
    rate = None
    if mask.sum() >= 2:
        rate = float(np.polyfit(grid.x[mask], np.log(dev[mask]), 1)[0])
    return max_violation, rate


def intensity_decay(solution, alpha, T_inf=None, bd=None, tol_rel=0.02,
                    atol=1e-10):
    """Worst relative violation of the per-angle bounds

    mu > 0: |psi - T_inf^4| <= |psi_b - T_b^4| e^{-x/mu}
                               + 4 (T_b + 2 M_a)^3 M_a e^{-ax} / (1 - mu a),
    mu < 0: |psi - T_inf^4| <= 4 (T_b + 2 M_a)^3 M_a e^{-ax} / (1 - mu a).

    Returns max(0, max over nodes/angles of value/bound - 1 - tol_rel).
    ``atol`` is the roundoff allowance on the value side: in the
    well-prepared case the bound is identically zero while the computed
    fields carry plateau-level floating-point noise.
    """
    if not (0.0 < alpha < 1.0):
        raise ContractViolationError("alpha must lie in (0, 1)")
    if bd is None:
        raise ContractViolationError("boundary data is required for M_alpha")
    grid = solution.grid
    if T_inf is None:
        T_inf = solution.T_inf
    x = grid.x
    mu = grid.mu
    Ma = m_alpha(grid, bd, alpha)
    amp = 4.0 * (bd.T_b + 2.0 * Ma) ** 3 * Ma
    common = amp * np.exp(-alpha * x)[:, None] / (1.0 - mu[None, :] * alpha)
    bound = common.copy()
    pos = grid.pos
    inflow_gap = np.abs(bd.psi_b - bd.T_b**4)
    bound[:, pos] += inflow_gap[None, :] * np.exp(-x[:, None] / mu[pos][None, :])
    value = np.maximum(np.abs(solution.psi.values - T_inf**4) - atol, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(bound > 0, value / bound, np.where(value > 0, np.inf, 0.0))
    return float(max(0.0, np.max(rel) - 1.0 - tol_rel))


@dataclass
class ConservationReport:
    flux_residual_max: float          # max |T' - <mu psi>|
    invariant_drift: float            # range of T - <mu^2 psi>  (reported only)
    sum_invariant_drift: float        # range of T + <mu^2 psi>  (the theorem)


def conservation_report(solution):
    """Flux identity residual and moment-invariant drifts."""
    grid = solution.grid
    T = solution.T.values
    psi = solution.psi.values
    flux = ddx(grid, T) - moment(grid, psi, 1)
    mom2 = moment(grid, psi, 2)
    minus = T - mom2
    plus = T + mom2
    return ConservationReport(
        flux_residual_max=float(np.max(np.abs(flux))),
        invariant_drift=float(np.max(minus) - np.min(minus)),
        sum_invariant_drift=float(np.max(plus) - np.min(plus)),
    )
