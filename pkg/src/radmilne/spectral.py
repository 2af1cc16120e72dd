"""Numerical checks of the spectral assumption and its Hardy sufficient
conditions.

The assumption on a background T asks for constants beta0 > 0, M < 1 with

    M int e^{2 beta0 x} (2T^{3/2})^2 |f'|^2 dx
        >= 4 int e^{2 beta0 x} |d/dx(2T^{3/2})|^2 f^2 dx

for all f with f(0) = 0.  Its computable sufficient condition is the
Hardy-type supremum

    A0 = sup_r ( int_r^inf e^{2 beta x} 36 T |T'|^2 dx )^{1/2}
             * ( int_0^r e^{-2 beta x} / (4 T^3) dx )^{1/2},

with A0 < 1/2 forcing the best constant M0 <= 4 A0^2 < 1.  The module
evaluates A0 on the grid (tail truncated at B, justified by the verified
exponential decay of T'; a truncation estimate is reported), probes the
Rayleigh quotient over a family of test functions, evaluates the
near-well-prepared threshold C_b and the boundary gap, and runs the
perturbation-stability experiment A'(eps).

Only the sufficient direction is certified: quotients below one are
consistent with A0 < 1/2, and a quotient >= 1 falsifies the assumption,
but the test family is not exhaustive so nothing is inferred about A0
from small quotients.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .discretization import TemperatureField, ddx
from .errors import ContractViolationError

__all__ = [
    "SpectralReport",
    "RayleighResult",
    "PerturbationStability",
    "compute_A0",
    "compute_A1",
    "rayleigh_test",
    "compute_Cb",
    "boundary_gap",
    "m_alpha",
    "perturbation_stability",
    "build_report",
]


def _background(grid, T):
    T = T.values if isinstance(T, TemperatureField) else np.asarray(T, float)
    if T.shape != (grid.nx,):
        raise ContractViolationError("background T does not match the grid")
    return T


def _cumtrapz(y, x):
    dxc = np.diff(x)
    cells = 0.5 * dxc * (y[:-1] + y[1:])
    return np.concatenate([[0.0], np.cumsum(cells)])


def compute_A0(grid, T, beta):
    """Discrete supremum over grid nodes r of the paired tail/head
    integrals.  Returns +inf when T is not strictly positive (the 1/T^3
    head weight diverges)."""
    T = _background(grid, T)
    if np.min(T) <= 0.0:
        return float("inf")
    x = grid.x
    dT = ddx(grid, T)
    u = np.exp(2.0 * beta * x) * 36.0 * T * dT**2
    v = np.exp(-2.0 * beta * x) / (4.0 * T**3)
    head = _cumtrapz(v, x)
    cum_u = _cumtrapz(u, x)
    tail = cum_u[-1] - cum_u
    prod = tail * head
    return float(np.sqrt(np.max(prod)))


def compute_A1(grid, T):
    """The unweighted (beta = 0) variant of the Hardy supremum."""
    return compute_A0(grid, T, beta=0.0)


def a0_truncation_estimate(grid, T, beta):
    """Crude bound on the tail integral dropped beyond B, from the fitted
    decay rate of the integrand over the last quarter of the grid."""
    T = _background(grid, T)
    if np.min(T) <= 0.0:
        return float("inf")
    x = grid.x
    dT = ddx(grid, T)
    u = np.exp(2.0 * beta * x) * 36.0 * T * dT**2
    if u[-1] <= 0.0:
        return 0.0
    i0 = 3 * grid.nx // 4
    mask = u[i0:] > 0
    if mask.sum() < 2:
        return float("inf")
    slope = np.polyfit(x[i0:][mask], np.log(u[i0:][mask]), 1)[0]
    if slope >= 0:
        return float("inf")
    return float(u[-1] / (-slope))


@dataclass
class RayleighResult:
    max_quotient: float
    skipped: int
    worst_family: str = ""
    quotients: dict = field(default_factory=dict)


def rayleigh_test(grid, T, beta, K=20, c=1.0, n_random=50, seed=0, fs=None):
    """Max of  4 int e^{2bx} |d(2T^{3/2})|^2 f^2 / int e^{2bx} (2T^{3/2})^2 |f'|^2
    over the test family: sinusoids sin(k pi x / 2B), x e^{-cx}, and
    random cumulative integrals of nonnegative noise.  Every member
    vanishes at x = 0.  Members with denominator below 1e-14 are skipped
    and counted."""
    T = _background(grid, T)
    x = grid.x
    B = grid.B
    wgt = np.exp(2.0 * beta * x)
    w32 = 2.0 * np.maximum(T, 0.0) ** 1.5
    dw32 = ddx(grid, w32)
    num_w = 4.0 * wgt * dw32**2
    den_w = wgt * w32**2

    family = []
    for k in range(1, K + 1):
        omega = k * np.pi / (2.0 * B)
        family.append((f"sin{k}", np.sin(omega * x), omega * np.cos(omega * x)))
    family.append(("xexp", x * np.exp(-c * x), (1.0 - c * x) * np.exp(-c * x)))
    rng = np.random.default_rng(seed)
    for i in range(n_random):
        F = rng.random(grid.nx)
        family.append((f"rand{i}", _cumtrapz(F, x), F))
    if fs:
        family.extend(fs)

    best = 0.0
    worst_name = ""
    skipped = 0
    quotients = {}
    for name, f, fp in family:
        if abs(f[0]) > 1e-12:
            raise ContractViolationError(f"test function {name} has f(0) != 0")
        den = np.trapezoid(den_w * fp**2, x)
        if den < 1e-14:
            skipped += 1
            continue
        q = float(np.trapezoid(num_w * f**2, x) / den)
        quotients[name] = q
        if q > best:
            best, worst_name = q, name
    return RayleighResult(max_quotient=best, skipped=skipped,
                          worst_family=worst_name, quotients=quotients)


def compute_Cb(T_b, gamma, alpha, beta):
    """Near-well-prepared threshold
    C_b = min( T_b sqrt(3 a (1-a)) / 2,  T_b^3 b (a-b) sqrt(a) / (72 gamma) )."""
    if not (0.0 < beta < alpha < 1.0):
        raise ContractViolationError("need 0 < beta < alpha < 1")
    if not T_b > 0:
        raise ContractViolationError("T_b must be positive")
    if gamma < T_b:
        raise ContractViolationError("gamma must be >= T_b")
    first = 0.5 * T_b * np.sqrt(3.0 * alpha * (1.0 - alpha))
    second = T_b**3 * beta * (alpha - beta) * np.sqrt(alpha) / (72.0 * gamma)
    return float(min(first, second))


def boundary_gap(grid, bd):
    """(1/2) int_0^1 mu (psi_b - T_b^4)^2 dmu on the positive nodes."""
    return bd.well_preparedness(grid)


def m_alpha(grid, bd, alpha):
    """Decay amplitude M_alpha = (6 a (1-a))^{-1/2} (2 * gap)^{1/2}."""
    if not (0.0 < alpha < 1.0):
        raise ContractViolationError("alpha must lie in (0, 1)")
    gap = boundary_gap(grid, bd)
    return float(np.sqrt(2.0 * gap / (6.0 * alpha * (1.0 - alpha))))


@dataclass
class PerturbationStability:
    entries: list                      # [(eps, A'(eps))]
    first_eps_at_half: float | None


def perturbation_stability(grid, T, h, epsilons, beta):
    """A'(eps) = A0 of the perturbed background T + eps*h.

    Requires the unperturbed background to satisfy A0 < 1/2 and h(0) = 0.
    Divergent values (perturbation driving T through zero) are reported
    as inf, not asserted against.
    """
    T = _background(grid, T)
    h = np.asarray(h, dtype=float)
    if h.shape != (grid.nx,):
        raise ContractViolationError("h must have one value per node")
    if abs(h[0]) > 1e-12:
        raise ContractViolationError("perturbation must vanish at x = 0")
    base = compute_A0(grid, T, beta)
    if not base < 0.5:
        raise ContractViolationError(
            f"unperturbed background must satisfy A0 < 1/2 (got {base:.3g})")
    entries = []
    first = None
    for eps in epsilons:
        a = compute_A0(grid, T + eps * h, beta)
        entries.append((float(eps), a))
        if first is None and a >= 0.5:
            first = float(eps)
    return PerturbationStability(entries=entries, first_eps_at_half=first)


@dataclass
class SpectralReport:
    beta: float
    A0: float
    A0_squared: float
    A1: float
    rayleigh_max: float
    passes: dict
    rayleigh_skipped: int = 0
    truncation_estimate: float = 0.0


def build_report(grid, T, beta, K=20, n_random=50, seed=0):
    """Evaluate the full battery on one background.

    ``passes`` applies the sufficient-condition form A0 < 1/2 (which
    forces M0 <= 4 A0^2 < 1); the squared variant A0^2 < 1/2 is exposed
    for comparison without picking a side.
    """
    a0 = compute_A0(grid, T, beta)
    a1 = compute_A1(grid, T)
    ray = rayleigh_test(grid, T, beta, K=K, n_random=n_random, seed=seed)
    passes = {
        "A0_lt_half": bool(a0 < 0.5),
        "A0_squared_lt_half": bool(a0**2 < 0.5),
        "rayleigh_lt_1": bool(ray.max_quotient < 1.0),
        "hardy_consistent": bool(not (a0 < 0.5) or ray.max_quotient
                                 <= 4.0 * a0**2 + 0.05),
    }
    return SpectralReport(
        beta=float(beta),
        A0=a0,
        A0_squared=a0**2,
        A1=a1,
        rayleigh_max=ray.max_quotient,
        passes=passes,
        rayleigh_skipped=ray.skipped,
        truncation_estimate=a0_truncation_estimate(grid, T, beta),
    )
