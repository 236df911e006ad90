"""Max-min SINR power control by bisection over linear feasibility checks."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .exceptions import IllPosed, Infeasible


@dataclass(frozen=True)
class SinrCoefficients:
    """Generic SINR ``eta_k a_k / (sum_j eta_j b[j, k] + c_k + noise_k)``.

    ``c`` already includes the active-RIS switch, so it is zero for a
    passive RIS.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    noise: np.ndarray
    w_norms2: np.ndarray
    budget: float

    @property
    def K(self) -> int:
        return self.a.size

    def sinr(self, eta) -> np.ndarray:
        eta = np.asarray(eta, dtype=float)
        return eta * self.a / (self.b.T @ eta + self.c + self.noise)

    def check(self) -> None:
        if np.any(self.a <= 0):
            raise IllPosed("desired-signal gains must be positive")
        if np.any(self.b < 0) or np.any(self.c < 0) or np.any(self.noise <= 0):
            raise IllPosed("interference and noise terms must be nonnegative (noise positive)")


@dataclass(frozen=True)
class PowerAllocation:
    eta: np.ndarray
    t: float
    feasible: bool
    trace: tuple = field(default=(), compare=False)  # (t, feasible) per bisection step


def pcsi_coefficients(h, H, p, W, noise, sigma_r2, delta, budget) -> SinrCoefficients:
    """Coefficients of the perfect-CSI downlink SINR.

    ``W`` holds one precoder per row. ``b[j, k]`` is the interference from
    UE ``j``'s stream at UE ``k``.
    """
    hb = (np.atleast_2d(h) * p) @ H.T
    M = hb @ W.T  # M[k, j] = hbar_k^T w_j
    G = np.abs(M) ** 2
    a = np.diag(G).copy()
    b = G.T.copy()
    np.fill_diagonal(b, 0.0)
    c = delta * sigma_r2 * np.sum(np.abs(np.atleast_2d(h) * p) ** 2, axis=1)
    K = a.size
    return SinrCoefficients(a, b, c, np.broadcast_to(noise, (K,)).astype(float),
                            np.sum(np.abs(W) ** 2, axis=1), float(budget))


def min_power_solution(t: float, coeffs: SinrCoefficients):
    """Componentwise-minimal powers reaching SINR ``t`` at every UE, or ``None``.

    Solves ``(I - t D_a^{-1} B^T) eta = t D_a^{-1} (c + noise)``; a positive
    solution exists iff the spectral radius of ``t D_a^{-1} B^T`` is below 1.
    """
    F = t * coeffs.b.T / coeffs.a[:, None]
    if np.max(np.abs(np.linalg.eigvals(F))) >= 1.0:
        return None
    rhs = t * (coeffs.c + coeffs.noise) / coeffs.a
    eta = np.linalg.solve(np.eye(coeffs.K) - F, rhs)
    if np.any(eta <= 0) or not np.all(np.isfinite(eta)):
        return None
    return eta


def feasibility_check(t: float, coeffs: SinrCoefficients):
    """Whether min-SINR ``t`` is reachable within the budget.

    Returns ``(feasible, eta)``; when feasible, ``eta`` is the minimal
    solution scaled up to use the whole budget.
    """
    coeffs.check()
    if t <= 0:
        raise ValueError("target SINR must be positive")
    eta = min_power_solution(t, coeffs)
    if eta is None:
        return False, None
    used = float(eta @ coeffs.w_norms2)
    if used > coeffs.budget:
        return False, None
    return True, eta * (coeffs.budget / used)


def maxmin_bisection(coeffs: SinrCoefficients, t_min: float = 0.0, t_max: float | None = None,
                     tol: float = 1e-4, polish: bool = True) -> PowerAllocation:
    """Bisection on the common SINR target.

    ``t_max`` defaults to the best single-UE full-budget SINR and is doubled
    until infeasible. After the bracket is narrower than ``tol`` the exact
    budget-saturating target inside it is located with Brent's method, so
    all SINRs are equal and the budget is met with equality.
    """
    coeffs.check()
    if t_min > 0 and not feasibility_check(t_min, coeffs)[0]:
        raise Infeasible(f"t_min={t_min} is not feasible")
    if t_max is None:
        t_max = float(np.max(coeffs.a * coeffs.budget / (coeffs.w_norms2 * coeffs.noise)))
    while feasibility_check(t_max, coeffs)[0]:
        t_min, t_max = t_max, 2 * t_max

    trace = []
    eta = None
    while t_max - t_min >= tol:
        t = 0.5 * (t_max + t_min)
        ok, cand = feasibility_check(t, coeffs)
        trace.append((t, ok))
        if ok:
            t_min, eta = t, cand
        else:
            t_max = t
    if eta is None:
        # bracket collapsed before any feasible midpoint: fall back to a tiny target
        t_min = t_min if t_min > 0 else tol * 1e-3
        ok, eta = feasibility_check(t_min, coeffs)
        if not ok:
            raise Infeasible("no feasible SINR target found")

    t_star = t_min
    if polish:
        t_star, eta = _polish(coeffs, t_min, t_max, eta)
    return PowerAllocation(eta=eta, t=float(t_star), feasible=True, trace=tuple(trace))


def _polish(coeffs, lo, hi, fallback):
    def excess(t):
        sol = min_power_solution(t, coeffs)
        if sol is None:
            return np.inf
        return float(sol @ coeffs.w_norms2) - coeffs.budget

    e_lo = excess(lo)
    e_hi = excess(hi)
    if not (e_lo <= 0 < e_hi):
        return lo, fallback
    if np.isinf(e_hi):
        # shrink the upper end into the region where a solution exists
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            e_mid = excess(mid)
            if e_mid <= 0:
                lo, e_lo = mid, e_mid
            elif np.isinf(e_mid):
                hi = mid
            else:
                hi, e_hi = mid, e_mid
                break
        if np.isinf(e_hi):
            return lo, fallback
    t = brentq(excess, lo, hi, xtol=1e-14 * max(hi, 1.0), rtol=4 * np.finfo(float).eps)
    eta = min_power_solution(t, coeffs)
    if eta is None:
        return lo, fallback
    return t, eta * (coeffs.budget / float(eta @ coeffs.w_norms2))
