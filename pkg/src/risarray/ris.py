"""RIS configuration: cross-correlation cost, passive and active optimizers,
active power scaling and phase quantization."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class RisConfig:
    """Diagonal RIS response ``P = sqrt(omega) * diag(p)``.

    For a passive RIS ``p`` has unit-modulus entries and ``omega`` is 1.
    For an active RIS ``p`` is the unit-norm direction and ``omega`` the
    power scale.
    """

    p: np.ndarray
    mode: str = "passive"
    omega: float = 1.0
    phase_bits: int | None = None
    history: tuple = field(default=(), compare=False)

    @property
    def diag(self) -> np.ndarray:
        if self.mode == "active":
            return np.sqrt(self.omega) * self.p
        return self.p


class CostContext:
    """Channels entering the cross-correlation cost.

    ``h`` holds one channel vector per row; pass channel *estimates* when
    the optimizer must not see the true channels.
    """

    def __init__(self, H, h):
        self.H = np.asarray(H)
        self.h = np.atleast_2d(np.asarray(h))
        self.K = self.h.shape[0]
        self._iu = np.triu_indices(self.K, 1)
        self._Q = None

    @property
    def Q(self) -> np.ndarray:
        """``Q[k, k'] = diag(h_k)^H H^H H diag(h_k')``, shape ``(K, K, N_R, N_R)``."""
        if self._Q is None:
            G = self.H.conj().T @ self.H
            hc = self.h.conj()
            self._Q = hc[:, None, :, None] * G[None, None] * self.h[None, :, None, :]
        return self._Q

    def composite(self, p) -> np.ndarray:
        return (self.h * p) @ self.H.T

    def gram(self, p) -> np.ndarray:
        hb = self.composite(p)
        return hb.conj() @ hb.T


def cross_corr_cost(p, ctx: CostContext) -> float:
    """``sum_{k<k'} |hbar_k^H hbar_k'|^2`` with ``hbar_k = H diag(p) h_k``."""
    if ctx.K < 2:
        return 0.0
    G = ctx.gram(p)
    return float(np.sum(np.abs(G[ctx._iu]) ** 2))


def cross_corr_cost_quadratic(p, ctx: CostContext) -> float:
    """Same cost through the quadratic forms ``|p^H Q_{k,k'} p|^2``."""
    p = np.asarray(p)
    iu, ju = ctx._iu
    vals = np.einsum("i,kij,j->k", p.conj(), ctx.Q[iu, ju], p)
    return float(np.sum(np.abs(vals) ** 2))


def phase_grid(size: int) -> np.ndarray:
    return np.exp(2j * np.pi * np.arange(size) / size)


def optimize_passive(ctx: CostContext, init: RisConfig, grid_size: int = 256,
                     max_sweeps: int = 100, tol: float = 1e-6, floor: float = 0.0) -> RisConfig:
    """Element-wise alternating minimization over unit-modulus phases.

    Each element in turn is set to the grid phase minimizing the cost with
    every other element fixed; the current phase is kept when no grid point
    improves on it, so the cost never increases. With ``init.phase_bits``
    set the grid is exactly the ``2**phase_bits`` admissible phases.
    Sweeps stop when the relative decrease over a sweep falls below
    ``tol`` or the cost drops below ``floor`` times its initial value.
    ``history`` holds the cost after each sweep, starting with the initial
    cost.
    """
    p = np.array(init.p, dtype=complex)
    if ctx.K < 2:
        return replace(init, history=(0.0,))
    bits = init.phase_bits
    grid = phase_grid(2**bits if bits is not None else grid_size)
    H, h = ctx.H, ctx.h
    iu = ctx._iu
    iu0, iu1 = iu
    col2 = np.sum(np.abs(H) ** 2, axis=0)
    grid2 = grid**2
    cost = cross_corr_cost(p, ctx)
    history = [cost]
    for _ in range(max_sweeps):
        start = cost
        hb = ctx.composite(p)
        G = hb.conj() @ hb.T
        for i in range(p.size):
            hi, Hi, pi = h[:, i], H[:, i], p[i]
            # with element i removed: a = hb - p_i b, b_k = h_ki H_i
            f = hb.conj() @ Hi
            e = f - np.conj(pi) * hi.conj() * col2[i]
            bb = np.outer(hi.conj(), hi) * col2[i]
            Ga = G - pi * np.outer(f, hi) - np.conj(pi) * np.outer(hi.conj(), f.conj()) + abs(pi) ** 2 * bb
            # pair term A + z B + conj(z) C for a unit-modulus candidate z
            A = (Ga + bb)[iu]
            B = e[iu0] * hi[iu1]
            C = hi.conj()[iu0] * e.conj()[iu1]
            k0 = np.sum(np.abs(A) ** 2 + np.abs(B) ** 2 + np.abs(C) ** 2)
            a1 = np.sum(A.conj() * B + A * C.conj())
            a2 = np.sum(B * C.conj())
            costs = k0 + 2.0 * np.real(a1 * grid + a2 * grid2)
            best = int(np.argmin(costs))
            # a margin keeps rounding from registering as an improvement
            if costs[best] < cost * (1.0 - 1e-12):
                z = grid[best]
                hb = hb + (z - pi) * np.outer(hi, Hi)
                G = Ga + bb + z * np.outer(e, hi) + np.conj(z) * np.outer(hi.conj(), e.conj())
                p[i] = z
                cost = float(costs[best])
        cost = cross_corr_cost(p, ctx)
        history.append(cost)
        if start <= 0 or (start - cost) <= tol * start or cost <= floor * history[0]:
            break
    return replace(init, p=p, history=tuple(history))


def active_gradient(p, ctx: CostContext) -> np.ndarray:
    """Gradient ``2 df/dp*`` of the cost at ``p``.

    Equal to ``2 sum_{k<k'} [(p^H Q^H p) Q p + (p^H Q p) Q^H p]``, evaluated
    without forming the ``Q`` matrices.
    """
    p = np.asarray(p)
    if ctx.K < 2:
        return np.zeros_like(p, dtype=complex)
    hb = ctx.composite(p)  # (K, N_A)
    U = hb.conj() @ hb.T  # U[k, k'] = hbar_k^H hbar_k'
    W = U.conj()
    np.fill_diagonal(W, 0.0)
    E = hb @ ctx.H.conj()  # row k: (H^H hbar_k)^T
    return 2.0 * np.sum(ctx.h.conj() * (W @ E), axis=0)


def optimize_active_direction(ctx: CostContext, init, max_iters: int = 2000, tol: float = 1e-6,
                              max_backtracks: int = 30, floor: float = 1e-12) -> RisConfig:
    """Projected gradient descent on the unit sphere.

    The step size follows the Barzilai-Borwein rule and is halved until
    the projected point strictly decreases the cost, so the cost trace is
    monotone. The iteration stops when the relative decrease falls below
    ``tol``, when the cost drops below ``floor`` times its initial value
    (numerically orthogonal composite channels) or when no decreasing step
    is found.
    """
    if isinstance(init, RisConfig):
        base = init
        p = np.array(init.p, dtype=complex)
    else:
        p = np.array(init, dtype=complex)
        base = RisConfig(p, mode="active", omega=0.0)
    p = p / np.linalg.norm(p)
    cost = cross_corr_cost(p, ctx)
    history = [cost]
    if cost <= 0:
        return replace(base, p=p, mode="active", history=tuple(history))
    g = active_gradient(p, ctx)
    gn = np.linalg.norm(g)
    if gn == 0:
        return replace(base, p=p, mode="active", history=tuple(history))
    step = 1.0 / gn
    for _ in range(max_iters):
        for _ in range(max_backtracks):
            cand = p - step * g
            cand = cand / np.linalg.norm(cand)
            c_new = cross_corr_cost(cand, ctx)
            if c_new < cost:
                break
            step *= 0.5
        else:
            break
        g_new = active_gradient(cand, ctx)
        s = cand - p
        sy = float(np.real(np.vdot(s, g_new - g)))
        rel = (cost - c_new) / cost
        p, cost, g = cand, c_new, g_new
        history.append(cost)
        if rel < tol or cost <= floor * history[0]:
            break
        step = float(np.real(np.vdot(s, s))) / sy if sy > 0 else 2.0 * step
    return replace(base, p=p, mode="active", history=tuple(history))


def ris_power_scale(p, H, eps: float, budget: float, sigma_r2: float) -> float:
    """Active-RIS power scale ``omega`` meeting the RIS power constraint with equality."""
    trace = reflection_trace(p, H)
    return eps * budget / ((1.0 - eps) * budget * trace + sigma_r2)


def reflection_trace(p, H) -> float:
    """``tr(P H^T H^* P^H)`` for ``P = diag(p)``."""
    col = np.sum(np.abs(np.asarray(H)) ** 2, axis=0)
    return float(np.sum(np.abs(p) ** 2 * col))


def ris_reflected_power(P_diag, H, array_power: float, sigma_r2: float) -> float:
    """Power of the signal reflected and amplified by the RIS.

    ``array_power`` is ``sum_k eta_k ||w_k||^2``.
    """
    return array_power * reflection_trace(P_diag, H) + sigma_r2 * float(np.sum(np.abs(P_diag) ** 2))


def quantize_phases(p, bits: int) -> np.ndarray:
    """Snap every phase to the nearest of ``2**bits`` uniform levels, keeping amplitudes."""
    p = np.asarray(p)
    levels = 2**bits
    step = 2 * np.pi / levels
    m = np.round(np.angle(p) / step) % levels
    return np.abs(p) * np.exp(1j * step * m)


def quantize(config: RisConfig, bits: int) -> RisConfig:
    return replace(config, p=quantize_phases(config.p, bits), phase_bits=bits)


def random_passive(n_ris: int, rng, phase_bits: int | None = None) -> RisConfig:
    """Unit-modulus configuration with uniform random phases (on the grid when quantized)."""
    if phase_bits is None:
        p = np.exp(1j * rng.uniform(0, 2 * np.pi, n_ris))
    else:
        p = phase_grid(2**phase_bits)[rng.integers(0, 2**phase_bits, n_ris)]
    return RisConfig(p, "passive", 1.0, phase_bits)


def random_active(n_ris: int, rng) -> RisConfig:
    p = np.exp(1j * rng.uniform(0, 2 * np.pi, n_ris)) / np.sqrt(n_ris)
    return RisConfig(p, "active", 0.0, None)
