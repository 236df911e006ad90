"""Independent brute-force and textbook reference computations.

These deliberately avoid the shortcuts taken by the library (SVD-domain
algebra, trigonometric cost updates, Brent polishing) so that they can
serve as a second route when checking it. They are slow and meant for
small instances only.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

from .config import ScenarioConfig, preset

SPEED_OF_LIGHT = 299_792_458.0


def active_spacing_formula(n_active, n_ris, ris_spacing, distance, alpha):
    return ((n_ris - 1) * ris_spacing - 2 * distance * math.tan(alpha / 2)) / (n_active - 1)


def path_loss_db_formula(d, fc):
    return 35.3 * math.log10(d) + 22.4 + 21.3 * math.log10(fc / 1e9)


def noise_dbm(psd_dbm_hz, bandwidth, figure_db):
    return psd_dbm_hz + 10 * math.log10(bandwidth) + figure_db


def coupling_matrix_loops(cfg: ScenarioConfig) -> np.ndarray:
    """``H(i, j)`` entry by entry from explicit coordinates."""
    lam = SPEED_OF_LIGHT / cfg.carrier_frequency
    d_r = cfg.ris_element_spacing if cfg.ris_element_spacing is not None else lam / 2
    dist = cfg.array_ris_distance if cfg.array_ris_distance is not None else 5 * lam
    alpha = cfg.sector_width
    if cfg.n_active == 1 or math.isclose(alpha, math.pi):
        d_a = lam / 2
    else:
        d_a = active_spacing_formula(cfg.n_active, cfg.n_ris, d_r, dist, alpha)
    H = np.zeros((cfg.n_active, cfg.n_ris), dtype=complex)
    for i in range(cfg.n_active):
        xa = (i - (cfg.n_active - 1) / 2) * d_a
        for j in range(cfg.n_ris):
            xr = (j - (cfg.n_ris - 1) / 2) * d_r
            d = math.hypot(xr - xa, dist)
            theta = math.atan2(xr - xa, dist)
            ga = 2 * math.pi / alpha if abs(theta) <= alpha / 2 + 1e-12 else 0.0
            amp = math.sqrt(cfg.ris_efficiency * ga * cfg.ris_element_gain) * lam / (4 * math.pi * d)
            H[i, j] = amp * complex(math.cos(-2 * math.pi * d / lam), math.sin(-2 * math.pi * d / lam))
    return H


def retained_rank(H, energy_fraction=0.98):
    s = np.linalg.svd(H, compute_uv=False)
    e = s**2
    total = e.sum()
    acc = 0.0
    for i, v in enumerate(e):
        acc += v
        if acc >= energy_fraction * total:
            return i + 1, int(np.linalg.matrix_rank(H))
    return len(e), int(np.linalg.matrix_rank(H))


def cost_loops(H, p, h) -> float:
    """Cross-correlation cost with explicit loops."""
    K = len(h)
    comp = []
    for k in range(K):
        v = np.zeros(H.shape[0], dtype=complex)
        for a in range(H.shape[0]):
            for i in range(H.shape[1]):
                v[a] += H[a, i] * p[i] * h[k][i]
        comp.append(v)
    total = 0.0
    for k in range(K):
        for kk in range(k + 1, K):
            c = sum(np.conj(comp[k][a]) * comp[kk][a] for a in range(H.shape[0]))
            total += abs(c) ** 2
    return float(total)


def passive_exhaustive(H, h, bits: int):
    """Global minimum of the cost over all ``(2**bits)**N_R`` phase vectors.

    Returns ``(cost, p)``. The first element is fixed to phase 0 since the
    cost is invariant to a common phase rotation.
    """
    levels = np.exp(2j * np.pi * np.arange(2**bits) / 2**bits)
    H = np.asarray(H)
    h = np.atleast_2d(h)
    K = h.shape[0]
    iu = np.triu_indices(K, 1)
    n = H.shape[1]
    combos = np.array(list(itertools.product(range(2**bits), repeat=n - 1)))
    P = np.concatenate([np.zeros((len(combos), 1), dtype=int), combos], axis=1)
    P = levels[P]  # (M, n)
    comp = np.einsum("ai,mi,ki->mka", H, P, h)
    G = np.einsum("mka,mla->mkl", comp.conj(), comp)
    costs = np.sum(np.abs(G[:, iu[0], iu[1]]) ** 2, axis=1)
    best = int(np.argmin(costs))
    return float(costs[best]), P[best]


def central_difference(f, p, d, step=1e-6):
    """Central difference of ``f`` along complex direction ``d``."""
    return (f(p + step * d) - f(p - step * d)) / (2 * step)


def lmmse_textbook(y, stacked, U, configs, pilots, powers, betas, sigma_a2, sigma_r2, delta, k):
    """LMMSE of ``h_k`` from ``z = U^H y_k`` via the generic ``C_hz C_zz^{-1} z``.

    ``stacked`` is the full stacked training matrix and ``pilots`` holds the
    assigned sequences, one row per UE. Returns ``(estimate, R_est)``.
    """
    n_r = stacked.shape[1]
    n_a = stacked.shape[0] // len(configs)
    tau = pilots.shape[1]
    rho = pilots @ pilots.T
    C_yy = sigma_a2 * tau * np.eye(stacked.shape[0], dtype=complex)
    for j in range(len(betas)):
        C_yy += powers[j] * rho[j, k] ** 2 * betas[j] * (stacked @ stacked.conj().T)
    if delta:
        for q in range(len(configs)):
            blk = stacked[q * n_a:(q + 1) * n_a]
            C_yy[q * n_a:(q + 1) * n_a, q * n_a:(q + 1) * n_a] += sigma_r2 * tau * blk @ blk.conj().T
    C_hy = math.sqrt(powers[k]) * rho[k, k] * betas[k] * np.eye(n_r) @ stacked.conj().T
    C_zz = U.conj().T @ C_yy @ U
    C_hz = C_hy @ U
    z = U.conj().T @ y
    gain = np.linalg.solve(C_zz.T, C_hz.T).T  # C_hz C_zz^{-1}
    return gain @ z, gain @ C_hz.conj().T


def maxmin_grid(a, b, c, noise, w2, budget, n=200_001):
    """Dense search of the max-min SINR for two UEs on the full-budget line."""
    eta1 = np.linspace(0.0, budget / w2[0], n)
    eta2 = (budget - eta1 * w2[0]) / w2[1]
    s1 = eta1 * a[0] / (eta2 * b[1, 0] + eta1 * b[0, 0] + c[0] + noise[0])
    s2 = eta2 * a[1] / (eta1 * b[0, 1] + eta2 * b[1, 1] + c[1] + noise[1])
    m = np.minimum(s1, s2)
    i = int(np.argmax(m))
    return float(m[i]), np.array([eta1[i], eta2[i]])


def fixtures() -> dict:
    """Values frozen into the test suite, recomputed from first principles."""
    lam = SPEED_OF_LIGHT / 1.9e9
    full = preset("full")
    r_full, rank = retained_rank(coupling_matrix_loops(full))
    return {
        "wavelength_m": lam,
        "active_spacing_16_64_pi5_m": active_spacing_formula(16, 64, lam / 2, 5 * lam, math.pi / 5),
        "path_loss_db_100m": path_loss_db_formula(100.0, 1.9e9),
        "noise_dbm": noise_dbm(-174.0, 20e6, 5.0),
        "full_coupling_retained_rank": r_full,
        "full_coupling_rank": rank,
    }


ORACLES = {
    "fixtures": fixtures,
}


def passive_demo(seed: int = 0, bits: int = 2, n_ris: int = 5) -> dict:
    rng = np.random.default_rng(seed)
    H = (rng.standard_normal((3, n_ris)) + 1j * rng.standard_normal((3, n_ris))) / math.sqrt(2)
    h = (rng.standard_normal((3, n_ris)) + 1j * rng.standard_normal((3, n_ris))) / math.sqrt(2)
    cost, p = passive_exhaustive(H, h, bits)
    return {"seed": seed, "bits": bits, "n_ris": n_ris, "global_min_cost": cost,
            "phases_index": [int(round(np.angle(v) / (2 * np.pi / 2**bits))) % 2**bits for v in p]}


def maxmin_demo(seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.5, 2.0, 2)
    b = rng.uniform(0.0, 0.3, (2, 2))
    c = rng.uniform(0.0, 0.1, 2)
    noise = np.full(2, 0.1)
    w2 = rng.uniform(0.5, 1.5, 2)
    t, eta = maxmin_grid(a, b, c, noise, w2, 1.0)
    return {"seed": seed, "t_grid": t, "eta_grid": eta.tolist()}


ORACLES.update({"passive-exhaustive": passive_demo, "maxmin-grid": maxmin_demo})
