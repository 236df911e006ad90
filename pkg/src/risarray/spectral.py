"""Conjugate precoding and downlink SINR / spectral-efficiency evaluation.

Two precoder flavours exist: the normalized conjugate beamformer used in
simulations and the unnormalized one ``w_k = (H P hhat_k)^H`` under which
the closed-form hardening bound holds. Reports carry a mode tag so the two
are never mixed silently.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ZeroEstimate
from .power import SinrCoefficients


@dataclass(frozen=True)
class SEReport:
    sinr: np.ndarray
    se: np.ndarray
    mode: str  # PCSI, UB, LB-MC or LB-CF
    prelog: float
    stderr: np.ndarray | None = None


@dataclass(frozen=True)
class HardeningTerms:
    """Per-UE terms of the hardening bound.

    ``ui[k, j]`` is ``E|UI_{k,j}|^2`` (interference of UE ``j``'s precoder at
    UE ``k``) with a zero diagonal; ``dyn`` is the dynamic-noise power
    ``E|z~_k|^2`` before the active-RIS switch.
    """

    ds: np.ndarray
    bu: np.ndarray
    ui: np.ndarray
    dyn: np.ndarray
    w_norms2: np.ndarray
    pbar: np.ndarray | None = None

    def sinr(self, eta, noise, delta) -> np.ndarray:
        eta = np.asarray(eta, dtype=float)
        interf = eta * self.bu + self.ui @ eta
        return eta * np.abs(self.ds) ** 2 / (interf + delta * self.dyn + noise)

    def coefficients(self, noise, delta, budget) -> SinrCoefficients:
        K = self.ds.size
        b = self.ui.T.copy()
        b[np.diag_indices(K)] = self.bu
        return SinrCoefficients(
            a=np.abs(self.ds) ** 2,
            b=b,
            c=delta * self.dyn,
            noise=np.broadcast_to(noise, (K,)).astype(float),
            w_norms2=np.asarray(self.w_norms2, dtype=float),
            budget=float(budget),
        )


def se_from_sinr(sinr, prelog: float) -> np.ndarray:
    return prelog * np.log2(1.0 + np.asarray(sinr))


def make_precoders(H, p, estimates, normalized: bool = True) -> np.ndarray:
    """Conjugate beamformers, one per row, shape ``(K, N_A)``."""
    v = (np.atleast_2d(estimates) * p) @ np.asarray(H).T  # rows: H P hhat_k
    W = v.conj()
    if normalized:
        norms = np.linalg.norm(v, axis=1)
        if np.any(norms == 0):
            raise ZeroEstimate(f"zero composite estimate for UE(s) {np.flatnonzero(norms == 0)}")
        W = W / norms[:, None]
    return W


def gain_matrix(h, H, p, W) -> np.ndarray:
    """``M[k, j] = h_k^T P H^T w_j``."""
    return ((np.atleast_2d(h) * p) @ np.asarray(H).T) @ W.T


def sinr_perfect_csi(h, H, p, W, eta, noise, sigma_r2, delta) -> np.ndarray:
    """Instantaneous downlink SINR of every UE for one channel realization."""
    eta = np.asarray(eta, dtype=float)
    G = np.abs(gain_matrix(h, H, p, W)) ** 2
    sig = eta * np.diag(G)
    interf = G @ eta - sig
    dyn = delta * sigma_r2 * np.sum(np.abs(np.atleast_2d(h) * p) ** 2, axis=1)
    return sig / (interf + dyn + noise)


def se_perfect(sinr, prelog: float) -> SEReport:
    sinr = np.asarray(sinr, dtype=float)
    return SEReport(sinr, se_from_sinr(sinr, prelog), "PCSI", prelog)


def se_upper_bound(sinr_trials, prelog: float) -> SEReport:
    """Ergodic bound from per-trial SINRs of shape ``(n_trials, K)``."""
    sinr_trials = np.atleast_2d(sinr_trials)
    rates = np.log2(1.0 + sinr_trials)
    n = rates.shape[0]
    stderr = prelog * rates.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros(rates.shape[1])
    eff = 2.0 ** rates.mean(axis=0) - 1.0
    return SEReport(eff, prelog * rates.mean(axis=0), "UB", prelog, stderr)


class HardeningAccumulator:
    """Running Monte Carlo estimate of the hardening-bound terms.

    Feed one realization at a time via :meth:`add`, passing the true
    channels, the RIS diagonal used for that realization and the
    precoders built from the estimates.
    """

    def __init__(self, K: int):
        self.K = K
        self.n = 0
        self.s1 = np.zeros(K, dtype=complex)
        self.s2 = np.zeros((K, K))
        self.dyn = np.zeros(K)
        self.wn = np.zeros(K)

    def add(self, h, H, p, W, sigma_r2) -> np.ndarray:
        M = gain_matrix(h, H, p, W)
        self.s1 += np.diag(M)
        self.s2 += np.abs(M) ** 2
        self.dyn += sigma_r2 * np.sum(np.abs(np.atleast_2d(h) * p) ** 2, axis=1)
        self.wn += np.sum(np.abs(W) ** 2, axis=1)
        self.n += 1
        return M

    def terms(self) -> HardeningTerms:
        n = self.n
        ds = self.s1 / n
        second = self.s2 / n
        # unbiased variance of the desired-signal gain
        bu = (np.diag(self.s2) - n * np.abs(ds) ** 2) / max(n - 1, 1)
        ui = second.copy()
        np.fill_diagonal(ui, 0.0)
        return HardeningTerms(ds, np.clip(bu, 0.0, None), ui, self.dyn / n, self.wn / n)


def hardening_terms_mc(sample, n_trials: int, rng) -> HardeningTerms:
    """Monte Carlo hardening terms.

    ``sample(rng)`` must return ``(h, H, p, W, sigma_r2)`` for one independent
    realization; the RIS diagonal ``p`` may depend on the realization.
    """
    acc = None
    for _ in range(n_trials):
        h, H, p, W, sigma_r2 = sample(rng)
        if acc is None:
            acc = HardeningAccumulator(np.atleast_2d(h).shape[0])
        acc.add(h, H, p, W, sigma_r2)
    return acc.terms()


def pbar_matrix(H, p) -> np.ndarray:
    """``P H^T H^* P^*``."""
    H = np.asarray(H)
    return p[:, None] * (H.T @ H.conj()) * p.conj()[None, :]


def hardening_closed_form(H, p, estimates, betas, sigma_r2) -> HardeningTerms:
    """Closed-form hardening terms for unnormalized conjugate precoding.

    Valid for a RIS configuration independent of the fast fading and
    Rayleigh UE channels with covariance ``beta_k I``.
    """
    H = np.asarray(H)
    betas = np.asarray(betas, dtype=float)
    Pb = pbar_matrix(H, p)
    K = betas.size
    Rc = estimates.R_est.conj()  # R_hhat^*
    ds = np.einsum("ij,kji->k", Pb, Rc)
    # tr(R_h^* Pb R_hhat_j^* Pb^H) with R_h = beta_k I
    PbR = np.einsum("ij,kjl->kil", Pb, Rc)  # Pb R_j^*
    base = np.real(np.einsum("kil,il->k", PbR, Pb.conj()))  # tr(Pb R_j^* Pb^H)
    bu = betas * base
    ui = np.outer(betas, base)
    for k in range(K):
        for j in estimates.copilot_sets[k]:
            if j == k:
                continue
            c2 = estimates.c[j, k] ** 2
            ui[k, j] = c2 * (np.abs(ds[k]) ** 2 + bu[k])
    np.fill_diagonal(ui, 0.0)
    dyn = sigma_r2 * betas * float(np.sum(np.abs(p) ** 2))
    # E||w_k||^2 = tr(P^H H^H H P R_hhat_k)
    A = H * p[None, :]
    G = A.conj().T @ A
    wn = np.real(np.einsum("ij,kji->k", G, estimates.R_est))
    return HardeningTerms(ds, bu, ui, dyn, wn, Pb)


def sinr_lower_bound(terms: HardeningTerms, eta, noise, delta) -> np.ndarray:
    return terms.sinr(eta, noise, delta)


def se_lower_bound(terms: HardeningTerms, eta, noise, delta, prelog, mode="LB-MC") -> SEReport:
    sinr = terms.sinr(eta, noise, delta)
    return SEReport(sinr, se_from_sinr(sinr, prelog), mode, prelog)
