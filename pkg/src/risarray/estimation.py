"""Multi-epoch pilot training and reduced-rank LMMSE channel estimation.

Each UE sends its pilot ``Q = ceil(N_R / N_A)`` times while the RIS cycles
through ``Q`` random training configurations. The stacked observation is
projected onto the dominant left singular subspace of the stacked training
matrix and the UE-to-RIS channel is estimated in the matching right
singular subspace.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.fft import dct
from scipy.linalg import cho_factor, cho_solve

from .exceptions import RankDeficient, SingularCovariance
from .geometry import crandn


@dataclass(frozen=True)
class PilotBook:
    pilots: np.ndarray  # (tau_p, tau_p) real, one sequence per row, squared norm tau_p
    assignment: np.ndarray  # (K,) pilot index per UE
    powers: np.ndarray  # (K,) uplink training powers, watts

    @property
    def length(self) -> int:
        return self.pilots.shape[0]

    @property
    def cross_corr(self) -> np.ndarray:
        """``rho[j, k] = phi_j^T phi_k`` for the assigned sequences."""
        phi = self.pilots[self.assignment]
        return phi @ phi.T

    def copilot_sets(self) -> list[np.ndarray]:
        """Indices of the UEs sharing each UE's pilot, the UE itself included."""
        return [np.flatnonzero(self.assignment == a) for a in self.assignment]


@dataclass(frozen=True)
class TrainingBasis:
    configs: np.ndarray  # (Q, N_R) diagonals of the training RIS matrices
    stacked: np.ndarray  # (Q*N_A, N_R)
    U: np.ndarray  # (Q*N_A, S)
    s: np.ndarray  # (S,) retained singular values, descending
    V: np.ndarray  # (N_R, S)
    rank: int
    energy_fraction: float

    @property
    def n_retained(self) -> int:
        return self.s.size

    def epoch_covariance(self) -> np.ndarray:
        """``U^H blkdiag(H P_q P_q^H H^H) U`` (the dynamic-noise shape)."""
        n_a = self.stacked.shape[0] // self.configs.shape[0]
        Z = np.zeros((self.n_retained, self.n_retained), dtype=complex)
        for q in range(self.configs.shape[0]):
            blk = self.stacked[q * n_a:(q + 1) * n_a]
            Uq = self.U[q * n_a:(q + 1) * n_a]
            B = Uq.conj().T @ blk
            Z += B @ B.conj().T
        return Z


@dataclass(frozen=True)
class EstimateSet:
    estimates: np.ndarray  # (K, N_R)
    R_est: np.ndarray  # (K, N_R, N_R)
    R_err: np.ndarray  # (K, N_R, N_R)
    copilot_sets: list
    c: np.ndarray  # (K, K); c[k, j] for co-pilot pairs, nan otherwise


def make_pilot_book(tau_p: int, n_ue: int, powers) -> PilotBook:
    """Real orthogonal pilots (scaled DCT-II rows); UE ``k`` gets pilot ``k mod tau_p``."""
    if tau_p < 1:
        raise ValueError("pilot length must be >= 1")
    basis = dct(np.eye(tau_p), norm="ortho", axis=0)
    powers = np.broadcast_to(np.asarray(powers, dtype=float), (n_ue,)).copy()
    return PilotBook(np.sqrt(tau_p) * basis, np.arange(n_ue) % tau_p, powers)


def training_reflected_power(p, betas, powers, sigma_r2, active: bool) -> float:
    """Expected power reflected by the RIS during training.

    Same form as the RIS power constraint: the UE signals impinging with
    power ``sum(eta_k beta_k)`` per element, plus the amplified RIS noise
    when the RIS is active.
    """
    gain = float(np.sum(np.abs(p) ** 2))
    incident = float(np.dot(powers, betas))
    return gain * (incident + (sigma_r2 if active else 0.0))


def make_training_configs(n_ris: int, n_active: int, rng, *, active=False, betas=None,
                          powers=None, sigma_r2=0.0, gain_db=3.0) -> np.ndarray:
    """``Q`` training configurations with i.i.d. uniform phases, shape ``(Q, N_R)``.

    An active RIS applies one common amplitude ``a`` to every element so that
    the training reflected power is ``gain_db`` above that of the passive
    configuration with the same phases.
    """
    q = math.ceil(n_ris / n_active)
    configs = np.exp(1j * rng.uniform(0.0, 2 * np.pi, (q, n_ris)))
    if active:
        incident = float(np.dot(powers, betas))
        a2 = 10 ** (gain_db / 10) * incident / (incident + sigma_r2)
        configs = np.sqrt(a2) * configs
    return configs


def build_training_basis(H, configs, energy_fraction: float, strict: bool = True) -> TrainingBasis:
    """Stack ``H P_q`` over epochs and keep the leading singular triplets.

    ``S`` is the smallest rank whose squared singular values hold at least
    ``energy_fraction`` of the total. With ``strict`` the rank is clamped to
    ``rank - 1`` so the basis is always a proper truncation.
    """
    H = np.asarray(H)
    configs = np.atleast_2d(configs)
    stacked = np.concatenate([H * c[None, :] for c in configs], axis=0)
    U, s, Vh = np.linalg.svd(stacked, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        raise RankDeficient("stacked training matrix is zero")
    tol = s[0] * max(stacked.shape) * np.finfo(float).eps
    rank = int(np.sum(s > tol))
    energy = np.cumsum(s[:rank] ** 2)
    total = energy[-1]
    S = int(np.searchsorted(energy, energy_fraction * total * (1 - 1e-12)) + 1)
    S = min(S, rank)
    if strict and rank > 1:
        S = min(S, rank - 1)
    return TrainingBasis(
        configs=configs,
        stacked=stacked,
        U=U[:, :S],
        s=s[:S],
        V=Vh[:S].conj().T,
        rank=rank,
        energy_fraction=float(energy[S - 1] / total),
    )


def simulate_training(h, H, basis: TrainingBasis, pilots: PilotBook, sigma_a2, sigma_r2,
                      delta: int, rng) -> np.ndarray:
    """Stacked, pilot-projected observations ``y_k``, shape ``(K, Q*N_A)``.

    Noise is drawn at the level of the received ``N_A x tau_p`` blocks so
    cross-UE correlations of the projected noise are exact.
    """
    h = np.atleast_2d(h)
    tau = pilots.length
    phi = pilots.pilots[pilots.assignment]  # (K, tau)
    amp = np.sqrt(pilots.powers)
    n_a = H.shape[0]
    blocks = []
    for c in basis.configs:
        HP = H * c[None, :]
        Y = HP @ (amp[:, None] * h).T @ phi  # (N_A, tau)
        if delta:
            Y = Y + HP @ (np.sqrt(sigma_r2) * crandn(rng, (H.shape[1], tau)))
        Y = Y + np.sqrt(sigma_a2) * crandn(rng, (n_a, tau))
        blocks.append((Y @ phi.T).T)  # (K, N_A)
    return np.concatenate(blocks, axis=1)


def observation_covariance(basis: TrainingBasis, pilots: PilotBook, betas, sigma_a2, sigma_r2,
                           delta: int, k: int) -> np.ndarray:
    """Covariance of the reduced observation ``U^H y_k``."""
    tau = pilots.length
    rho = pilots.cross_corr[:, k]
    scale = float(np.sum(rho**2 * pilots.powers * betas))
    R = scale * np.diag(basis.s**2).astype(complex) + sigma_a2 * tau * np.eye(basis.n_retained)
    if delta:
        R = R + sigma_r2 * tau * basis.epoch_covariance()
    return R


def lmmse_estimate(y, basis: TrainingBasis, pilots: PilotBook, betas, sigma_a2, sigma_r2,
                   delta: int) -> EstimateSet:
    """Reduced-rank LMMSE estimates of all UE-to-RIS channels.

    Returns per-UE estimates, estimate covariances ``R_est`` and error
    covariances ``R_err = beta_k I - R_est``.
    """
    y = np.atleast_2d(y)
    betas = np.asarray(betas, dtype=float)
    K = y.shape[0]
    tau = pilots.length
    n_r = basis.V.shape[0]
    S = basis.n_retained
    V, lam = basis.V, basis.s
    sets = pilots.copilot_sets()

    estimates = np.zeros((K, n_r), dtype=complex)
    R_est = np.zeros((K, n_r, n_r), dtype=complex)
    R_err = np.zeros_like(R_est)
    ybar = y @ basis.U.conj()  # rows are (U^H y_k)^T
    cache = {}
    for k in range(K):
        a = int(pilots.assignment[k])
        if a not in cache:
            R = observation_covariance(basis, pilots, betas, sigma_a2, sigma_r2, delta, k)
            R = 0.5 * (R + R.conj().T)
            R += 1e-12 * np.real(np.trace(R)) / S * np.eye(S)
            try:
                cho = cho_factor(R, lower=True)
            except np.linalg.LinAlgError as exc:
                raise SingularCovariance(f"observation covariance for pilot {a} is singular") from exc
            # lam R^{-1} ybar and lam R^{-1} lam, shared by all UEs on this pilot
            x = cho_solve(cho, ybar[k])
            M = lam[:, None] * cho_solve(cho, np.diag(lam).astype(complex))
            cache[a] = (lam * x, 0.5 * (M + M.conj().T))
        lx, M = cache[a]
        gain = tau * np.sqrt(pilots.powers[k]) * betas[k]
        estimates[k] = V @ (gain * lx)
        R_est[k] = gain**2 * (V @ M @ V.conj().T)
        R_err[k] = betas[k] * np.eye(n_r) - R_est[k]

    c = np.full((K, K), np.nan)
    for k in range(K):
        for j in sets[k]:
            c[k, j] = betas[k] / betas[j] * np.sqrt(pilots.powers[k] / pilots.powers[j])
    return EstimateSet(estimates, R_est, R_err, sets, c)

