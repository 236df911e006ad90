"""Favourable-propagation and channel-hardening diagnostics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateChannel
from .geometry import crandn


@dataclass(frozen=True)
class FpHardeningReport:
    f_cross: np.ndarray  # (K, K); off-diagonal entries are f_{k,j}
    f_self: np.ndarray  # (K,)
    closed_form_value: float
    lower_bound: float


def _gram_eigenvalues(H, p):
    A = np.asarray(H) * np.asarray(p)[None, :]
    return np.linalg.eigvalsh(A @ A.conj().T)


def fp_hardening_closed(H, p) -> float:
    """Closed-form hardening / favourable-propagation metric ``sum(l^2) / sum(l)^2``.

    The eigenvalues are those of ``P^H H^H H P``; only its (at most ``N_A``)
    nonzero ones matter, so the smaller Gram matrix ``H P P^H H^H`` is used.
    """
    lam = np.clip(_gram_eigenvalues(H, p), 0.0, None)
    total = lam.sum()
    if total <= 0:
        raise DegenerateChannel("H P has no nonzero singular value")
    return float(np.sum(lam**2) / total**2)


def fp_hardening_mc(H, p, n_trials: int, rng, n_ue: int = 2, chunk: int = 20_000) -> FpHardeningReport:
    """Monte Carlo estimate of the variance metrics over Rayleigh draws.

    Uses unit large-scale gains (the metrics are invariant to them) and
    the exact expectation ``E||HPh||^2 = tr(P^H H^H H P)`` for normalization.
    """
    H = np.asarray(H)
    p = np.asarray(p)
    A = H * p[None, :]
    energy = float(np.real(np.sum(np.abs(A) ** 2)))
    if energy <= 0:
        raise DegenerateChannel("H P is identically zero")

    # Accumulate per-pair sums for an unbiased complex sample variance.
    s1 = np.zeros((n_ue, n_ue), dtype=complex)
    s2 = np.zeros((n_ue, n_ue))
    done = 0
    while done < n_trials:
        m = min(chunk, n_trials - done)
        g = crandn(rng, (m, n_ue, H.shape[1]))
        hb = g @ A.T  # (m, K, N_A)
        x = np.einsum("tka,tja->tkj", hb.conj(), hb) / energy
        s1 += x.sum(axis=0)
        s2 += (np.abs(x) ** 2).sum(axis=0)
        done += m
    mean = s1 / n_trials
    var = (s2 - n_trials * np.abs(mean) ** 2) / (n_trials - 1)
    return FpHardeningReport(
        f_cross=var,
        f_self=np.real(np.diag(var)).copy(),
        closed_form_value=fp_hardening_closed(H, p),
        lower_bound=1.0 / H.shape[0],
    )
