"""Array/RIS geometry, the deterministic coupling matrix and UE channels.

The layout is the two-dimensional one of a linear active array facing a
linear RIS at distance ``D``: RIS elements lie on the x axis centred at the
origin, active antennas on the line ``y = -D``, both at the RIS height.
Look angles are measured from the array boresight (+y).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import ScenarioConfig
from .exceptions import DimensionMismatch, NonPositiveSpacing


ANGLE_TOL = 1e-12  # radians


@dataclass(frozen=True)
class SystemGeometry:
    active_positions: np.ndarray  # (N_A, 3)
    ris_positions: np.ndarray  # (N_R, 3)
    active_spacing: float
    look_angles: np.ndarray  # (N_A, N_R)
    distances: np.ndarray  # (N_A, N_R)
    wavelength: float


@dataclass(frozen=True)
class ChannelSet:
    """Channels of one fading realization.

    ``h`` and ``g`` hold one UE per row, ``h[k] = sqrt(beta[k]) * g[k]``.
    """

    H: np.ndarray
    beta: np.ndarray
    h: np.ndarray
    g: np.ndarray


def active_spacing(n_active, n_ris, ris_spacing, distance, alpha, wavelength):
    """Spacing of the active antennas.

    Omnidirectional elements (``alpha == pi``) use half a wavelength; sector
    antennas are spread so that every RIS element sits inside the main beam
    of some antenna.
    """
    if n_active == 1 or alpha >= math.pi:
        return wavelength / 2
    d_a = ((n_ris - 1) * ris_spacing - 2 * distance * math.tan(alpha / 2)) / (n_active - 1)
    if d_a <= 0:
        d_max = (n_ris - 1) * ris_spacing / (2 * math.tan(alpha / 2))
        raise NonPositiveSpacing(
            f"active spacing {d_a:.4g} m <= 0; need array-RIS distance < {d_max:.4g} m "
            f"or a wider sector than {alpha:.4g} rad"
        )
    return d_a


def build_geometry(config: ScenarioConfig) -> SystemGeometry:
    lam = config.wavelength
    n_a, n_r = config.n_active, config.n_ris
    d_r = config.ris_spacing
    D = config.distance
    d_a = active_spacing(n_a, n_r, d_r, D, config.sector_width, lam)

    x_r = (np.arange(n_r) - (n_r - 1) / 2) * d_r
    x_a = (np.arange(n_a) - (n_a - 1) / 2) * d_a
    z = config.ris_height
    ris = np.column_stack([x_r, np.zeros(n_r), np.full(n_r, z)])
    act = np.column_stack([x_a, np.full(n_a, -D), np.full(n_a, z)])

    dx = x_r[None, :] - x_a[:, None]
    dist = np.hypot(dx, D)
    theta = np.arctan2(dx, D)
    return SystemGeometry(act, ris, d_a, theta, dist, lam)


def active_gain(theta, alpha):
    """Linear power gain of a sector antenna of width ``alpha``: ``2*pi/alpha`` inside, 0 outside.

    The sector edges count as inside; the directional spacing puts the
    outermost RIS elements exactly on them, so a tiny angular tolerance
    absorbs rounding.
    """
    theta = np.asarray(theta, dtype=float)
    return np.where(np.abs(theta) <= alpha / 2 + ANGLE_TOL, 2 * np.pi / alpha, 0.0)


def build_coupling_matrix(geometry: SystemGeometry, config: ScenarioConfig) -> np.ndarray:
    """Deterministic RIS-to-array channel ``H`` of shape ``(N_A, N_R)``."""
    lam = geometry.wavelength
    d = geometry.distances
    g_a = active_gain(geometry.look_angles, config.sector_width)
    amp = np.sqrt(config.ris_efficiency * g_a * config.ris_element_gain) * lam / (4 * np.pi * d)
    return amp * np.exp(-2j * np.pi * d / lam)


def path_loss_db(distance_3d, carrier_frequency):
    """UMi NLOS log-distance path loss in dB, without shadowing."""
    d = np.asarray(distance_3d, dtype=float)
    return 35.3 * np.log10(d) + 22.4 + 21.3 * np.log10(carrier_frequency / 1e9)


def path_loss(distance_3d, config: ScenarioConfig, rng=None):
    """Large-scale power gain ``beta`` (linear) at the given 3D distance(s).

    Log-normal shadowing is added when ``config.shadowing`` is set, drawn
    from ``rng``.
    """
    pl = path_loss_db(distance_3d, config.carrier_frequency)
    if config.shadowing:
        if rng is None:
            raise ValueError("shadowing requires an rng")
        pl = pl + config.shadowing_std * rng.standard_normal(np.shape(pl))
    return 10.0 ** (-pl / 10.0)


def place_ues(config: ScenarioConfig, rng) -> np.ndarray:
    """Uniform positions over the annular sector in front of the RIS, shape ``(K, 3)``.

    Radii are drawn uniformly over area, angles uniformly over the sector.
    """
    k = config.ue_count
    lo, hi = config.ue_sector
    r0, r1 = config.ue_radius
    phi = rng.uniform(lo, hi, k)
    r = np.sqrt(rng.uniform(r0**2, r1**2, k))
    return np.column_stack([r * np.sin(phi), r * np.cos(phi), np.full(k, config.ue_height)])


def large_scale_gains(positions, config: ScenarioConfig, rng=None) -> np.ndarray:
    origin = np.array([0.0, 0.0, config.ris_height])
    d3 = np.linalg.norm(np.asarray(positions) - origin, axis=1)
    return path_loss(d3, config, rng)


def crandn(rng, shape) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with unit variance."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def draw_channels(H: np.ndarray, beta, rng, n_elements: int | None = None) -> ChannelSet:
    """Draw i.i.d. Rayleigh UE channels for the given large-scale gains."""
    beta = np.asarray(beta, dtype=float)
    n = H.shape[1] if n_elements is None else n_elements
    g = crandn(rng, (beta.size, n))
    return ChannelSet(H=H, beta=beta, h=np.sqrt(beta)[:, None] * g, g=g)


def composite_channel(H: np.ndarray, p, h) -> np.ndarray:
    """Composite channel ``H @ diag(p) @ h``.

    ``h`` may be a single vector of length ``N_R`` or a ``(K, N_R)`` stack,
    in which case one composite channel per row is returned.
    """
    H = np.asarray(H)
    p = np.asarray(p)
    h = np.asarray(h)
    if p.ndim == 2:
        p = np.diagonal(p)
    if p.shape != (H.shape[1],) or h.shape[-1] != H.shape[1]:
        raise DimensionMismatch(
            f"H is {H.shape}, diag(P) has {p.shape}, h has {h.shape}"
        )
    return (h * p) @ H.T


def legacy_coupling(n_active: int) -> np.ndarray:
    """``H = I`` for the conventional array with no RIS."""
    return np.eye(n_active, dtype=complex)
