import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from risarray import preset
from risarray.exceptions import DimensionMismatch, NonPositiveSpacing
from risarray.geometry import (active_gain, active_spacing, build_coupling_matrix, build_geometry,
                               composite_channel, draw_channels, large_scale_gains, legacy_coupling,
                               path_loss, path_loss_db, place_ues)
from risarray.oracles import coupling_matrix_loops

LAM = 299_792_458.0 / 1.9e9

# frozen from risarray.oracles.fixtures()
SPACING_16_64_PI5 = 0.2971711467767451
PATH_LOSS_100M = 98.93745170029526


def test_omnidirectional_spacing_is_half_wavelength():
    assert active_spacing(16, 64, LAM / 2, 5 * LAM, math.pi, LAM) == pytest.approx(LAM / 2)


def test_spacing_collapses_to_ris_spacing_without_distance():
    assert active_spacing(2, 2, LAM / 2, 0.0, 1e-9, LAM) == pytest.approx(LAM / 2)


def test_directional_spacing_fixture():
    d = active_spacing(16, 64, LAM / 2, 5 * LAM, math.pi / 5, LAM)
    assert d == pytest.approx(SPACING_16_64_PI5, rel=1e-12)


def test_infeasible_spacing_reports_limit():
    with pytest.raises(NonPositiveSpacing, match="array-RIS distance"):
        active_spacing(8, 32, LAM / 2, 100 * LAM, math.pi / 5, LAM)


@pytest.mark.parametrize("alpha, theta, gain", [
    (math.pi, 0.0, 2.0),
    (math.pi / 5, 0.0, 10.0),
    (math.pi / 2, 0.9 * math.pi / 4, 4.0),
    (math.pi / 2, 1.1 * math.pi / 4, 0.0),
])
def test_active_gain(alpha, theta, gain):
    assert float(active_gain(theta, alpha)) == pytest.approx(gain)


@pytest.mark.parametrize("alpha", [math.pi, math.pi / 2, math.pi / 5])
def test_coupling_matrix_matches_loop_oracle(alpha):
    cfg = preset("desk", sector_width=alpha)
    H = build_coupling_matrix(build_geometry(cfg), cfg)
    np.testing.assert_allclose(H, coupling_matrix_loops(cfg), rtol=1e-12, atol=0)


def test_single_pair_free_space_term():
    cfg = preset("desk", n_active=1, n_ris=1, ris_element_gain=1.0)
    geo = build_geometry(cfg)
    H = build_coupling_matrix(geo, cfg)
    d = cfg.distance
    # G_A = 2 for alpha = pi, G_R = 1
    assert abs(H[0, 0]) == pytest.approx(math.sqrt(2.0) * LAM / (4 * math.pi * d))
    assert np.angle(H[0, 0] * np.exp(2j * np.pi * d / LAM)) == pytest.approx(0.0, abs=1e-9)


def test_geometry_invariants():
    cfg = preset("full", sector_width=math.pi / 5)
    geo = build_geometry(cfg)
    assert np.all(geo.distances > 0)
    assert geo.active_spacing > 0
    assert np.all(np.abs(geo.look_angles) < math.pi / 2)
    assert geo.active_positions.shape == (16, 3) and geo.ris_positions.shape == (64, 3)


def test_coupling_matrix_is_deterministic():
    cfg = preset("desk")
    a = build_coupling_matrix(build_geometry(cfg), cfg)
    b = build_coupling_matrix(build_geometry(cfg), cfg)
    assert np.array_equal(a, b)


def test_full_scale_coupling_energy_needs_full_rank():
    # 98% of the energy of the bare coupling matrix needs all 16 singular values
    cfg = preset("full")
    s = np.linalg.svd(build_coupling_matrix(build_geometry(cfg), cfg), compute_uv=False)
    e = np.cumsum(s**2) / np.sum(s**2)
    assert int(np.searchsorted(e, 0.98) + 1) == 16
    assert np.linalg.matrix_rank(np.diag(s)) == 16


def test_path_loss_fixture():
    assert float(path_loss_db(100.0, 1.9e9)) == pytest.approx(PATH_LOSS_100M, rel=1e-12)
    cfg = preset("desk")
    assert float(path_loss(100.0, cfg)) == pytest.approx(10 ** (-PATH_LOSS_100M / 10), rel=1e-12)


@given(st.floats(min_value=1.0, max_value=5000.0))
def test_path_loss_slope(d):
    assert path_loss_db(2 * d, 1.9e9) - path_loss_db(d, 1.9e9) == pytest.approx(35.3 * math.log10(2))


def test_shadowing_is_seeded():
    cfg = preset("desk", shadowing=True)
    a = path_loss(np.full(5, 50.0), cfg, np.random.default_rng(4))
    b = path_loss(np.full(5, 50.0), cfg, np.random.default_rng(4))
    assert np.array_equal(a, b)
    assert np.std(10 * np.log10(a)) > 0
    with pytest.raises(ValueError):
        path_loss(50.0, cfg)


def test_ue_placement_in_sector():
    cfg = preset("desk", ue_count=2000)
    pos = place_ues(cfg, np.random.default_rng(0))
    r = np.hypot(pos[:, 0], pos[:, 1])
    phi = np.arctan2(pos[:, 0], pos[:, 1])
    assert r.min() >= 10 and r.max() <= 400
    assert phi.min() >= -math.pi / 3 and phi.max() <= math.pi / 3
    # area-uniform: median radius near sqrt((10^2 + 400^2) / 2)
    assert np.median(r) == pytest.approx(math.sqrt((10**2 + 400**2) / 2), rel=0.05)
    beta = large_scale_gains(pos, cfg)
    assert np.all((beta > 0) & (beta < 1))


def test_channels_seeded_and_scaled():
    H = legacy_coupling(4)
    beta = np.array([1.0, 4.0])
    a = draw_channels(H, beta, np.random.default_rng(1))
    b = draw_channels(H, beta, np.random.default_rng(1))
    assert np.array_equal(a.h, b.h)
    np.testing.assert_allclose(a.h, np.sqrt(beta)[:, None] * a.g)
    big = draw_channels(H, beta, np.random.default_rng(2)).g
    assert big.shape == (2, 4)
    many = draw_channels(legacy_coupling(2000), np.ones(1), np.random.default_rng(3)).g
    assert np.mean(np.abs(many) ** 2) == pytest.approx(1.0, rel=0.1)


def test_composite_reduces_to_legacy():
    h = np.random.default_rng(0).standard_normal((3, 5)) + 0j
    np.testing.assert_array_equal(composite_channel(np.eye(5), np.ones(5), h), h)


def test_composite_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        composite_channel(np.ones((2, 4)), np.ones(3), np.ones(4))


@settings(max_examples=50)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_composite_matches_matrix_product(seed):
    rng = np.random.default_rng(seed)
    H = rng.standard_normal((3, 6)) + 1j * rng.standard_normal((3, 6))
    p = np.exp(1j * rng.uniform(0, 2 * np.pi, 6))
    h = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    np.testing.assert_allclose(composite_channel(H, p, h), H @ np.diag(p) @ h, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(composite_channel(H, np.diag(p), h), H @ np.diag(p) @ h, rtol=1e-12)
