import numpy as np
import pytest
from hypothesis import given, strategies as st

from uavsim.exceptions import ConfigError
from uavsim.scenario import (DensitySpec, build_hex_layout, build_random_layout, drop_seeds,
                             drop_users, wrap_distance)


def _pairwise(sites):
    return np.linalg.norm(sites[:, None] - sites[None], axis=-1)


def test_hex_layout_uma_500():
    lay = build_hex_layout(500.0, "UMa")
    assert lay.n_sites == 19 and lay.n_cells == 57
    d = _pairwise(lay.sites)
    assert np.isclose(d[d > 0].min(), 500.0)
    assert lay.bs_height == 25.0


def test_hex_layout_umi_height():
    assert build_hex_layout(200.0, "UMi").bs_height == 10.0


def test_hex_layout_scales_linearly():
    a, b = build_hex_layout(1.0), build_hex_layout(500.0)
    assert a.n_sites == 19
    np.testing.assert_allclose(_pairwise(a.sites) * 500.0, _pairwise(b.sites), atol=1e-9)


def test_hex_layout_sixfold_symmetry():
    lay = build_hex_layout(500.0)
    c, s = np.cos(np.pi / 3), np.sin(np.pi / 3)
    rot = lay.sites @ np.array([[c, s], [-s, c]])
    d = np.linalg.norm(rot[:, None] - lay.sites[None], axis=-1)
    assert np.all(d.min(axis=1) < 1e-6)


def test_bad_layout_inputs():
    with pytest.raises(ConfigError):
        build_hex_layout(0.0)
    with pytest.raises(ConfigError):
        build_hex_layout(500.0, "RMa")


def test_per_sector_counts():
    lay = build_hex_layout(500.0)
    drop = drop_users(lay, DensitySpec(gue_per_sector=14, uav_per_sector=1), seed=1)
    assert drop.n_gue == 798 and drop.n_uav == 57
    assert np.all(np.bincount(drop.gue_sector, minlength=57) == 14)


def test_zero_uav_density():
    lay = build_hex_layout(500.0)
    drop = drop_users(lay, DensitySpec(gue_per_km2=10.0, uav_per_km2=0.0), seed=1)
    assert drop.n_uav == 0


def test_drop_determinism():
    lay = build_hex_layout(500.0)
    spec = DensitySpec(gue_per_sector=3, uav_per_sector=1)
    a, b = drop_users(lay, spec, seed=7), drop_users(lay, spec, seed=7)
    assert a.gue_xy.tobytes() == b.gue_xy.tobytes()
    assert a.uav_h.tobytes() == b.uav_h.tobytes()


def test_drops_stay_in_region():
    lay = build_hex_layout(500.0)
    drop = drop_users(lay, DensitySpec(gue_per_km2=50.0, uav_per_sector=2), seed=3)
    assert lay.contains(drop.gue_xy).all() and lay.contains(drop.uav_xy).all()


def test_negative_density_rejected():
    with pytest.raises(ConfigError):
        drop_users(build_hex_layout(500.0), DensitySpec(gue_per_km2=-1.0), seed=0)


def test_wrap_distance_examples():
    lay = build_hex_layout(500.0)
    d2d, d3d, _ = wrap_distance(np.array([10.0, 20.0, 1.5]), np.array([10.0, 20.0, 31.5]), lay)
    assert d2d == 0.0 and d3d == 30.0
    d2d, d3d, _ = wrap_distance(np.array([0.0, 0.0, 0.0]), np.array([40.0, 0.0, 30.0]), lay)
    assert np.isclose(d3d, 50.0)
    shift = lay.shifts[1]
    d2d, _, _ = wrap_distance(np.array([5.0, 5.0, 0.0]), np.array([5.0 + shift[0], 5.0 + shift[1], 0.0]), lay)
    assert d2d < 1e-6


coord = st.floats(-1200.0, 1200.0)
height = st.floats(0.0, 300.0)


@given(coord, coord, height, coord, coord, height)
def test_wrap_distance_symmetric(x1, y1, h1, x2, y2, h2):
    lay = build_hex_layout(500.0)
    a, b = np.array([x1, y1, h1]), np.array([x2, y2, h2])
    d_ab = wrap_distance(a, b, lay)
    d_ba = wrap_distance(b, a, lay)
    assert np.isclose(d_ab[0], d_ba[0], atol=1e-9) and np.isclose(d_ab[1], d_ba[1], atol=1e-9)


@given(coord, coord, coord, coord)
def test_wrap_distance_never_exceeds_direct(x1, y1, x2, y2):
    lay = build_hex_layout(500.0)
    d2d, _, _ = wrap_distance(np.array([x1, y1, 0.0]), np.array([x2, y2, 0.0]), lay)
    assert d2d <= np.hypot(x2 - x1, y2 - y1) + 1e-9


def test_random_layout_density_matches_hex():
    lay = build_random_layout(19, 500.0, "UMi", np.random.default_rng(0))
    assert np.isclose(lay.area_m2, build_hex_layout(500.0).area_m2)
    assert lay.n_cells == 19
    sect = build_random_layout(19, 500.0, "UMi", np.random.default_rng(0), sectorized=True)
    assert sect.n_cells == 57


def test_drop_seeds_are_stable_and_distinct():
    s = drop_seeds(42, 10)
    assert s == drop_seeds(42, 10) and len(set(s)) == 10
    assert drop_seeds(42, 12)[:10] == s
