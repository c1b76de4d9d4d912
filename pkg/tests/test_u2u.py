import numpy as np
import pytest
from hypothesis import given, strategies as st

from uavsim import u2u
from uavsim.exceptions import ConfigError
from uavsim.scenario import build_hex_layout, drop_seeds
from uavsim.stats import ks_distance

PC = u2u.default_power(0.6)


def _drop(params=u2u.U2uParams(), sharing=u2u.SharingConfig(), seed=1, **kw):
    return u2u.u2u_drop(params, sharing, PC, PC, seed, **kw)


def test_rayleigh_mean_distance():
    r = u2u.truncated_rayleigh(100.0, 1e4, 100_000, np.random.default_rng(0))
    assert r.mean() == pytest.approx(100.0, rel=0.02)


@given(st.floats(1.0, 500.0), st.floats(0.1, 3.0))
def test_rayleigh_respects_truncation(r_mean, factor):
    r = u2u.truncated_rayleigh(r_mean, factor * r_mean, 500, np.random.default_rng(1))
    assert np.all((r >= 0) & (r <= factor * r_mean * (1 + 1e-12)))


def test_degenerate_truncation():
    r = u2u.truncated_rayleigh(100.0, 1e-6, 1000, np.random.default_rng(0))
    assert r.max() <= 1e-6


def test_zero_density_gives_no_pairs():
    lay = build_hex_layout(480.0)
    assert len(u2u.place_pairs(lay, 0.0, 100.0, 300.0, 100.0, np.random.default_rng(0))) == 0
    with pytest.raises(ConfigError):
        u2u.place_pairs(lay, -1.0, 100.0, 300.0, 100.0, np.random.default_rng(0))


def test_pairs_inside_layout():
    lay = build_hex_layout(480.0)
    pairs = u2u.place_pairs(lay, 5.0, 100.0, 300.0, 100.0, np.random.default_rng(2))
    assert len(pairs) > 0
    assert lay.contains(pairs.tx_xy).all() and lay.contains(pairs.rx_xy).all()


def test_prb_assignment_rules():
    rng = np.random.default_rng(0)
    gue, pairs = u2u.assign_prbs(u2u.SharingConfig(eta_u=1.0), 50, 4, rng)
    assert gue.all() and pairs.all()
    _, pairs = u2u.assign_prbs(u2u.SharingConfig(eta_u=0.0), 50, 4, rng)
    assert not pairs.any()
    _, pairs = u2u.assign_prbs(u2u.SharingConfig(eta_u=0.3), 50, 4, rng)
    assert np.all(pairs.sum(axis=1) == 15)
    gue, pairs = u2u.assign_prbs(u2u.SharingConfig("overlay"), 50, 4, rng)
    assert not (gue & pairs.any(axis=0)).any()
    assert gue.sum() == 45 and np.all(pairs.sum(axis=1) == 5)


def test_sharing_validation():
    with pytest.raises(ConfigError):
        u2u.SharingConfig(mode="both")
    with pytest.raises(ConfigError):
        u2u.SharingConfig(eta_u=1.5)
    with pytest.raises(ConfigError):
        u2u.SharingConfig("overlay", overlay_split=(1e6, 1e6))


def test_eta_zero_equals_no_u2u():
    a = _drop(sharing=u2u.SharingConfig(eta_u=0.0))
    b = _drop(with_u2u=False)
    np.testing.assert_array_equal(a["gue_sinr_db"], b["gue_sinr_db"])
    assert a["u2u_sinr_db"].size == 0


def test_small_eta_close_to_baseline():
    seeds = drop_seeds(3, 3)
    params = u2u.U2uParams()
    base = u2u.coexistence_sinr(params, u2u.SharingConfig(), PC, PC, seeds, with_u2u=False)
    light = u2u.coexistence_sinr(params, u2u.SharingConfig(eta_u=1 / 50), PC, PC, seeds)
    assert ks_distance(base.gue_sinr, light.gue_sinr) < 0.02


def test_overlay_zero_slice_gives_zero_rate():
    r = _drop(sharing=u2u.SharingConfig("overlay", overlay_split=(0.0, 10e6)))
    assert np.all(r["u2u_rate_bps"] == 0.0)


def test_overlay_gue_unaffected_by_uav_power():
    ov = u2u.SharingConfig("overlay")
    a = u2u.u2u_drop(u2u.U2uParams(), ov, u2u.default_power(0.2), PC, 4)
    b = u2u.u2u_drop(u2u.U2uParams(), ov, u2u.default_power(0.9), PC, 4)
    np.testing.assert_array_equal(a["gue_sinr_db"], b["gue_sinr_db"])
    c = u2u.u2u_drop(u2u.U2uParams(), ov, PC, PC, 4, with_u2u=False)
    np.testing.assert_array_equal(a["gue_sinr_db"], c["gue_sinr_db"])


def test_drop_is_deterministic_and_sized():
    a, b = _drop(seed=9), _drop(seed=9)
    assert all(a[k].tobytes() == b[k].tobytes() for k in a)
    params = u2u.U2uParams()
    assert a["gue_sinr_db"].size == 57 * params.n_prb


def test_params_validation():
    with pytest.raises(ConfigError):
        u2u.U2uParams(ground_air_los="street")
    with pytest.raises(ConfigError):
        u2u.U2uParams(bs_antenna="yagi")


def test_coverage_definition():
    r = u2u.merge_u2u_drops([{"gue_sinr_db": np.array([-1.0, 0.0, 2.0, 5.0]),
                              "u2u_sinr_db": np.array([-3.0, 1.0]),
                              "gue_rate_bps": np.zeros(4), "u2u_rate_bps": np.zeros(1)}], 0.0)
    assert r.gue_coverage == 0.75 and r.u2u_coverage == 0.5


def test_ula_gain_limits():
    assert u2u.ula_gain(16, 0.0) == pytest.approx(16.0)
    assert np.allclose(u2u.ula_gain(1, np.linspace(0, 10, 5)), 1.0)


def test_wobble_aligned_value():
    cfg = u2u.WobbleConfig(n_antennas=8, delta_max_deg=0.0)
    snr0 = 10 ** (u2u.wobble_snr0_db(cfg) / 10)
    assert u2u.wobble_spectral_efficiency(cfg) == pytest.approx(np.log2(1 + snr0 * 64), rel=1e-12)


@given(st.floats(0.0, 5.0))
def test_wobble_single_element_ignores_delta(dmax):
    se = u2u.wobble_spectral_efficiency(u2u.WobbleConfig(1, dmax), n_samples=100)
    assert se == pytest.approx(u2u.wobble_spectral_efficiency(u2u.WobbleConfig(1, 0.0), n_samples=100))


def test_wobble_interior_maximum():
    ns = [2, 4, 8, 16, 32, 64, 128, 256]
    se = [u2u.wobble_spectral_efficiency(u2u.WobbleConfig(n, 2.0)) for n in ns]
    k = int(np.argmax(se))
    assert 0 < k < len(ns) - 1
