import numpy as np
import pytest
from hypothesis import given, strategies as st

from uavsim import thz
from uavsim.channel import SPEED_OF_LIGHT
from uavsim.exceptions import ConfigError


def test_single_element_is_friis():
    a = thz.PlanarArraySpec(1, 1, 0.5, 28e9)
    H = thz.los_mimo_channel(a, a, 100.0, 28e9).H
    lam = SPEED_OF_LIGHT / 28e9
    assert abs(H[0, 0]) == pytest.approx(lam / (4 * np.pi * 100.0), rel=1e-12)


def test_far_field_is_rank_one():
    a = thz.PlanarArraySpec(4, 4, 0.5, 28e9)
    sv = np.linalg.svd(thz.los_mimo_channel(a, a, 1e5, 28e9).H, compute_uv=False)
    assert sv[1] / sv[0] < 1e-3


def test_rayleigh_spacing_gives_equal_modes():
    fc, d, n = 28e9, 10.0, 4
    lam = SPEED_OF_LIGHT / fc
    s = np.sqrt(lam * d / n) / lam
    a = thz.PlanarArraySpec(n, n, s, fc)
    sv = np.linalg.svd(thz.los_mimo_channel(a, a, d, fc).H, compute_uv=False)
    assert sv.min() / sv.max() > 0.95


@given(st.integers(1, 5), st.integers(1, 5), st.floats(0.3, 8.0), st.floats(1.0, 1000.0))
def test_frobenius_energy_identity(rows, cols, spacing, d):
    fc = 140e9
    a = thz.PlanarArraySpec(rows, cols, spacing, fc)
    b = thz.PlanarArraySpec(cols, rows, spacing, fc)
    H = thz.los_mimo_channel(a, b, d, fc).H
    lam = SPEED_OF_LIGHT / fc
    r = np.linalg.norm((b.positions() + [d, 0, 0])[:, None] - a.positions()[None], axis=-1)
    assert np.sum(np.abs(H) ** 2) == pytest.approx(np.sum((lam / (4 * np.pi * r)) ** 2), rel=1e-12)


def test_capped_beamforming_rate():
    a = thz.PlanarArraySpec(8, 8, 0.5, 28e9)
    H = thz.los_mimo_channel(a, a, 10.0, 28e9).H
    rate, rank = thz.capacity_bps(H, 23.0, 7.0, 400e6, 4.8, "beamforming")
    assert rate == 400e6 * 4.8 and rank == 1


def test_band_ratio_in_capped_regime():
    rows = thz.rate_vs_distance_sweep(d_grid=[10.0, 50.0, 100.0])
    bf = {(r["fc"], r["d_m"]): r["rate_bps"] for r in rows if r["mode"] == "beamforming"}
    for d in (10.0, 50.0, 100.0):
        assert bf[(140e9, d)] / bf[(28e9, d)] == 4.0


def test_waterfilling_degenerate():
    p = thz.waterfill([1.0, 0.0], 5.0)
    assert p[0] == 5.0 and p[1] == 0.0


def test_waterfill_cap_leaves_power_unused():
    p = thz.waterfill([10.0, 10.0], 1e6, se_cap=2.0)
    np.testing.assert_allclose(p, [0.3, 0.3])


@given(st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=12), st.floats(1e-3, 1e3),
       st.sampled_from([np.inf, 1.0, 4.8]))
def test_waterfill_kkt(gains, power, cap):
    g = np.array(gains)
    p = thz.waterfill(g, power, cap)
    width = (2.0 ** cap - 1) / g
    assert np.all(p >= 0) and np.all(p <= width * (1 + 1e-12))
    assert p.sum() <= power * (1 + 1e-12)
    free = (p > 1e-12 * power) & (p < width * (1 - 1e-9))
    if free.any():
        levels = p[free] + 1 / g[free]
        assert np.ptp(levels) < 1e-9 * max(1.0, levels.max())
        # off streams sit above the water level, capped ones below it
        mu = levels.mean()
        assert np.all(1 / g[p == 0] >= mu - 1e-9 * mu)
    if not np.isfinite(cap):
        assert p.sum() == pytest.approx(power, rel=1e-9)


@given(st.integers(0, 2**31), st.floats(-20.0, 40.0), st.floats(0.0, 2 * np.pi))
def test_waterfilling_beats_beamforming(seed, p_dbm, phase):
    r = np.random.default_rng(seed)
    H = (r.standard_normal((4, 3)) + 1j * r.standard_normal((4, 3))) * 1e-5
    wf, _ = thz.capacity_bps(H, p_dbm, 7.0, 1e8, 4.8, "waterfilling")
    bf, _ = thz.capacity_bps(H, p_dbm, 7.0, 1e8, 4.8, "beamforming")
    assert wf >= bf * (1 - 1e-12) and bf >= 0
    wf_rot, _ = thz.capacity_bps(H * np.exp(1j * phase), p_dbm, 7.0, 1e8, 4.8, "waterfilling")
    assert wf_rot == pytest.approx(wf, rel=1e-9)


def test_element_counts_from_spans():
    tx, rx = thz.BAND_140.arrays(0.5)
    assert (tx.n_elements, rx.n_elements) == (256, 1296)
    tx, rx = thz.BAND_28.arrays(5.0)
    assert (tx.n_elements, rx.n_elements) == (16, 64) and tx.spacing == 5.0


def test_validation():
    with pytest.raises(ConfigError):
        thz.PlanarArraySpec(0, 2, 0.5, 28e9)
    with pytest.raises(ConfigError):
        thz.capacity_bps(np.eye(2), 0.0, 7.0, 1e6, mode="mrc")
    with pytest.raises(ConfigError):
        thz.los_mimo_channel(thz.PlanarArraySpec(1, 1, 0.5, 28e9), thz.PlanarArraySpec(1, 1, 0.5, 28e9),
                             0.0, 28e9)
