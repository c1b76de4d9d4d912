import numpy as np
import pytest
from hypothesis import given, strategies as st

from uavsim import mmimo as mm
from uavsim.channel import crandn
from uavsim.exceptions import ConfigError
from uavsim.stats import CdfSummary, stochastic_dominance


def _cross_talk_db(H, W):
    G = np.abs(np.conj(H.T) @ W) / (np.linalg.norm(H, axis=0)[:, None] * np.linalg.norm(W, axis=0))
    off = G[~np.eye(G.shape[0], dtype=bool)]
    return 20 * np.log10(off.max() + 1e-300)


def test_single_user_zf_is_matched_filter(rng):
    h = crandn(rng, (16, 1))
    W = mm.zf_precoders(h).W
    np.testing.assert_allclose(W, h / np.linalg.norm(h), atol=1e-12)


def test_zf_cross_talk(rng):
    H = crandn(rng, (64, 8))
    assert _cross_talk_db(H, mm.zf_precoders(H).W) < -100.0


def test_zf_orthonormal_channels(rng):
    Q, _ = np.linalg.qr(crandn(rng, (16, 4)))
    W = mm.zf_precoders(Q).W
    np.testing.assert_allclose(W, Q, atol=1e-12)


@given(st.integers(1, 8), st.integers(0, 2**31), st.floats(0.1, 100.0))
def test_precoder_power_conservation(k, seed, p):
    H = crandn(np.random.default_rng(seed), (16, k))
    assert mm.zf_precoders(H, p).total_power == pytest.approx(p, rel=1e-9)
    A = crandn(np.random.default_rng(seed + 1), (16, 3))
    assert mm.null_steering_precoders(H, A, total_power=p).total_power == pytest.approx(p, rel=1e-9)


def test_zf_rejects_overload(rng):
    with pytest.raises(ConfigError):
        mm.zf_precoders(crandn(rng, (4, 5)))


def test_srs_clean_limit(rng):
    H = crandn(rng, (8, 3))
    plan = mm.SrsPlan(np.array([0, 1, 2]))
    est = mm.srs_estimate(H, plan, 1.0, 0.0, rng)
    np.testing.assert_allclose(est.entries, H, atol=1e-12)
    assert est.quality == "srs_estimated"


def test_srs_contamination_correlation():
    rng = np.random.default_rng(5)
    plan = mm.SrsPlan(np.array([0, 0]))
    num = den_a = den_b = 0.0
    for _ in range(10_000):
        H = crandn(rng, (2, 2))
        g = mm.srs_estimate(H, plan, 1.0, 0.1, rng).entries[0, 0]
        num += g * np.conj(H[0, 1])
        den_a += abs(g) ** 2
        den_b += abs(H[0, 1]) ** 2
    corr = abs(num) / np.sqrt(den_a * den_b)
    # scalar MMSE: corr = sqrt(beta / (2 beta + noise))
    assert corr > 0.4
    assert corr == pytest.approx(np.sqrt(1.0 / 2.1), abs=0.03)


def test_srs_mse_falls_with_power():
    mse = []
    for p_db in np.arange(-10.0, 11.0, 2.0):
        rng = np.random.default_rng(0)
        H = crandn(rng, (64, 48))
        plan = mm.SrsPlan(np.arange(48) % 8, pool=np.arange(48) // 8, n_sequences=8)
        est = mm.srs_estimate(H, plan, 10 ** (p_db / 10), 1.0, rng)
        mse.append(np.mean(np.abs(est.entries - H) ** 2))
    assert np.all(np.diff(mse) < 0)


def test_null_steering_reduces_to_zf(rng):
    H = crandn(rng, (16, 4))
    a = mm.null_steering_precoders(H, np.empty((16, 0)))
    np.testing.assert_allclose(a.W, mm.zf_precoders(H).W, atol=1e-12)


def test_null_constraints_met(rng):
    H = crandn(rng, (64, 8))
    A = np.exp(2j * np.pi * rng.random((64, 16)))
    pre = mm.null_steering_precoders(H, A, max_nulls=16)
    assert pre.dropped_nulls == 0
    assert np.abs(np.conj(A.T) @ pre.W).max() < 1e-10
    assert _cross_talk_db(H, pre.W) < -100.0


def test_null_on_own_user_is_dropped(rng):
    H = crandn(rng, (16, 3))
    A = np.column_stack([H[:, 0], crandn(rng, 16)])
    pre = mm.null_steering_precoders(H, A, strength=[1.0, 0.5])
    assert pre.dropped_nulls == 1
    assert np.abs(np.conj(H[:, 0]) @ pre.W[:, 0]) > 0


def test_nulls_cut_leakage_towards_victims(rng):
    H = crandn(rng, (64, 8))
    victims = np.exp(2j * np.pi * rng.random((64, 6)))
    leak_zf = np.sum(np.abs(np.conj(victims.T) @ mm.zf_precoders(H).W) ** 2)
    leak_ns = np.sum(np.abs(np.conj(victims.T) @ mm.null_steering_precoders(H, victims).W) ** 2)
    assert leak_ns < 1e-18 * leak_zf + 1e-20


def test_csi_validation():
    with pytest.raises(ConfigError):
        mm.CsiMatrix(np.zeros((2, 3)))
    with pytest.raises(ConfigError):
        mm.SrsPlan(np.array([9]))
    with pytest.raises(ConfigError):
        mm.MmimoParams(csi="guess")


def test_isolated_cell_perfect_csi_snr():
    # one served user, no other cells: SINR is the beamforming SNR
    rng = np.random.default_rng(3)
    h = crandn(rng, (64, 1))
    pre = mm.zf_precoders(h, total_power=2.0)
    snr = pre.powers[0] * abs(np.vdot(h, pre.W[:, 0])) ** 2 / 0.5
    assert snr == pytest.approx(2.0 * np.linalg.norm(h) ** 2 / 0.5)


def test_drop_is_deterministic():
    p = mm.MmimoParams(n_fading=1)
    a = mm.mmimo_drop(p, 11, ("mMIMO",))
    b = mm.mmimo_drop(p, 11, ("mMIMO",))
    assert a["mMIMO"]["gue_sinr_db"].tobytes() == b["mMIMO"]["gue_sinr_db"].tobytes()


def test_uavs_degrade_gues():
    seeds = range(6)
    none = mm.run_mmimo_study(mm.MmimoParams(uav_per_sector=0, uav_height=150.0), seeds, ("mMIMO",))
    one = mm.run_mmimo_study(mm.MmimoParams(uav_per_sector=1, uav_height=150.0), seeds, ("mMIMO",))
    assert stochastic_dominance(none["mMIMO"].gue_sinr, one["mMIMO"].gue_sinr, 0.02)


def test_study_summary_shape():
    res = mm.run_mmimo_study(mm.MmimoParams(), [0], ("SU", "mMIMOnulls"))
    s = res["mMIMOnulls"].summary()
    assert set(s) == {"mode", "height", "frac_above_100kbps", "sinr_percentiles"}
    assert 0.0 <= s["frac_above_100kbps"] <= 1.0
    with pytest.raises(ConfigError):
        mm.run_mmimo_study(mm.MmimoParams(), [0], ("MU",))
