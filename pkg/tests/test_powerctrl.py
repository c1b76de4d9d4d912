import numpy as np
import pytest
from hypothesis import given, strategies as st

from uavsim.exceptions import ConfigError
from uavsim.powerctrl import PowerControlParams, reference_loss_db, tx_power_per_prb_dbm


def oracle(p_max, n, p_ref, eps, xi):
    """Fractional power control evaluated term by term in dB."""
    return min(p_max - 10.0 * np.log10(n), p_ref + eps * xi)


def test_golden_values():
    p = PowerControlParams(24.0, -58.0, 0.6, 1)
    assert tx_power_per_prb_dbm(p, 100.0) == pytest.approx(2.0, abs=1e-12)
    assert tx_power_per_prb_dbm(p, 140.0) == 24.0


def test_epsilon_zero_is_loss_independent():
    p = PowerControlParams(23.0, -58.0, 0.0, 4)
    out = tx_power_per_prb_dbm(p, np.array([60.0, 100.0, 160.0]))
    assert np.all(out == min(23.0 - 10 * np.log10(4), -58.0))


@given(st.floats(0, 30), st.integers(1, 100), st.floats(-110, -40), st.floats(0, 1), st.floats(0, 200))
def test_matches_oracle(p_max, n, p_ref, eps, xi):
    out = tx_power_per_prb_dbm(PowerControlParams(p_max, p_ref, eps, n), xi)
    assert out == oracle(p_max, n, p_ref, eps, xi)
    assert out + 10 * np.log10(n) <= p_max + 1e-9


@given(st.floats(0, 1), st.floats(0, 200), st.floats(0, 50))
def test_monotone_in_loss(eps, xi, dxi):
    p = PowerControlParams(23.0, -80.0, eps, 1)
    assert tx_power_per_prb_dbm(p, xi + dxi) >= tx_power_per_prb_dbm(p, xi)


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0.1, 200))
def test_monotone_in_epsilon(e1, e2, xi):
    lo, hi = sorted((e1, e2))
    assert (tx_power_per_prb_dbm(PowerControlParams(23.0, -80.0, hi, 1), xi)
            >= tx_power_per_prb_dbm(PowerControlParams(23.0, -80.0, lo, 1), xi))


def test_full_compensation():
    p = PowerControlParams(23.0, -100.0, 1.0, 1)
    xi = np.array([60.0, 80.0, 110.0])
    out = tx_power_per_prb_dbm(p, xi)
    # received power (transmit minus loss) is pinned at p_ref
    assert np.allclose(out - xi, -100.0)


def test_validation():
    with pytest.raises(ConfigError):
        PowerControlParams(epsilon=1.5)
    with pytest.raises(ConfigError):
        PowerControlParams(n_prb=0)
    with pytest.raises(ValueError):
        tx_power_per_prb_dbm(PowerControlParams(), np.nan)


def test_reference_loss_rules():
    loss = np.array([[100.0, 90.0], [100.0, 120.0]])
    np.testing.assert_allclose(reference_loss_db(loss), [100.0, 90.0])
    assert reference_loss_db(loss, "sum-gain")[0] == pytest.approx(100.0 - 10 * np.log10(2))
    with pytest.raises(ConfigError):
        reference_loss_db(loss, "nearest")
