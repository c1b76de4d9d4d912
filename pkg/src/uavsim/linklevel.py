"""RSRP, cell association, SINR assembly and rate mapping.

Everything here works in dB/dBm at the interface and sums powers in the
linear domain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

THERMAL_NOISE_DBM_HZ = -174.0


def db2lin(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def lin2db(x):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(x, dtype=float))


def noise_dbm(bandwidth_hz: float, noise_figure_db: float) -> float:
    if not bandwidth_hz > 0:
        raise ValueError("bandwidth must be positive")
    return THERMAL_NOISE_DBM_HZ + 10.0 * np.log10(bandwidth_hz) + noise_figure_db


def rsrp_dbm(tx_power_dbm, pathloss_db, shadowing_db=0.0, tx_gain_dbi=0.0, rx_gain_dbi=0.0):
    return (np.asarray(tx_power_dbm, dtype=float) - pathloss_db - shadowing_db
            + tx_gain_dbi + rx_gain_dbi)


@dataclass(frozen=True)
class RsrpReport:
    ue_id: int
    rsrp_dbm: np.ndarray
    serving_cell: int


def associate(rsrp) -> np.ndarray:
    """Serving cell per UE: argmax of RSRP over the last axis.

    Ties go to the lowest cell index.
    """
    rsrp = np.asarray(rsrp, dtype=float)
    if rsrp.shape[-1] == 0:
        raise ValueError("no candidate cells")
    return np.argmax(rsrp, axis=-1)


def rsrp_report(ue_id: int, rsrp) -> RsrpReport:
    rsrp = np.asarray(rsrp, dtype=float)
    return RsrpReport(ue_id=ue_id, rsrp_dbm=rsrp, serving_cell=int(associate(rsrp)))


@dataclass(frozen=True)
class SinrSample:
    direction: str
    signal_dbm: float
    interference_dbm: float
    noise_dbm: float
    sinr_db: float


def assemble_sinr(signal_dbm: float, interferers_dbm, noise: float,
                  direction: str = "UL") -> SinrSample:
    """Combine a useful signal with interferers and noise (all dBm)."""
    if direction not in ("UL", "DL", "U2U"):
        raise ValueError(f"unknown direction {direction!r}")
    i_lin = float(np.sum(db2lin(np.asarray(interferers_dbm, dtype=float))))
    i_dbm = float(lin2db(i_lin)) if i_lin > 0 else -np.inf
    total = i_lin + float(db2lin(noise))
    sinr = float(signal_dbm - lin2db(total))
    return SinrSample(direction, float(signal_dbm), i_dbm, float(noise), sinr)


def sinr_db(signal_mw, interference_mw, noise_mw):
    """Vectorised linear-domain SINR in dB."""
    return lin2db(np.asarray(signal_mw) / (np.asarray(interference_mw) + noise_mw))


def snr_from_rsrp(rsrp: float, bandwidth_hz: float, noise_figure_db: float):
    return np.asarray(rsrp, dtype=float) - noise_dbm(bandwidth_hz, noise_figure_db)


def spectral_efficiency(sinr_db_, se_cap_bps_hz: float = np.inf):
    se = np.log2(1.0 + db2lin(sinr_db_))
    return np.minimum(se, se_cap_bps_hz)


def rate_bps(sinr_db_, bandwidth_hz: float, se_cap_bps_hz: float = np.inf):
    """Shannon rate, optionally capped in spectral efficiency."""
    if not bandwidth_hz >= 0:
        raise ValueError("bandwidth must be non-negative")
    return bandwidth_hz * spectral_efficiency(sinr_db_, se_cap_bps_hz)
