"""Fractional open-loop uplink power control.

Per-PRB transmit power, in the dB domain::

    P = min(P_max - 10 log10(n_prb), P_ref + epsilon * xi)

where ``xi`` is the large-scale loss (pathloss plus shadowing, antenna gains
excluded) towards the reference receiver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError


@dataclass(frozen=True)
class PowerControlParams:
    p_max_dbm: float = 23.0
    p_ref_dbm: float = -58.0
    epsilon: float = 0.6
    n_prb: int = 1

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.n_prb < 1:
            raise ConfigError(f"n_prb must be >= 1, got {self.n_prb}")

    @property
    def cap_dbm(self) -> float:
        """Per-PRB power ceiling."""
        return self.p_max_dbm - 10.0 * np.log10(self.n_prb)


def tx_power_per_prb_dbm(params: PowerControlParams, xi_db):
    """Transmit power per PRB in dBm for large-scale loss ``xi_db``."""
    xi_db = np.asarray(xi_db, dtype=float)
    if not np.all(np.isfinite(xi_db)):
        raise ValueError("large-scale loss must be finite")
    out = np.minimum(params.cap_dbm, params.p_ref_dbm + params.epsilon * xi_db)
    return float(out) if out.ndim == 0 else out


def reference_loss_db(loss_db, rule: str = "strongest", axis: int = 0):
    """Loss a user compensates when several receivers can hear it.

    ``"strongest"`` picks the smallest loss (largest gain) along ``axis``;
    ``"sum-gain"`` uses the loss equivalent to the summed linear gain.
    """
    loss_db = np.asarray(loss_db, dtype=float)
    if rule == "strongest":
        return loss_db.min(axis=axis)
    if rule == "sum-gain":
        return -10.0 * np.log10(np.sum(10.0 ** (-loss_db / 10.0), axis=axis))
    raise ConfigError(f"unknown reference-loss rule {rule!r}")
