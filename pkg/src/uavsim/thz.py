"""Free-space line-of-sight MIMO between planar arrays.

Channels come from exact element-pair distances (spherical wavefronts), so
large arrays at short range see several strong eigenmodes. Rates use either
single-stream beamforming or waterfilling, with a per-stream spectral
efficiency cap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import SPEED_OF_LIGHT
from .exceptions import ConfigError
from .linklevel import db2lin, noise_dbm

DEFAULT_SE_CAP = 4.8
MODES = ("beamforming", "waterfilling")


@dataclass(frozen=True)
class PlanarArraySpec:
    rows: int
    cols: int
    spacing: float  # in wavelengths
    fc_hz: float

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ConfigError("arrays need at least one row and column")
        if not self.spacing > 0 or not self.fc_hz > 0:
            raise ConfigError("spacing and carrier must be positive")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.fc_hz

    @property
    def n_elements(self) -> int:
        return self.rows * self.cols

    @property
    def span_m(self) -> tuple[float, float]:
        s = self.spacing * self.wavelength
        return (self.rows - 1) * s, (self.cols - 1) * s

    def positions(self) -> np.ndarray:
        """Element coordinates ``(n, 3)`` in the array plane ``x = 0``, centred."""
        s = self.spacing * self.wavelength
        r = (np.arange(self.rows) - (self.rows - 1) / 2.0) * s
        c = (np.arange(self.cols) - (self.cols - 1) / 2.0) * s
        zz, yy = np.meshgrid(r, c, indexing="ij")
        return np.column_stack([np.zeros(zz.size), yy.ravel(), zz.ravel()])

    @classmethod
    def square_from_span(cls, span_m: float, spacing: float, fc_hz: float) -> "PlanarArraySpec":
        """Square array filling a given side span at the given spacing."""
        n = int(round(span_m / (spacing * SPEED_OF_LIGHT / fc_hz))) + 1
        return cls(n, n, spacing, fc_hz)


@dataclass(frozen=True)
class LosMimoChannel:
    H: np.ndarray  # (n_rx, n_tx)
    fc_hz: float
    distance: float


def los_mimo_channel(tx: PlanarArraySpec, rx: PlanarArraySpec, d: float, fc_hz: float) -> LosMimoChannel:
    """Facing broadside arrays ``d`` metres apart; ``h = lambda/(4 pi r) exp(-j 2 pi r / lambda)``."""
    if not d > 0:
        raise ConfigError("distance must be positive")
    lam = SPEED_OF_LIGHT / fc_hz
    pt = tx.positions()
    pr = rx.positions() + np.array([d, 0.0, 0.0])
    r = np.linalg.norm(pr[:, None, :] - pt[None, :, :], axis=-1)
    H = lam / (4.0 * np.pi * r) * np.exp(-2j * np.pi * r / lam)
    return LosMimoChannel(H, float(fc_hz), float(d))


def waterfill(gains, total_power: float, se_cap: float = np.inf) -> np.ndarray:
    """Power per stream maximizing sum of ``min(log2(1 + p g), cap)``.

    Powers follow ``p_i = clip(mu - 1/g_i, 0, (2^cap - 1)/g_i)``; the water
    level ``mu`` is found exactly on the piecewise-linear total power curve.
    Power that no stream can use below its cap is left unallocated.
    """
    g = np.asarray(gains, dtype=float)
    p = np.zeros_like(g)
    pos = g > 0
    if total_power <= 0 or not pos.any():
        return p
    gi = g[pos]
    lo = 1.0 / gi
    width = (2.0 ** se_cap - 1.0) / gi if np.isfinite(se_cap) else np.full_like(gi, np.inf)
    hi = lo + width

    def used(mu):
        return np.clip(mu - lo, 0.0, width).sum()

    bps = np.unique(np.concatenate([lo, hi[np.isfinite(hi)]]))
    if np.isfinite(hi).all() and used(bps[-1]) <= total_power:
        p[pos] = width
        return p
    k = np.searchsorted([used(b) for b in bps], total_power, side="right")
    mu0 = bps[k - 1]
    active = (lo <= mu0) & (hi > mu0)  # streams growing on this segment
    mu = mu0 + (total_power - used(mu0)) / active.sum()
    p[pos] = np.clip(mu - lo, 0.0, width)
    return p


def capacity_bps(H, tx_power_dbm: float, noise_figure_db: float, bandwidth_hz: float,
                 se_cap: float = DEFAULT_SE_CAP, mode: str = "beamforming") -> tuple[float, int]:
    """Rate and number of active streams over ``H``.

    ``beamforming`` sends one stream on the dominant singular pair;
    ``waterfilling`` spreads power over all eigenmodes. Each stream's
    spectral efficiency is capped at ``se_cap``.
    """
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}")
    H = np.asarray(H)
    sv = np.linalg.svd(H, compute_uv=False)
    noise = db2lin(noise_dbm(bandwidth_hz, noise_figure_db))
    p_tot = db2lin(tx_power_dbm)
    g = sv ** 2 / noise
    if mode == "beamforming":
        se = min(np.log2(1.0 + p_tot * g[0]), se_cap) if len(g) else 0.0
        return float(bandwidth_hz * se), int(len(g) > 0)
    p = waterfill(g, p_tot, se_cap)
    se = np.minimum(np.log2(1.0 + p * g), se_cap)
    return float(bandwidth_hz * se.sum()), int(np.count_nonzero(p > 0))


@dataclass(frozen=True)
class ThzBand:
    fc_hz: float
    bandwidth_hz: float
    noise_figure_db: float
    tx_span_m: float = 0.016
    rx_span_m: float = 0.0375
    tx_power_dbm: float = 23.0
    se_cap: float = DEFAULT_SE_CAP

    def arrays(self, spacing: float) -> tuple[PlanarArraySpec, PlanarArraySpec]:
        """Element counts follow from the half-wavelength spans; wider spacing keeps the counts."""
        tx = PlanarArraySpec.square_from_span(self.tx_span_m, 0.5, self.fc_hz)
        rx = PlanarArraySpec.square_from_span(self.rx_span_m, 0.5, self.fc_hz)
        return (PlanarArraySpec(tx.rows, tx.cols, spacing, self.fc_hz),
                PlanarArraySpec(rx.rows, rx.cols, spacing, self.fc_hz))


BAND_28 = ThzBand(28e9, 400e6, 7.0)
BAND_140 = ThzBand(140e9, 1.6e9, 10.0)
CURVES = (("beamforming", 0.5), ("waterfilling", 0.5), ("waterfilling", 5.0))


def rate_vs_distance_sweep(bands=(BAND_28, BAND_140), d_grid=None, curves=CURVES) -> list[dict]:
    """Rows of (fc, mode, spacing, d_m, rate_bps, rank_effective)."""
    d_grid = np.geomspace(10.0, 10000.0, 31) if d_grid is None else np.asarray(d_grid, dtype=float)
    rows = []
    for band in bands:
        for mode, spacing in curves:
            tx, rx = band.arrays(spacing)
            for d in d_grid:
                H = los_mimo_channel(tx, rx, float(d), band.fc_hz).H
                rate, rank = capacity_bps(H, band.tx_power_dbm, band.noise_figure_db,
                                          band.bandwidth_hz, band.se_cap, mode)
                rows.append({"fc": band.fc_hz, "mode": mode, "spacing": spacing,
                             "d_m": float(d), "rate_bps": rate, "rank_effective": rank})
    return rows
