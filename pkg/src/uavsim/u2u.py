"""UAV-to-UAV sidelinks coexisting with the ground uplink.

Underlay pairs reuse a fraction of the GUE uplink PRBs (optionally hopping
over them at random); overlay pairs get a dedicated slice. Both tiers use
fractional power control. The module also covers the mmWave link whose two
UAV arrays wobble in elevation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import channel as ch
from .exceptions import ConfigError, NumericalError
from .linklevel import db2lin, noise_dbm, rate_bps, sinr_db
from .powerctrl import PowerControlParams, tx_power_per_prb_dbm
from .scenario import NetworkLayout, _sample_in_sector, _sample_uniform, build_hex_layout, wrap_distance
from .stats import CdfSummary

PRB_HZ = 180e3


# --------------------------------------------------------------------------
# Pair placement and PRB assignment
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class U2uPairs:
    tx_xy: np.ndarray  # (n, 2)
    rx_xy: np.ndarray  # (n, 2), folded back into the layout
    distance: np.ndarray  # (n,) horizontal tx-rx separation
    height: float

    def __len__(self) -> int:
        return len(self.tx_xy)


def truncated_rayleigh(r_mean: float, r_trunc: float, size, rng: np.random.Generator):
    """Rayleigh radii with mean ``r_mean`` (before truncation), cut at ``r_trunc``.

    Sampled by inverting the truncated CDF.
    """
    if not r_trunc > 0:
        raise ConfigError("truncation radius must be positive")
    if not r_mean > 0:
        raise ConfigError("mean distance must be positive")
    sigma = r_mean / np.sqrt(np.pi / 2.0)
    f_max = -np.expm1(-(r_trunc ** 2) / (2.0 * sigma ** 2))
    u = rng.random(size) * f_max
    return sigma * np.sqrt(-2.0 * np.log1p(-u))


def place_pairs(layout: NetworkLayout, density_per_km2: float, r_mean: float, r_trunc: float,
                height: float, rng: np.random.Generator) -> U2uPairs:
    """Poisson number of transmitters, uniform over the layout, receivers around them."""
    if density_per_km2 < 0:
        raise ConfigError("pair density must be non-negative")
    if not r_trunc > 0:
        raise ConfigError("truncation radius must be positive")
    n = int(rng.poisson(density_per_km2 * layout.area_m2 / 1e6))
    tx = _sample_uniform(layout, n, rng, 0.0) if n else np.empty((0, 2))
    r = truncated_rayleigh(r_mean, r_trunc, n, rng)
    phi = rng.uniform(0.0, 2.0 * np.pi, n)
    rx = layout.fold(tx + np.column_stack([r * np.cos(phi), r * np.sin(phi)]))
    return U2uPairs(tx, rx, r, float(height))


@dataclass(frozen=True)
class SharingConfig:
    mode: str = "underlay"  # underlay | overlay
    eta_u: float = 1.0
    overlay_split: tuple[float, float] = (1e6, 9e6)  # (U2U Hz, GUE Hz)
    hopping: bool = True
    total_hz: float = 10e6

    def __post_init__(self):
        if self.mode not in ("underlay", "overlay"):
            raise ConfigError(f"unknown sharing mode {self.mode!r}")
        if not 0.0 <= self.eta_u <= 1.0:
            raise ConfigError("eta_u must lie in [0, 1]")
        if self.mode == "overlay" and not np.isclose(sum(self.overlay_split), self.total_hz):
            raise ConfigError("overlay split must add up to the total bandwidth")

    def n_u2u_slice(self, n_prb: int) -> int:
        """PRBs of the dedicated overlay slice out of ``n_prb``."""
        return int(round(self.overlay_split[0] / self.total_hz * n_prb))


def assign_prbs(sharing: SharingConfig, n_gue_prbs: int, n_pairs: int,
                rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """PRB occupancy for GUEs and pairs.

    Returns ``(gue_mask, pair_mask)`` over the same PRB axis: a boolean
    vector of PRBs carrying GUE uplink and an ``(n_pairs, n_prb)`` matrix.
    Underlay pairs use ``floor(eta_u * n_gue_prbs)`` PRBs, drawn without
    replacement when hopping (otherwise the lowest ones); overlay pairs use
    the whole dedicated slice placed after the GUE PRBs.
    """
    if sharing.mode == "underlay":
        n_uav = int(np.floor(sharing.eta_u * n_gue_prbs + 1e-9))
        gue = np.ones(n_gue_prbs, dtype=bool)
        pairs = np.zeros((n_pairs, n_gue_prbs), dtype=bool)
        for i in range(n_pairs):
            idx = rng.choice(n_gue_prbs, n_uav, replace=False) if sharing.hopping else np.arange(n_uav)
            pairs[i, idx] = True
        return gue, pairs
    n_u = sharing.n_u2u_slice(n_gue_prbs)
    n_g = n_gue_prbs - n_u
    gue = np.r_[np.ones(n_g, dtype=bool), np.zeros(n_u, dtype=bool)]
    pairs = np.zeros((n_pairs, n_gue_prbs), dtype=bool)
    pairs[:, n_g:] = True
    return gue, pairs


# --------------------------------------------------------------------------
# Coexistence study
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class U2uParams:
    isd: float = 480.0
    env: str = "UMa"
    carrier_hz: float = 2e9
    bandwidth_hz: float = 10e6
    n_prb: int = 50
    pair_density_per_km2: float = 1.0
    r_mean: float = 100.0
    r_trunc_factor: float = 3.0
    uav_height: float = 100.0
    gue_per_cell: int = 50  # candidates dropped per cell; one scheduled per PRB
    ue_noise_figure_db: float = 9.0
    bs_noise_figure_db: float = 5.0
    coverage_threshold_db: float = 0.0
    k_factor_db: float = ch.DEFAULT_K_FACTOR_DB
    ground_air_los: str = "elevation"  # elevation | aerial, for GUE-UAV and BS-UAV
    bs_antenna: str = "element"  # element | composite (8x1) | omni

    def __post_init__(self):
        if self.ground_air_los not in ("elevation", "aerial"):
            raise ConfigError(f"unknown ground-to-air LoS model {self.ground_air_los!r}")
        if self.bs_antenna not in ("composite", "element", "omni"):
            raise ConfigError(f"unknown BS antenna model {self.bs_antenna!r}")
        if self.n_prb < 1:
            raise ConfigError("n_prb must be >= 1")
        if self.r_trunc_factor <= 0:
            raise ConfigError("truncation factor must be positive")


def default_power(epsilon: float, n_prb: int = 1) -> PowerControlParams:
    return PowerControlParams(p_max_dbm=24.0, p_ref_dbm=-58.0, epsilon=epsilon, n_prb=n_prb)


def _fading_power(rng, los, k_db, shape):
    """|h|^2 for scalar Ricean (LoS) or Rayleigh links."""
    h = ch.small_scale(1, rng, los=np.broadcast_to(los, shape),
                       steering=np.exp(2j * np.pi * rng.random(shape))[..., None],
                       k_factor_db=k_db, size=shape)[..., 0]
    return np.abs(h) ** 2


@dataclass
class _Geometry:
    layout: NetworkLayout
    gue_pos: np.ndarray  # (G, 3)
    gue_cell: np.ndarray  # serving cell per GUE
    g_gue_bs: np.ndarray  # (G, C) linear gain incl. BS composite gain
    xi_gue: np.ndarray  # (G,) loss towards serving cell
    los_gue_bs: np.ndarray
    pairs: U2uPairs
    g_uav_bs: np.ndarray  # (P, C) tx UAV -> BS
    los_uav_bs: np.ndarray
    g_uu: np.ndarray  # (P, P) tx j -> rx i
    los_uu: np.ndarray
    g_gue_rx: np.ndarray  # (G, P) GUE -> rx UAV
    los_gue_rx: np.ndarray
    xi_pair: np.ndarray  # (P,) own-link loss


def _link(kind, d2d, d3d, h_ut, params, rng, h_bs=None):
    if kind in ("gue-uav", "bs-uav") and params.ground_air_los == "elevation":
        h_low = 1.5 if h_bs is None else h_bs
        p = ch.elevation_los_probability(np.rad2deg(np.arctan2(h_ut - h_low, d2d)))
    else:
        p = ch.los_probability(kind, d2d, h_ut, params.env)
    los = rng.random(np.shape(d2d)) < p
    pl = ch.pathloss_db(kind, np.maximum(d3d, 1.0), h_ut, params.carrier_hz, los, params.env,
                        d2d=d2d, h_bs=h_bs)
    sf = ch.shadowing_std_db(kind, h_ut, los, params.env) * rng.standard_normal(np.shape(d2d))
    return los, pl + sf


def _geometry(params: U2uParams, seed: int) -> _Geometry:
    layout = build_hex_layout(params.isd, params.env)
    rng = np.random.default_rng([seed, 0])
    n_c = layout.n_cells
    gue_xy = np.vstack([_sample_in_sector(layout, c, params.gue_per_cell, rng, 35.0)
                        for c in range(n_c)])
    gue = np.column_stack([gue_xy, np.full(len(gue_xy), 1.5)])
    sites = np.column_stack([layout.sites, np.full(layout.n_sites, layout.bs_height)])
    cs = layout.cell_site
    su = ch.AntennaConfig()

    def bs_gain(pos):
        return ch.cell_gain_dbi(layout, pos, su, params.bs_antenna)

    d2d, d3d, _ = wrap_distance(sites[:, None, :], gue[None, :, :], layout)
    los_s, loss_s = _link("bs-gue", d2d, d3d, np.full(d2d.shape, 1.5), params, rng,
                          h_bs=layout.bs_height)
    loss_gb = loss_s[cs].T
    gain_gb = bs_gain(gue) - loss_gb
    gue_cell = np.argmax(gain_gb, axis=1)

    prng = np.random.default_rng([seed, 1])
    pairs = place_pairs(layout, params.pair_density_per_km2, params.r_mean,
                        params.r_trunc_factor * params.r_mean, params.uav_height, prng)
    h = params.uav_height
    tx = np.column_stack([pairs.tx_xy, np.full(len(pairs), h)])
    rx = np.column_stack([pairs.rx_xy, np.full(len(pairs), h)])
    lrng = np.random.default_rng([seed, 2])
    d2d, d3d, _ = wrap_distance(sites[:, None, :], tx[None, :, :], layout)
    los_ub, loss_ub = _link("bs-uav", d2d, d3d, np.full(d2d.shape, h), params, lrng,
                            h_bs=layout.bs_height)
    g_ub = db2lin(bs_gain(tx) - loss_ub[cs].T) if len(pairs) else np.zeros((0, n_c))
    d2d, d3d, _ = wrap_distance(rx[:, None, :], tx[None, :, :], layout)
    d2d = np.where(np.eye(len(pairs), dtype=bool), pairs.distance[:, None], d2d)
    d3d = np.maximum(d2d, 1.0)
    los_uu, loss_uu = _link("uav-uav", d2d, d3d, np.full(d2d.shape, h), params, lrng)
    d2d, d3d, _ = wrap_distance(gue[:, None, :], rx[None, :, :], layout)
    los_gr, loss_gr = _link("gue-uav", d2d, d3d, np.full(d2d.shape, h), params, lrng)
    return _Geometry(
        layout=layout, gue_pos=gue, gue_cell=gue_cell, g_gue_bs=db2lin(gain_gb),
        xi_gue=loss_gb[np.arange(len(gue)), gue_cell], los_gue_bs=los_s[cs].T,
        pairs=pairs, g_uav_bs=g_ub, los_uav_bs=los_ub[cs].T if len(pairs) else np.zeros((0, n_c), bool),
        g_uu=db2lin(-loss_uu), los_uu=los_uu, g_gue_rx=db2lin(-loss_gr), los_gue_rx=los_gr,
        xi_pair=np.diag(loss_uu).copy(),
    )


def u2u_drop(params: U2uParams, sharing: SharingConfig, pc_uav: PowerControlParams,
             pc_gue: PowerControlParams, seed: int, *, with_u2u: bool = True) -> dict[str, np.ndarray]:
    """Per-PRB SINRs (dB) and rates for one drop.

    Randomness is split into independent streams (GUE drop, pairs, links,
    scheduling, fading), so changing power-control or sharing parameters
    keeps every other draw fixed.
    """
    geo = _geometry(params, seed)
    n_c = geo.layout.n_cells
    n_p = len(geo.pairs) if with_u2u else 0
    srng = np.random.default_rng([seed, 3])
    # one GUE per PRB per cell
    members = [np.flatnonzero(geo.gue_cell == c) for c in range(n_c)]
    pick = np.full((n_c, params.n_prb), -1)
    for c, mem in enumerate(members):
        if len(mem):
            pick[c] = srng.choice(mem, params.n_prb, replace=len(mem) < params.n_prb)
    gue_on, pair_on = assign_prbs(sharing, params.n_prb, len(geo.pairs), np.random.default_rng([seed, 4]))
    if sharing.mode == "overlay" and (gue_on & pair_on.any(axis=0)).any():
        raise NumericalError("overlay tiers share a PRB")
    pair_on = pair_on[:n_p]
    n_uav_prb = max(int(pair_on[0].sum()), 1) if n_p else 1

    p_gue = db2lin(tx_power_per_prb_dbm(
        PowerControlParams(pc_gue.p_max_dbm, pc_gue.p_ref_dbm, pc_gue.epsilon, 1), geo.xi_gue))
    p_uav = db2lin(tx_power_per_prb_dbm(
        PowerControlParams(pc_uav.p_max_dbm, pc_uav.p_ref_dbm, pc_uav.epsilon, n_uav_prb),
        geo.xi_pair[:n_p])) if n_p else np.zeros(0)

    noise_bs = db2lin(noise_dbm(PRB_HZ, params.bs_noise_figure_db))
    noise_ue = db2lin(noise_dbm(PRB_HZ, params.ue_noise_figure_db))
    frng = np.random.default_rng([seed, 5])
    k = params.k_factor_db
    gue_sinr, u2u_sinr = [], []
    u2u_rate = np.zeros(n_p)
    all_p = len(geo.pairs)
    for b in range(params.n_prb):
        # draw fading for the full pair population so results do not depend on with_u2u
        f_gb = _fading_power(frng, geo.los_gue_bs[pick[:, b]], k, (n_c, n_c))
        f_ub = _fading_power(frng, geo.los_uav_bs, k, (all_p, n_c))
        f_uu = _fading_power(frng, geo.los_uu, k, (all_p, all_p))
        f_gr = _fading_power(frng, geo.los_gue_rx[pick[:, b]], k, (n_c, all_p))
        act_g = gue_on[b] & (pick[:, b] >= 0)
        act_u = pair_on[:, b] if n_p else np.zeros(0, dtype=bool)
        if gue_on[b]:
            g = pick[:, b]
            rx_gb = (p_gue[g] * act_g)[:, None] * geo.g_gue_bs[g] * f_gb  # (C tx, C rx)
            tot = rx_gb.sum(axis=0)
            if n_p:
                tot = tot + ((p_uav * act_u)[:, None] * geo.g_uav_bs[:n_p] * f_ub[:n_p]).sum(axis=0)
            sig = rx_gb[np.arange(n_c), geo.gue_cell[g]]
            serv_int = tot[geo.gue_cell[g]] - sig
            gue_sinr.append(sinr_db(sig, serv_int, noise_bs)[act_g])
        if n_p and act_u.any():
            rx_uu = (p_uav * act_u)[None, :] * geo.g_uu[:n_p, :n_p] * f_uu[:n_p, :n_p]
            sig = np.diag(rx_uu).copy()
            interf = rx_uu.sum(axis=1) - sig
            if gue_on[b]:
                g = pick[:, b]
                interf = interf + ((p_gue[g] * act_g)[:, None] * geo.g_gue_rx[g][:, :n_p]
                                   * f_gr[:, :n_p]).sum(axis=0)
            s = sinr_db(sig, interf, noise_ue)[act_u]
            u2u_sinr.append(s)
            u2u_rate[act_u] += rate_bps(s, PRB_HZ)
    gue_sinr = np.concatenate(gue_sinr) if gue_sinr else np.zeros(0)
    return {
        "gue_sinr_db": gue_sinr,
        "u2u_sinr_db": np.concatenate(u2u_sinr) if u2u_sinr else np.zeros(0),
        "gue_rate_bps": rate_bps(gue_sinr, PRB_HZ),
        "u2u_rate_bps": u2u_rate,
    }


@dataclass(frozen=True)
class CoexistenceResult:
    gue_sinr: CdfSummary
    u2u_sinr: CdfSummary
    gue_rate: CdfSummary
    u2u_rate: CdfSummary
    threshold_db: float

    @property
    def gue_coverage(self) -> float:
        return 1.0 - float(self.gue_sinr.cdf(np.nextafter(self.threshold_db, -np.inf)))

    @property
    def u2u_coverage(self) -> float:
        return 1.0 - float(self.u2u_sinr.cdf(np.nextafter(self.threshold_db, -np.inf)))


def coexistence_sinr(params: U2uParams, sharing: SharingConfig, pc_uav: PowerControlParams,
                     pc_gue: PowerControlParams, seeds, *, with_u2u: bool = True) -> CoexistenceResult:
    """GUE uplink and U2U per-PRB SINR distributions over the given drops."""
    rows = [u2u_drop(params, sharing, pc_uav, pc_gue, s, with_u2u=with_u2u) for s in seeds]
    return merge_u2u_drops(rows, params.coverage_threshold_db)


def merge_u2u_drops(rows, threshold_db: float = 0.0) -> CoexistenceResult:
    """Pool per-drop outputs of :func:`u2u_drop` in the given order."""
    rows = list(rows)
    cat = {k: np.concatenate([r[k] for r in rows]) for k in rows[0]} if rows else {}
    return CoexistenceResult(
        gue_sinr=CdfSummary(cat.get("gue_sinr_db", [])),
        u2u_sinr=CdfSummary(cat.get("u2u_sinr_db", [])),
        gue_rate=CdfSummary(cat.get("gue_rate_bps", [])),
        u2u_rate=CdfSummary(cat.get("u2u_rate_bps", [])),
        threshold_db=threshold_db,
    )


def epsilon_sweep(params: U2uParams, epsilons, seeds, sharing: SharingConfig | None = None,
                  epsilon_gue: float = 0.6) -> list[tuple[float, float, float]]:
    """(epsilon_uav, gue_coverage, u2u_coverage) on common drops."""
    sharing = sharing or SharingConfig()
    out = []
    for e in epsilons:
        r = coexistence_sinr(params, sharing, default_power(e), default_power(epsilon_gue), seeds)
        out.append((float(e), r.gue_coverage, r.u2u_coverage))
    return out


def rate_comparison(params: U2uParams, configs, seeds, epsilon_gue: float = 0.6):
    """5%-worst rates per tier for each ``(label, SharingConfig, epsilon_uav)``."""
    out = []
    for label, sharing, eps in configs:
        r = coexistence_sinr(params, sharing, default_power(eps), default_power(epsilon_gue), seeds)
        gue_p5 = r.gue_rate.percentile(0.05) if r.gue_rate.count else 0.0
        u2u_p5 = r.u2u_rate.percentile(0.05) if r.u2u_rate.count else 0.0
        out.append((label, "GUE", gue_p5))
        out.append((label, "U2U", u2u_p5))
    return out


# --------------------------------------------------------------------------
# mmWave wobbling link
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class WobbleConfig:
    n_antennas: int = 16
    delta_max_deg: float = 2.0
    fc_hz: float = 60e9
    link_distance_m: float = 500.0
    bandwidth_hz: float = 1e9

    def __post_init__(self):
        if self.n_antennas < 1:
            raise ConfigError("n_antennas must be >= 1")
        if self.delta_max_deg < 0:
            raise ConfigError("delta_max must be non-negative")


def ula_gain(n: int, delta_deg) -> np.ndarray:
    """Broadside-steered half-wavelength ULA power gain at misalignment ``delta``.

    Equals ``n`` when aligned and 1 for a single element.
    """
    psi = np.pi * np.sin(np.deg2rad(np.asarray(delta_deg, dtype=float)))
    idx = np.arange(n)
    af = np.exp(1j * np.multiply.outer(psi, idx)).sum(axis=-1)
    return np.abs(af) ** 2 / n


def wobble_snr0_db(cfg: WobbleConfig, tx_power_dbm: float = 23.0,
                   noise_figure_db: float = 10.0) -> float:
    """Single-element SNR over the free-space link."""
    return float(tx_power_dbm - ch.fspl_db(cfg.link_distance_m, cfg.fc_hz)
                 - noise_dbm(cfg.bandwidth_hz, noise_figure_db))


def wobble_spectral_efficiency(cfg: WobbleConfig, tx_power_dbm: float = 23.0,
                               noise_figure_db: float = 10.0, n_samples: int = 20000,
                               rng: np.random.Generator | None = None) -> float:
    """Mean log2(1 + SNR0 G(d1) G(d2)) with both arrays wobbling independently."""
    rng = rng if rng is not None else np.random.default_rng(0)
    snr0 = db2lin(wobble_snr0_db(cfg, tx_power_dbm, noise_figure_db))
    d1 = rng.uniform(0.0, cfg.delta_max_deg, n_samples)
    d2 = rng.uniform(0.0, cfg.delta_max_deg, n_samples)
    g = ula_gain(cfg.n_antennas, d1) * ula_gain(cfg.n_antennas, d2)
    return float(np.mean(np.log2(1.0 + snr0 * g)))
