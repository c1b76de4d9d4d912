"""Large- and small-scale channel models and BS antenna patterns.

Aerial links follow the UMa-AV / UMi-AV models of 3GPP TR 36.777 (Annex B)
for UAV heights above 22.5 m; below that, and for ground links, the
terrestrial UMa / UMi models of TR 38.901 apply. All pathloss values are
floored at free-space loss.

Link kinds
----------
``"bs-uav"``  BS to aerial UE (height-dependent aerial model)
``"bs-gue"``  BS to ground UE (38.901 terrestrial model)
``"uav-uav"`` sidelink between two UAVs: LoS probability of the aerial
              model evaluated at the lower UAV's height, free-space LoS loss
``"gue-uav"`` ground UE to UAV: aerial model with the UAV height

Carrier frequencies are in Hz at the API; the 3GPP formulas use GHz.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError

LINK_KINDS = ("bs-uav", "bs-gue", "uav-uav", "gue-uav")
ENVIRONMENTS = ("UMa", "UMi")
AERIAL_MIN_HEIGHT_M = 22.5
SPEED_OF_LIGHT = 299_792_458.0
DEFAULT_K_FACTOR_DB = 15.0


def _check(link_kind, env):
    if link_kind not in LINK_KINDS:
        raise ConfigError(f"unsupported link kind {link_kind!r}")
    if env not in ENVIRONMENTS:
        raise ConfigError(f"unsupported environment {env!r}")


def fspl_db(d3d, fc_hz):
    """Free-space pathloss ``20 log10(4 pi d fc / c)``."""
    d3d = np.asarray(d3d, dtype=float)
    return 20.0 * np.log10(4.0 * np.pi * d3d * fc_hz / SPEED_OF_LIGHT)


# --------------------------------------------------------------------------
# LoS probability
# --------------------------------------------------------------------------

def _los_terrestrial(d2d, h_ut, env):
    d2d = np.maximum(d2d, 1e-9)
    near = d2d <= 18.0
    if env == "UMa":
        base = 18.0 / d2d + np.exp(-d2d / 63.0) * (1.0 - 18.0 / d2d)
        c = np.where(h_ut <= 13.0, 0.0, ((np.clip(h_ut, 13.0, 23.0) - 13.0) / 10.0) ** 1.5)
        p = base * (1.0 + c * 1.25 * (d2d / 100.0) ** 3 * np.exp(-d2d / 150.0))
    else:
        p = 18.0 / d2d + np.exp(-d2d / 36.0) * (1.0 - 18.0 / d2d)
    return np.where(near, 1.0, np.clip(p, 0.0, 1.0))


def _los_aerial(d2d, h_ut, env):
    h = np.maximum(h_ut, AERIAL_MIN_HEIGHT_M)
    lh = np.log10(h)
    if env == "UMa":
        p1 = 4300.0 * lh - 3800.0
        d1 = np.maximum(460.0 * lh - 700.0, 18.0)
    else:
        p1 = 233.98 * lh - 0.95
        d1 = np.maximum(294.05 * lh - 432.94, 18.0)
    dd = np.maximum(d2d, 1e-9)
    p = d1 / dd + np.exp(-dd / p1) * (1.0 - d1 / dd)
    p = np.where(d2d <= d1, 1.0, p)
    if env == "UMa":
        p = np.where(h_ut > 100.0, 1.0, p)
    return np.clip(p, 0.0, 1.0)


def los_probability(link_kind: str, d2d, h_ut, env: str = "UMa"):
    """LoS probability of a link.

    ``h_ut`` is the UE height; for ``"uav-uav"`` pass the lower UAV height.
    """
    _check(link_kind, env)
    d2d = np.asarray(d2d, dtype=float)
    h_ut = np.asarray(h_ut, dtype=float)
    if np.any(d2d < 0) or np.any(h_ut < 0):
        raise ValueError("d2d and h_ut must be non-negative")
    if link_kind == "bs-gue":
        return _los_terrestrial(d2d, h_ut, env)
    aerial = h_ut > AERIAL_MIN_HEIGHT_M
    return np.where(aerial, _los_aerial(d2d, h_ut, env), _los_terrestrial(d2d, h_ut, env))


# --------------------------------------------------------------------------
# Pathloss and shadowing
# --------------------------------------------------------------------------

def _pl_terrestrial(d3d, d2d, h_ut, h_bs, fc_ghz, los, env):
    he = 1.0
    d_bp = 4.0 * (h_bs - he) * np.maximum(h_ut - he, 0.1) * fc_ghz * 1e9 / SPEED_OF_LIGHT
    lf = 20.0 * np.log10(fc_ghz)
    if env == "UMa":
        pl1 = 28.0 + 22.0 * np.log10(d3d) + lf
        pl2 = 28.0 + 40.0 * np.log10(d3d) + lf - 9.0 * np.log10(d_bp ** 2 + (h_bs - h_ut) ** 2)
        pl_los = np.where(d2d <= d_bp, pl1, pl2)
        pl_nlos = 13.54 + 39.08 * np.log10(d3d) + lf - 0.6 * (h_ut - 1.5)
    else:
        pl1 = 32.4 + 21.0 * np.log10(d3d) + lf
        pl2 = 32.4 + 40.0 * np.log10(d3d) + lf - 9.5 * np.log10(d_bp ** 2 + (h_bs - h_ut) ** 2)
        pl_los = np.where(d2d <= d_bp, pl1, pl2)
        pl_nlos = 22.4 + 35.3 * np.log10(d3d) + 21.3 * np.log10(fc_ghz) - 0.3 * (h_ut - 1.5)
    return np.where(los, pl_los, np.maximum(pl_los, pl_nlos))


def _pl_aerial(d3d, h_ut, fc_ghz, los, env):
    lh = np.log10(np.maximum(h_ut, AERIAL_MIN_HEIGHT_M))
    lf = 20.0 * np.log10(fc_ghz)
    ld = np.log10(d3d)
    if env == "UMa":
        pl_los = 28.0 + 22.0 * ld + lf
        pl_nlos = -17.5 + (46.0 - 7.0 * lh) * ld + 20.0 * np.log10(40.0 * np.pi * fc_ghz / 3.0)
    else:
        pl_los = 30.9 + (22.25 - 0.5 * lh) * ld + lf
        pl_nlos = 32.4 + (43.2 - 7.6 * lh) * ld + lf
    return np.where(los, pl_los, np.maximum(pl_los, pl_nlos))


def elevation_los_probability(elevation_deg, a: float = 9.61, b: float = 0.16):
    """Sigmoid LoS probability of a ground-to-air link versus elevation angle.

    Urban fit (``a = 9.61``, ``b = 0.16``) of the ITU-R building statistics
    model. Suited to links whose low end is a ground UE, where clutter
    around the UE governs blockage.
    """
    e = np.asarray(elevation_deg, dtype=float)
    return 1.0 / (1.0 + a * np.exp(-b * (e - a)))


def pathloss_db(link_kind: str, d3d, h_ut, fc_hz: float, los, env: str = "UMa", *,
                d2d=None, h_bs: float | None = None):
    """Pathloss in dB, never below free-space loss at the same distance.

    Parameters
    ----------
    link_kind : str
        One of :data:`LINK_KINDS`.
    d3d : array_like
        3-D distance in metres (strictly positive).
    h_ut : array_like
        UE height (lower UAV height for ``"uav-uav"``).
    fc_hz : float
        Carrier frequency.
    los : array_like of bool
        Link state.
    env : str
        ``"UMa"`` or ``"UMi"``.
    d2d, h_bs : optional
        Needed by the terrestrial breakpoint model; derived from ``d3d`` and
        the environment's default BS height when omitted.
    """
    _check(link_kind, env)
    d3d = np.asarray(d3d, dtype=float)
    if np.any(d3d <= 0):
        raise ValueError("d3d must be strictly positive")
    h_ut = np.asarray(h_ut, dtype=float)
    los = np.asarray(los, dtype=bool)
    fc_ghz = fc_hz / 1e9
    if h_bs is None:
        h_bs = 25.0 if env == "UMa" else 10.0
    if d2d is None:
        d2d = np.sqrt(np.maximum(d3d ** 2 - (h_bs - h_ut) ** 2, 0.0))
    fs = fspl_db(d3d, fc_hz)
    terrestrial = _pl_terrestrial(d3d, np.asarray(d2d, dtype=float), h_ut, h_bs, fc_ghz, los, env)
    if link_kind == "bs-gue":
        pl = terrestrial
    elif link_kind == "uav-uav":
        pl = np.where(los, fs, _pl_aerial(d3d, h_ut, fc_ghz, False, env))
    else:
        aerial = _pl_aerial(d3d, h_ut, fc_ghz, los, env)
        pl = np.where(h_ut > AERIAL_MIN_HEIGHT_M, aerial, terrestrial)
    return np.maximum(pl, fs)


def shadowing_std_db(link_kind: str, h_ut, los, env: str = "UMa"):
    """Log-normal shadowing standard deviation (dB)."""
    _check(link_kind, env)
    h_ut = np.asarray(h_ut, dtype=float)
    los = np.asarray(los, dtype=bool)
    if env == "UMa":
        terr = np.where(los, 4.0, 6.0)
        aer = np.where(los, 4.64 * np.exp(-0.0066 * h_ut), 6.0)
    else:
        terr = np.where(los, 4.0, 7.82)
        aer = np.where(los, np.maximum(5.0 * np.exp(-0.01 * h_ut), 2.0), 8.0)
    if link_kind == "bs-gue":
        return terr
    return np.where(h_ut > AERIAL_MIN_HEIGHT_M, aer, terr)


# --------------------------------------------------------------------------
# Antennas
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AntennaConfig:
    """Uniform rectangular panel of 38.901 elements.

    ``rows`` elements are stacked vertically and ``cols`` horizontally,
    ``spacing`` wavelengths apart. Cross-polarised panels are represented by
    a single polarisation with the same per-polarisation element count; no
    extra gain is credited for the second polarisation.
    """

    rows: int = 8
    cols: int = 1
    spacing: float = 0.5
    downtilt: float = 12.0
    max_element_gain: float = 8.0
    front_to_back: float = 30.0
    beamwidth: float = 65.0
    sla_v: float = 30.0
    polarization: str = "single"

    def __post_init__(self):
        if self.rows * self.cols < 1 or self.rows < 1 or self.cols < 1:
            raise ConfigError("antenna needs at least one element")
        if not self.spacing > 0:
            raise ConfigError("element spacing must be positive")
        if self.polarization not in ("single", "cross"):
            raise ConfigError(f"unknown polarization {self.polarization!r}")

    @property
    def n_elements(self) -> int:
        return self.rows * self.cols


def element_gain_dbi(theta, phi, cfg: AntennaConfig = AntennaConfig()):
    """38.901 element gain at local zenith ``theta`` and azimuth ``phi`` (degrees)."""
    theta = np.asarray(theta, dtype=float)
    phi = (np.asarray(phi, dtype=float) + 180.0) % 360.0 - 180.0
    a_v = -np.minimum(12.0 * ((theta - 90.0) / cfg.beamwidth) ** 2, cfg.sla_v)
    a_h = -np.minimum(12.0 * (phi / cfg.beamwidth) ** 2, cfg.front_to_back)
    return cfg.max_element_gain - np.minimum(-(a_v + a_h), cfg.front_to_back)


def direction_vector(azimuth_deg, elevation_deg):
    """Global unit vectors for azimuth (from +x, ccw) and elevation (above horizon)."""
    az = np.deg2rad(np.asarray(azimuth_deg, dtype=float))
    el = np.deg2rad(np.asarray(elevation_deg, dtype=float))
    return np.stack([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)], axis=-1)


def to_local(u, boresight_azimuth, downtilt):
    """Rotate global unit vectors into a panel frame.

    The panel's boresight is local +x, its columns run along local +y and
    its rows along local +z. ``downtilt`` is positive towards the ground.
    """
    u = np.asarray(u, dtype=float)
    a = np.deg2rad(np.asarray(boresight_azimuth, dtype=float))[..., None]
    b = np.deg2rad(np.asarray(downtilt, dtype=float))[..., None]
    x1 = u[..., 0:1] * np.cos(a) + u[..., 1:2] * np.sin(a)
    y1 = -u[..., 0:1] * np.sin(a) + u[..., 1:2] * np.cos(a)
    z1 = u[..., 2:3]
    x2 = x1 * np.cos(b) - z1 * np.sin(b)
    z2 = x1 * np.sin(b) + z1 * np.cos(b)
    return np.concatenate([x2, y1, z2], axis=-1)


def local_angles(u_local):
    """(zenith, azimuth) in degrees of local unit vectors."""
    u = np.asarray(u_local, dtype=float)
    theta = np.rad2deg(np.arccos(np.clip(u[..., 2], -1.0, 1.0)))
    phi = np.rad2deg(np.arctan2(u[..., 1], u[..., 0]))
    return theta, phi


def steering_vector(cfg: AntennaConfig, u_local):
    """Unit-magnitude array response for local direction vectors ``(..., 3)``.

    Element ``(m, n)`` (row ``m``, column ``n``) is ordered row-major.
    """
    u = np.asarray(u_local, dtype=float)
    m = np.arange(cfg.rows)
    n = np.arange(cfg.cols)
    phase = (m[:, None] * u[..., None, None, 2] + n[None, :] * u[..., None, None, 1])
    phase = 2.0 * np.pi * cfg.spacing * phase
    return np.exp(1j * phase).reshape(u.shape[:-1] + (cfg.n_elements,))


def array_response(cfg: AntennaConfig, theta, phi):
    """Unit-norm array response at local zenith/azimuth angles (degrees)."""
    t = np.deg2rad(np.asarray(theta, dtype=float))
    p = np.deg2rad(np.asarray(phi, dtype=float))
    u = np.stack([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)], axis=-1)
    return steering_vector(cfg, u) / np.sqrt(cfg.n_elements)


def composite_bs_gain_dbi(cfg: AntennaConfig, downtilt: float, azimuth: float, target_direction):
    """Element gain plus the array factor of the fixed downtilted beam.

    The panel is mechanically tilted by ``downtilt`` and uses equal
    (broadside) weights, so the beam peak sits on the tilted boresight where
    the gain equals ``max_element_gain + 10 log10(n_elements)``.

    ``target_direction`` is a ``(azimuth_deg, elevation_deg)`` pair (arrays
    allowed) in global coordinates.
    """
    az_t, el_t = target_direction
    u = to_local(direction_vector(az_t, el_t), azimuth, downtilt)
    theta, phi = local_angles(u)
    g_el = element_gain_dbi(theta, phi, cfg)
    a = steering_vector(cfg, u)
    af = np.abs(a.sum(axis=-1)) ** 2 / cfg.n_elements
    with np.errstate(divide="ignore"):
        return g_el + 10.0 * np.log10(af)


def cell_gain_dbi(layout, pos, cfg: AntennaConfig = AntennaConfig(), pattern: str = "composite"):
    """Gain (dBi) of every cell of ``layout`` towards 3-D points ``pos`` ``(n, 3)``.

    ``pattern`` is ``"composite"`` (equal-weight array of ``cfg``),
    ``"element"`` (single element) or ``"omni"`` (0 dBi). Returns ``(n, n_cells)``.
    """
    pos = np.asarray(pos, dtype=float)
    if pattern == "omni":
        return np.zeros((len(pos), layout.n_cells))
    if pattern not in ("composite", "element"):
        raise ConfigError(f"unknown antenna pattern {pattern!r}")
    delta = layout.min_image(pos[None, :, :2] - layout.sites[:, None, :])
    dz = np.broadcast_to(pos[None, :, 2:3] - layout.bs_height, delta.shape[:-1] + (1,))
    vec = np.concatenate([delta, dz], axis=-1)
    u = vec / np.linalg.norm(vec, axis=-1, keepdims=True)
    ul = to_local(u[layout.cell_site], layout.cell_azimuth[:, None], cfg.downtilt)
    th, ph = local_angles(ul)
    g = element_gain_dbi(th, ph, cfg)
    if pattern == "composite":
        af = np.abs(steering_vector(cfg, ul).sum(-1)) ** 2 / cfg.n_elements
        g = g + 10.0 * np.log10(np.maximum(af, 1e-30))
    return g.T


# --------------------------------------------------------------------------
# Link state and small-scale fading
# --------------------------------------------------------------------------

@dataclass
class LinkState:
    los: bool
    pathloss_db: float
    shadowing_db: float
    k_factor_db: float | None = None
    small_scale: np.ndarray | None = None

    @property
    def large_scale_loss_db(self) -> float:
        return self.pathloss_db + self.shadowing_db


def crandn(rng: np.random.Generator, size) -> np.ndarray:
    """CN(0, 1) samples."""
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2.0)


def small_scale(n_ant: int, rng: np.random.Generator, *, los=False, steering=None,
                k_factor_db: float = DEFAULT_K_FACTOR_DB, size=None):
    """Ricean (LoS) or Rayleigh (NLoS) channel vectors with unit per-element power.

    ``steering`` holds unit-magnitude LoS responses ``(..., n_ant)`` and is
    ignored for NLoS links. ``los`` broadcasts against ``size``. Returns an
    array of shape ``size + (n_ant,)``.
    """
    if n_ant < 1:
        raise ValueError("n_ant must be >= 1")
    size = () if size is None else (tuple(size) if np.iterable(size) else (int(size),))
    diffuse = crandn(rng, size + (n_ant,))
    los = np.asarray(los, dtype=bool)
    if not los.any():
        return diffuse
    if steering is None:
        raise ValueError("LoS links need a steering vector")
    if np.isinf(k_factor_db):
        a, b = 1.0, 0.0
    else:
        k = 10.0 ** (k_factor_db / 10.0)
        a, b = np.sqrt(k / (k + 1.0)), np.sqrt(1.0 / (k + 1.0))
    ricean = a * np.asarray(steering) + b * diffuse
    return np.where(los[..., None], ricean, diffuse)


def draw_link(link_kind: str, d3d: float, h_ut: float, fc_hz: float, env: str,
              rng: np.random.Generator, *, d2d: float | None = None, h_bs: float | None = None,
              n_ant: int = 1, steering=None, k_factor_db: float = DEFAULT_K_FACTOR_DB) -> LinkState:
    """Draw one link's LoS state, shadowing and small-scale vector."""
    if d2d is None:
        hb = h_bs if h_bs is not None else (25.0 if env == "UMa" else 10.0)
        d2d = float(np.sqrt(max(d3d ** 2 - (hb - h_ut) ** 2, 0.0)))
    los = bool(rng.random() < los_probability(link_kind, d2d, h_ut, env))
    pl = float(pathloss_db(link_kind, d3d, h_ut, fc_hz, los, env, d2d=d2d, h_bs=h_bs))
    sf = float(shadowing_std_db(link_kind, h_ut, los, env) * rng.standard_normal())
    if steering is None:
        steering = np.ones(n_ant, dtype=complex)
    h = small_scale(n_ant, rng, los=los, steering=steering, k_factor_db=k_factor_db)
    return LinkState(los=los, pathloss_db=pl, shadowing_db=sf,
                     k_factor_db=k_factor_db if los else None, small_scale=h)
