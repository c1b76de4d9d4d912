"""Deployments, user drops and the master simulation configuration.

Two deployment kinds are supported:

* ``hex``: the usual 19-site hexagonal grid with three sectors per site and
  wraparound through the 7-cluster translation set.
* ``square``: BSs uniformly dropped over a square whose area matches the
  hexagonal site density ``1 / (ISD^2 * sqrt(3) / 2)``, with toroidal
  wraparound. Sites can be omni (one cell each) or three-sectored.

Positions are 2-D (metres); heights are carried separately. Azimuths are in
degrees, counter-clockwise from the +x axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .exceptions import ConfigError

Environment = Literal["UMa", "UMi"]

BS_HEIGHT_M = {"UMa": 25.0, "UMi": 10.0}
MIN_D2D_M = {"UMa": 35.0, "UMi": 10.0}
SECTOR_AZIMUTHS_DEG = (30.0, 150.0, 270.0)
PRB_BANDWIDTH_HZ = 180e3

_SQRT3 = np.sqrt(3.0)


@dataclass(frozen=True)
class NetworkLayout:
    sites: np.ndarray  # (n_sites, 2)
    sectors_per_site: int
    sector_azimuths: np.ndarray  # (n_sites, sectors_per_site), degrees
    bs_height: float
    isd: float
    env: str
    wraparound: bool = True
    kind: str = "hex"
    shifts: np.ndarray = field(default=None, repr=False)  # (n_images, 2), first row zero
    side: float | None = None  # square kind only

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def n_cells(self) -> int:
        return self.n_sites * self.sectors_per_site

    @property
    def cell_site(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_sites), self.sectors_per_site)

    @property
    def cell_xy(self) -> np.ndarray:
        return self.sites[self.cell_site]

    @property
    def cell_azimuth(self) -> np.ndarray:
        return self.sector_azimuths.reshape(-1)

    @property
    def area_m2(self) -> float:
        if self.kind == "square":
            return float(self.side ** 2)
        return self.n_sites * self.isd ** 2 * _SQRT3 / 2.0

    def min_image(self, delta: np.ndarray) -> np.ndarray:
        """Shortest wraparound image of displacement vectors ``delta[..., 2]``."""
        delta = np.asarray(delta, dtype=float)
        if not self.wraparound:
            return delta
        cand = delta[..., None, :] + self.shifts  # (..., n_images, 2)
        d2 = np.einsum("...ij,...ij->...i", cand, cand)
        idx = np.argmin(d2, axis=-1)
        return np.take_along_axis(cand, idx[..., None, None], axis=-2)[..., 0, :]

    def fold(self, xy: np.ndarray) -> np.ndarray:
        """Map positions back into the simulated region."""
        xy = np.asarray(xy, dtype=float)
        if not self.wraparound:
            return xy
        if self.kind == "square":
            return np.mod(xy, self.side)
        flat = xy.reshape(-1, 2)
        out = flat.copy()
        images = np.vstack([self.shifts, (self.shifts[1:, None, :] + self.shifts[None, 1:, :])
                            .reshape(-1, 2)])
        todo = ~self.contains(out)
        for s in images:
            if not todo.any():
                break
            cand = flat[todo] - s
            ok = self.contains(cand)
            idx = np.flatnonzero(todo)[ok]
            out[idx] = cand[ok]
            todo[idx] = False
        return out.reshape(xy.shape)

    def contains(self, xy: np.ndarray) -> np.ndarray:
        """Whether points lie in the simulated region (no wraparound applied)."""
        xy = np.asarray(xy, dtype=float)
        if self.kind == "square":
            return np.all((xy >= 0) & (xy <= self.side), axis=-1)
        return _in_site_hexagon(xy[..., None, :] - self.sites, self.isd).any(axis=-1)


def _hex_shifts(isd: float) -> np.ndarray:
    # 19-site cluster translation (3 a1 + 2 a2) and its rotations by 60 deg
    base = isd * np.array([4.0, _SQRT3])
    rot = [np.deg2rad(60.0 * k) for k in range(6)]
    vecs = [np.array([[np.cos(r), -np.sin(r)], [np.sin(r), np.cos(r)]]) @ base for r in rot]
    return np.vstack([np.zeros(2)] + vecs)


def _in_site_hexagon(rel: np.ndarray, isd: float) -> np.ndarray:
    """Point-in-hexagon test for the Voronoi cell of a site (inradius isd/2)."""
    out = np.ones(rel.shape[:-1], dtype=bool)
    for ang in (0.0, 60.0, 120.0):
        u = np.array([np.cos(np.deg2rad(ang)), np.sin(np.deg2rad(ang))])
        out &= np.abs(rel @ u) <= isd / 2.0 + 1e-9
    return out


def build_hex_layout(isd: float, env: str = "UMa", *, wraparound: bool = True,
                     bs_height: float | None = None) -> NetworkLayout:
    """19-site, 57-sector hexagonal layout centred at the origin."""
    if not isd > 0:
        raise ConfigError(f"isd must be positive, got {isd}")
    if env not in BS_HEIGHT_M:
        raise ConfigError(f"unknown environment {env!r}")
    sites = []
    for q in range(-2, 3):
        for r in range(-2, 3):
            if abs(q + r) <= 2:
                sites.append((q + r / 2.0, r * _SQRT3 / 2.0))
    sites = np.array(sites) * isd
    order = np.lexsort((np.arctan2(sites[:, 1], sites[:, 0]), np.round(np.hypot(*sites.T), 6)))
    sites = sites[order]
    az = np.tile(np.array(SECTOR_AZIMUTHS_DEG), (len(sites), 1))
    return NetworkLayout(
        sites=sites, sectors_per_site=3, sector_azimuths=az,
        bs_height=BS_HEIGHT_M[env] if bs_height is None else bs_height,
        isd=isd, env=env, wraparound=wraparound, kind="hex",
        shifts=_hex_shifts(isd),
    )


def build_random_layout(n_sites: int, isd: float, env: str, rng: np.random.Generator, *,
                        sectorized: bool = False, bs_height: float | None = None) -> NetworkLayout:
    """Binomial point process of ``n_sites`` BSs at the density of a hex grid of ``isd``."""
    if n_sites < 1:
        raise ConfigError("random layout needs at least one site")
    if not isd > 0:
        raise ConfigError(f"isd must be positive, got {isd}")
    if env not in BS_HEIGHT_M:
        raise ConfigError(f"unknown environment {env!r}")
    side = float(np.sqrt(n_sites * isd ** 2 * _SQRT3 / 2.0))
    sites = rng.uniform(0.0, side, size=(n_sites, 2))
    if sectorized:
        az = np.tile(np.array(SECTOR_AZIMUTHS_DEG), (n_sites, 1))
    else:
        az = np.zeros((n_sites, 1))
    shifts = np.array([(i * side, j * side) for i in (0, -1, 1) for j in (0, -1, 1)])
    return NetworkLayout(
        sites=sites, sectors_per_site=az.shape[1], sector_azimuths=az,
        bs_height=BS_HEIGHT_M[env] if bs_height is None else bs_height,
        isd=isd, env=env, wraparound=True, kind="square", shifts=shifts, side=side,
    )


def wrap_distance(a, b, layout: NetworkLayout):
    """Minimum-image distances between 3-D points ``a`` and ``b``.

    ``a`` and ``b`` are ``(..., 3)`` arrays of (x, y, height). Returns
    ``(d2d, d3d, bearing)`` with the bearing of ``b`` seen from ``a`` in
    degrees.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    delta = layout.min_image(b[..., :2] - a[..., :2])
    d2d = np.hypot(delta[..., 0], delta[..., 1])
    dh = b[..., 2] - a[..., 2]
    d3d = np.sqrt(d2d ** 2 + dh ** 2)
    bearing = np.rad2deg(np.arctan2(delta[..., 1], delta[..., 0]))
    return d2d, d3d, bearing


@dataclass(frozen=True)
class DensitySpec:
    """How many users to drop.

    Either per-sector counts (hex layouts) or densities in users per km^2.
    """

    gue_per_sector: int | None = None
    uav_per_sector: int | None = None
    gue_per_km2: float | None = None
    uav_per_km2: float | None = None
    uav_height: tuple[float, float] = (1.5, 300.0)
    gue_height: float = 1.5
    poisson: bool = False  # densities: Poisson counts instead of rounded means


@dataclass(frozen=True)
class UserDrop:
    gue_xy: np.ndarray
    gue_h: np.ndarray
    uav_xy: np.ndarray
    uav_h: np.ndarray
    seed: int
    gue_sector: np.ndarray | None = None
    uav_sector: np.ndarray | None = None

    @property
    def n_gue(self) -> int:
        return len(self.gue_xy)

    @property
    def n_uav(self) -> int:
        return len(self.uav_xy)

    def positions(self, kind: str) -> np.ndarray:
        """(n, 3) array of x, y, height for ``"gue"`` or ``"uav"``."""
        if kind == "gue":
            return np.column_stack([self.gue_xy, self.gue_h])
        if kind == "uav":
            return np.column_stack([self.uav_xy, self.uav_h])
        raise ValueError(kind)


def _sample_in_sector(layout: NetworkLayout, cell: int, n: int, rng, min_d2d: float) -> np.ndarray:
    site = layout.cell_site[cell]
    centre = layout.sites[site]
    az = layout.cell_azimuth[cell]
    half = 180.0 / layout.sectors_per_site
    r = layout.isd / _SQRT3
    out = np.empty((0, 2))
    while len(out) < n:
        m = max(8, 3 * (n - len(out)))
        rel = rng.uniform(-r, r, size=(m, 2))
        ok = _in_site_hexagon(rel, layout.isd) & (np.hypot(*rel.T) >= min_d2d)
        if layout.sectors_per_site > 1:
            bearing = np.rad2deg(np.arctan2(rel[:, 1], rel[:, 0]))
            off = (bearing - az + 180.0) % 360.0 - 180.0
            ok &= np.abs(off) < half
        out = np.vstack([out, rel[ok]])
    return centre + out[:n]


def _sample_uniform(layout: NetworkLayout, n: int, rng, min_d2d: float) -> np.ndarray:
    if layout.kind == "square":
        out = np.empty((0, 2))
        while len(out) < n:
            m = max(8, 2 * (n - len(out)))
            xy = rng.uniform(0.0, layout.side, size=(m, 2))
            delta = layout.min_image(layout.sites[None, :, :] - xy[:, None, :])
            ok = np.hypot(delta[..., 0], delta[..., 1]).min(axis=1) >= min_d2d
            out = np.vstack([out, xy[ok]])
        return out[:n]
    cells = rng.integers(0, layout.n_sites, size=n)
    out = np.empty((n, 2))
    for s in np.unique(cells):
        idx = np.flatnonzero(cells == s)
        # omni sampling within the whole site hexagon
        rel = _sample_in_sector(
            NetworkLayout(layout.sites[s:s + 1], 1, np.zeros((1, 1)), layout.bs_height,
                          layout.isd, layout.env, False, "hex", layout.shifts),
            0, len(idx), rng, min_d2d)
        out[idx] = rel
    return out


def _count(per_km2, area_m2, rng, poisson):
    if per_km2 is None or per_km2 <= 0:
        return 0
    mean = per_km2 * area_m2 / 1e6
    return int(rng.poisson(mean)) if poisson else int(round(mean))


def drop_users(layout: NetworkLayout, density: DensitySpec, seed: int,
               min_d2d: float | None = None) -> UserDrop:
    """Drop GUEs and UAVs uniformly over the layout's region.

    Deterministic given ``seed``.
    """
    if layout.n_sites == 0:
        raise ConfigError("cannot drop users on an empty layout")
    for v in (density.gue_per_sector, density.uav_per_sector, density.gue_per_km2,
              density.uav_per_km2):
        if v is not None and v < 0:
            raise ConfigError("user counts and densities must be non-negative")
    h_lo, h_hi = density.uav_height
    if h_lo > h_hi:
        raise ConfigError("uav_height range is inverted")
    rng = np.random.default_rng(seed)
    if min_d2d is None:
        min_d2d = MIN_D2D_M.get(layout.env, 0.0)

    def per_sector(count):
        xy, sec = [], []
        for c in range(layout.n_cells):
            xy.append(_sample_in_sector(layout, c, count, rng, min_d2d))
            sec.append(np.full(count, c))
        if not xy:
            return np.empty((0, 2)), np.empty(0, dtype=int)
        return np.vstack(xy), np.concatenate(sec)

    if density.gue_per_sector is not None:
        gue_xy, gue_sec = per_sector(density.gue_per_sector)
    else:
        gue_xy = _sample_uniform(layout, _count(density.gue_per_km2, layout.area_m2, rng,
                                                density.poisson), rng, min_d2d)
        gue_sec = None
    if density.uav_per_sector is not None:
        uav_xy, uav_sec = per_sector(density.uav_per_sector)
    else:
        uav_xy = _sample_uniform(layout, _count(density.uav_per_km2, layout.area_m2, rng,
                                                density.poisson), rng, min_d2d)
        uav_sec = None
    uav_h = rng.uniform(h_lo, h_hi, size=len(uav_xy)) if h_hi > h_lo else np.full(len(uav_xy), h_lo)
    gue_h = np.full(len(gue_xy), density.gue_height)
    return UserDrop(gue_xy=gue_xy, gue_h=gue_h, uav_xy=uav_xy, uav_h=uav_h, seed=seed,
                    gue_sector=gue_sec, uav_sector=uav_sec)


@dataclass(frozen=True)
class SimConfig:
    carrier_hz: float = 2e9
    bandwidth_hz: float = 20e6
    n_prb: int = 100
    duplex: str = "TDD"
    environment: str = "UMa"
    drops: int = 100
    master_seed: int = 0
    noise_figure_db: float = 9.0
    numerology: int = 0

    def __post_init__(self):
        if self.duplex != "TDD":
            raise ConfigError("only TDD operation is modelled")
        if self.environment not in BS_HEIGHT_M:
            raise ConfigError(f"unknown environment {self.environment!r}")
        if self.n_prb < 1 or self.bandwidth_hz <= 0:
            raise ConfigError("bandwidth and PRB count must be positive")

    @property
    def prb_bandwidth_hz(self) -> float:
        """12 subcarriers at 15 kHz * 2**numerology."""
        return PRB_BANDWIDTH_HZ * 2 ** self.numerology


def drop_seeds(master_seed: int, n: int) -> list[int]:
    """Independent per-drop seeds derived from the master seed by drop index."""
    ss = np.random.SeedSequence(master_seed)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in ss.spawn(n)]
