"""Multi-user massive MIMO downlink with ZF precoding, SRS pilot
contamination and UAV-aware null steering.

Channel convention: a user receives ``h^H w`` from precoder ``w``, so ZF
makes ``H^H W`` diagonal and a null towards direction ``a`` means
``a^H w = 0``. Uplink SRS observations see the same ``h`` (TDD reciprocity).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import channel as ch
from .exceptions import ConfigError
from .linklevel import db2lin, lin2db, noise_dbm
from .powerctrl import PowerControlParams, tx_power_per_prb_dbm
from .scenario import DensitySpec, build_hex_layout, drop_users, wrap_distance
from .stats import CdfSummary, fraction_above

MAX_MULTIPLEXED = 8
RIDGE = 1e-8
MODES = ("SU", "SU_aaUAV", "mMIMO", "mMIMO_aaUAV", "mMIMOnulls")


@dataclass(frozen=True)
class CsiMatrix:
    entries: np.ndarray  # (antennas, users)
    quality: str = "perfect"

    def __post_init__(self):
        if self.quality not in ("perfect", "srs_estimated"):
            raise ConfigError(f"unknown CSI quality {self.quality!r}")
        if self.entries.shape[1] > self.entries.shape[0]:
            raise ConfigError("more users than antennas")


@dataclass(frozen=True)
class SrsPlan:
    """SRS sequence per user.

    ``assignment[u]`` is the sequence index within the user's pool and
    ``pool[u]`` the reuse pool (sector index within the site). Users sharing
    both contaminate each other.
    """

    assignment: np.ndarray
    pool: np.ndarray | None = None
    n_sequences: int = 8
    reuse: int = 3

    def __post_init__(self):
        a = np.asarray(self.assignment)
        if np.any((a < 0) | (a >= self.n_sequences)):
            raise ConfigError("sequence index out of range")

    @property
    def group(self) -> np.ndarray:
        pool = np.zeros_like(self.assignment) if self.pool is None else np.asarray(self.pool)
        return pool * self.n_sequences + np.asarray(self.assignment)


@dataclass(frozen=True)
class PrecoderSet:
    W: np.ndarray  # (antennas, users), unit-norm columns
    powers: np.ndarray
    regularized: bool = False
    dropped_nulls: int = 0
    nulls: np.ndarray | None = field(default=None, repr=False)

    @property
    def total_power(self) -> float:
        return float(np.sum(self.powers * np.sum(np.abs(self.W) ** 2, axis=0)))


def _zf_directions(H: np.ndarray) -> tuple[np.ndarray, bool]:
    gram = np.conj(H.T) @ H
    regularized = np.linalg.cond(gram) > 1e12
    if regularized:
        gram = gram + RIDGE * np.real(np.trace(gram)) * np.eye(gram.shape[0])
    W = H @ np.linalg.inv(gram)
    return W / np.linalg.norm(W, axis=0, keepdims=True), bool(regularized)


def zf_precoders(H, total_power: float = 1.0) -> PrecoderSet:
    """Zero-forcing precoders with equal power per user.

    Near-singular Gram matrices get a ridge of ``1e-8 * trace`` and the
    result is flagged as regularized.
    """
    H = np.asarray(H.entries if isinstance(H, CsiMatrix) else H)
    k = H.shape[1]
    if k > H.shape[0]:
        raise ConfigError("ZF needs users <= antennas")
    W, reg = _zf_directions(H)
    return PrecoderSet(W, np.full(k, total_power / k), regularized=reg)


def null_steering_precoders(H_served, A_nulls, max_nulls: int = 16, total_power: float = 1.0,
                            strength=None, cond_limit: float = 1e8) -> PrecoderSet:
    """ZF over the served users plus null directions that get no power.

    Nulls are admitted strongest first (by ``strength``, or column order)
    while the augmented matrix stays well conditioned and within the
    antenna budget; the rest are dropped and counted.
    """
    H = np.asarray(H_served.entries if isinstance(H_served, CsiMatrix) else H_served)
    m, k = H.shape
    A = np.asarray(A_nulls).reshape(m, -1)
    order = np.arange(A.shape[1]) if strength is None else np.argsort(-np.asarray(strength),
                                                                       kind="stable")
    kept = []
    for i in order:
        if len(kept) >= max_nulls or k + len(kept) >= m + 1:
            break
        trial = np.column_stack([H] + [A[:, j] for j in kept + [i]])
        if np.linalg.cond(trial) < cond_limit:
            kept.append(i)
    aug = np.column_stack([H] + [A[:, j] for j in kept]) if kept else H
    W, reg = _zf_directions(aug)
    return PrecoderSet(W[:, :k], np.full(k, total_power / k), regularized=reg,
                       dropped_nulls=A.shape[1] - len(kept),
                       nulls=A[:, kept] if kept else np.empty((m, 0)))


def srs_estimate(H_true, plan: SrsPlan, srs_power, noise: float, rng: np.random.Generator, *,
                 beta=None, targets=None, projector=None) -> CsiMatrix:
    """Per-antenna MMSE channel estimates from one SRS observation.

    ``H_true`` is ``(antennas, users)`` for every user whose SRS reaches this
    BS. Each sequence group yields one observation
    ``y = sum_u sqrt(p_u) h_u + n``; user ``k`` is estimated as
    ``sqrt(p_k) beta_k / (sum_u p_u beta_u + noise) * y`` under a Rayleigh
    prior with per-antenna variance ``beta``. ``projector`` (antennas x
    antennas) is applied to the observation first, e.g. to suppress
    statistically known interferers.
    """
    H = np.asarray(H_true)
    m, u = H.shape
    p = np.asarray(srs_power, dtype=float) * np.ones(u)
    b = np.ones(u) if beta is None else np.asarray(beta, dtype=float)
    g = plan.group
    groups, inv = np.unique(g, return_inverse=True)
    onehot = (inv[:, None] == np.arange(len(groups))[None, :]).astype(float)
    Y = (H * np.sqrt(p)) @ onehot
    if noise > 0:
        Y = Y + np.sqrt(noise) * ch.crandn(rng, Y.shape)
    if projector is not None:
        Y = projector @ Y
    psi = (p * b) @ onehot + noise
    tgt = np.arange(u) if targets is None else np.asarray(targets)
    coef = np.sqrt(p[tgt]) * b[tgt] / psi[inv[tgt]]
    return CsiMatrix(coef * Y[:, inv[tgt]], "srs_estimated")


def orthogonal_projector(A) -> np.ndarray:
    """Projector onto the orthogonal complement of the columns of ``A``."""
    A = np.asarray(A)
    m = A.shape[0]
    if A.size == 0:
        return np.eye(m)
    q, r = np.linalg.qr(A)
    keep = np.abs(np.diag(r)) > 1e-10 * np.abs(r).max()
    q = q[:, keep]
    return np.eye(m) - q @ np.conj(q.T)


# --------------------------------------------------------------------------
# Study
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MmimoParams:
    isd: float = 500.0
    env: str = "UMa"
    gue_per_sector: int = 14
    uav_per_sector: int = 1
    uav_height: float = 300.0
    carrier_hz: float = 2e9
    bandwidth_hz: float = 20e6
    n_prb: int = 100
    bs_power_dbm: float = 46.0
    ue_noise_figure_db: float = 9.0
    bs_noise_figure_db: float = 5.0
    downtilt: float = 12.0
    su_rows: int = 8
    mimo_rows: int = 8
    mimo_cols: int = 8
    ue_array: tuple[int, int] = (2, 2)
    max_users: int = MAX_MULTIPLEXED
    max_nulls: int = 16
    null_rank: str = "victim"  # victim | power
    n_sequences: int = 8
    srs_reuse: int = 3
    srs_p_max_dbm: float = 23.0
    srs_p_ref_dbm: float = -58.0
    srs_epsilon: float = 0.6
    csi: str = "srs"  # srs | perfect
    n_fading: int = 1
    k_factor_db: float = ch.DEFAULT_K_FACTOR_DB
    rate_threshold_bps: float = 100e3
    c2_bandwidth_hz: float = 300e3  # carrier slice carrying DL C2 traffic
    drops: int = 200

    def __post_init__(self):
        if self.csi not in ("srs", "perfect"):
            raise ConfigError(f"unknown CSI quality {self.csi!r}")
        if not 1 <= self.max_users <= self.mimo_rows * self.mimo_cols:
            raise ConfigError("max_users must lie in [1, antennas]")
        if self.uav_per_sector > self.max_users:
            raise ConfigError("cannot schedule more UAVs than the multiplexing limit")
        if self.srs_reuse != 3:
            raise ConfigError("SRS pools are tied to the three sectors of a site")

    @property
    def prb_hz(self) -> float:
        return self.bandwidth_hz / self.n_prb


def _ue_steering(dirs: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    # horizontal UE panel at half-wavelength spacing
    m = np.arange(shape[0])
    n = np.arange(shape[1])
    ph = np.pi * (m[:, None] * dirs[..., None, None, 0] + n[None, :] * dirs[..., None, None, 1])
    return np.exp(1j * ph).reshape(dirs.shape[:-1] + (shape[0] * shape[1],))


@dataclass
class _Drop:
    n_cells: int
    users: np.ndarray  # (U, 3)
    is_uav: np.ndarray
    serving: np.ndarray
    n_assoc: np.ndarray  # users per cell
    beta: np.ndarray  # (C, U) linear large-scale gain incl. element gain
    g_su: np.ndarray  # (C, U) linear large-scale gain incl. 8x1 composite gain
    los: np.ndarray  # (C, U)
    a_bs: np.ndarray  # (C, U, M) unit-magnitude panel steering
    ue_factor: np.ndarray  # (C, U) complex LoS scaling by the UE beam
    phase: np.ndarray  # (C, U) LoS phase
    srs_dbm: np.ndarray  # (U,)


def _build_drop(params: MmimoParams, seed: int, aa_uav: bool, network: str = "SU") -> _Drop:
    layout = build_hex_layout(params.isd, params.env)
    dens = DensitySpec(gue_per_sector=params.gue_per_sector, uav_per_sector=params.uav_per_sector,
                       uav_height=(params.uav_height, params.uav_height))
    drop = drop_users(layout, dens, seed)
    rng = np.random.default_rng([seed, 1])
    users = np.vstack([drop.positions("uav"), drop.positions("gue")])
    is_uav = np.arange(len(users)) < drop.n_uav
    n_c, n_s = layout.n_cells, layout.n_sites
    sites = np.column_stack([layout.sites, np.full(n_s, layout.bs_height)])
    d2d, d3d, _ = wrap_distance(sites[:, None, :], users[None, :, :], layout)
    delta = layout.min_image(users[None, :, :2] - sites[:, None, :2])
    d2d = np.maximum(d2d, 1.0)
    hh = np.broadcast_to(users[:, 2], d2d.shape)
    los_s = np.empty(d2d.shape, dtype=bool)
    loss_s = np.empty(d2d.shape)
    for kind, cols in (("bs-uav", is_uav), ("bs-gue", ~is_uav)):
        p = ch.los_probability(kind, d2d[:, cols], hh[:, cols], params.env)
        los_s[:, cols] = rng.random(p.shape) < p
        pl = ch.pathloss_db(kind, d3d[:, cols], hh[:, cols], params.carrier_hz, los_s[:, cols],
                            params.env, d2d=d2d[:, cols], h_bs=layout.bs_height)
        sf = ch.shadowing_std_db(kind, hh[:, cols], los_s[:, cols], params.env)
        loss_s[:, cols] = pl + sf * rng.standard_normal(pl.shape)
    cs = layout.cell_site
    loss = loss_s[cs]
    los = los_s[cs]
    vec = np.concatenate([delta, (users[:, 2] - layout.bs_height)[None, :, None]
                          * np.ones((n_s, 1, 1))], axis=-1)
    u_glob = vec / np.linalg.norm(vec, axis=-1, keepdims=True)
    u_loc = ch.to_local(u_glob[cs], layout.cell_azimuth[:, None], params.downtilt)
    theta, phi = ch.local_angles(u_loc)
    su = ch.AntennaConfig(rows=params.su_rows, cols=1, downtilt=params.downtilt)
    mimo = ch.AntennaConfig(rows=params.mimo_rows, cols=params.mimo_cols, downtilt=params.downtilt)
    g_el = ch.element_gain_dbi(theta, phi, su)
    af = np.abs(ch.steering_vector(su, u_loc).sum(-1)) ** 2 / su.n_elements
    g_comp = g_el + 10.0 * np.log10(np.maximum(af, 1e-30))
    if network == "SU":
        rsrp = params.bs_power_dbm + g_comp - loss
    else:
        # best beamformed reference signal: element gain plus full array gain
        rsrp = params.bs_power_dbm + g_el + 10.0 * np.log10(mimo.n_elements) - loss
    serving = np.argmax(rsrp, axis=0)
    n_assoc = np.bincount(serving, minlength=n_c)
    a_bs = ch.steering_vector(mimo, u_loc)
    ue_factor = np.ones((n_c, len(users)), dtype=complex)
    if aa_uav:
        u_ue = -u_glob[cs][:, is_uav]  # UAV-to-BS directions
        a_ue = _ue_steering(u_ue, params.ue_array)
        n_ue = a_ue.shape[-1]
        w = np.conj(a_ue[serving[is_uav], np.arange(is_uav.sum())]) / np.sqrt(n_ue)
        ue_factor[:, is_uav] = np.einsum("cum,um->cu", a_ue, w)
    phase = np.exp(2j * np.pi * rng.random((n_c, len(users))))
    xi = loss[serving, np.arange(len(users))]
    pc = PowerControlParams(params.srs_p_max_dbm, params.srs_p_ref_dbm, params.srs_epsilon,
                            params.n_prb)
    return _Drop(
        n_cells=n_c, users=users, is_uav=is_uav, serving=serving, n_assoc=n_assoc,
        beta=db2lin(g_el - loss), g_su=db2lin(g_comp - loss), los=los, a_bs=a_bs,
        ue_factor=ue_factor, phase=phase, srs_dbm=tx_power_per_prb_dbm(pc, xi),
    )


def _schedule(d: _Drop, params: MmimoParams, rng) -> list[np.ndarray]:
    """Users per cell: all UAVs first, then random GUEs up to the limit."""
    out = []
    for c in range(d.n_cells):
        mine = np.flatnonzero(d.serving == c)
        uav = mine[d.is_uav[mine]]
        gue = rng.permutation(mine[~d.is_uav[mine]])
        out.append(np.concatenate([uav, gue])[: params.max_users])
    return out


def _mimo_channels(d: _Drop, sched: np.ndarray, k_db: float, rng) -> np.ndarray:
    """True channels from every cell to the scheduled users: (C, U_s, M)."""
    k = 10.0 ** (k_db / 10.0)
    a = d.a_bs[:, sched]
    z = ch.crandn(rng, a.shape)
    los = d.los[:, sched, None]
    spec = np.sqrt(k / (k + 1.0)) * (d.ue_factor[:, sched] * d.phase[:, sched])[..., None] * a
    h = np.where(los, spec + np.sqrt(1.0 / (k + 1.0)) * z, z)
    return np.sqrt(d.beta[:, sched])[..., None] * h


def _null_sets(d: _Drop, params: MmimoParams, rank: str = "power") -> list[np.ndarray]:
    """Per cell, UAVs served elsewhere to steer nulls at (statistical CSI).

    ``"power"`` ranks by received power at this BS (the most interfering
    UAVs, used for the SRS stage); ``"victim"`` ranks by this BS's power
    relative to the UAV's serving power (the most interfered UAVs, used
    for the data stage).
    """
    uavs = np.flatnonzero(d.is_uav)
    own = d.beta[d.serving[uavs], uavs]
    out = []
    for c in range(d.n_cells):
        mask = d.serving[uavs] != c
        cand = uavs[mask]
        score_own = own[mask]
        score = d.beta[c, cand]
        if rank == "victim":
            score = score / score_own
        order = np.argsort(-score, kind="stable")
        out.append(cand[order[: params.max_nulls]])
    return out


def mmimo_drop(params: MmimoParams, seed: int, modes=MODES) -> dict[str, dict[str, np.ndarray]]:
    """Evaluate the requested modes on one drop.

    Returns, per mode, UAV and GUE SINRs (dB, fading-averaged in the linear
    domain) and UAV C2 rates (bit/s).
    """
    out = {}
    for net, aa in (("SU", False), ("SU", True), ("mMIMO", False), ("mMIMO", True)):
        wanted = [m for m in modes if m.endswith("aaUAV") == aa and m.startswith(net)]
        if not wanted:
            continue
        d = _build_drop(params, seed, aa_uav=aa, network=net)
        for mode in wanted:
            out[mode] = _evaluate(d, params, mode, np.random.default_rng([seed, 3, MODES.index(mode)]))
    return out


def _evaluate(d: _Drop, params: MmimoParams, mode: str, rng) -> dict[str, np.ndarray]:
    p_cell = db2lin(params.bs_power_dbm - 10.0 * np.log10(params.n_prb))
    noise_ue = db2lin(noise_dbm(params.prb_hz, params.ue_noise_figure_db))
    noise_bs = db2lin(noise_dbm(params.prb_hz, params.bs_noise_figure_db))
    n_users = len(d.users)
    uav_idx = np.flatnonzero(d.is_uav)
    if mode.startswith("SU"):
        k = 10.0 ** (params.k_factor_db / 10.0)
        sinr = np.zeros(n_users)
        for _ in range(params.n_fading):
            z = ch.crandn(rng, d.g_su.shape)
            spec = np.sqrt(k / (k + 1.0)) * d.ue_factor * d.phase
            hs = np.where(d.los, spec + np.sqrt(1.0 / (k + 1.0)) * z, z)
            rx = p_cell * d.g_su * np.abs(hs) ** 2
            sig = rx[d.serving, np.arange(n_users)]
            sinr += sig / (rx.sum(axis=0) - sig + noise_ue)
        sinr /= params.n_fading
        share = 1.0 / d.n_assoc[d.serving]
        rate = share * params.c2_bandwidth_hz * np.log2(1.0 + sinr)
        return {"uav_sinr_db": lin2db(sinr[uav_idx]), "gue_sinr_db": lin2db(sinr[~d.is_uav]),
                "uav_rate_bps": rate[uav_idx]}

    sched_rng = np.random.default_rng(rng.integers(2**63))
    per_cell = _schedule(d, params, sched_rng)
    sched = np.concatenate(per_cell)
    cell_of = np.concatenate([np.full(len(s), c) for c, s in enumerate(per_cell)])
    slot = np.concatenate([sched_rng.permutation(params.n_sequences)[: len(s)] for s in per_cell])
    nulls = mode == "mMIMOnulls"
    srs_nulls = _null_sets(d, params, "power") if nulls else None
    dl_nulls = _null_sets(d, params, params.null_rank) if nulls else None
    m = d.a_bs.shape[-1]
    pos = {u: i for i, u in enumerate(sched)}
    sinr_acc = np.zeros(len(sched))
    p_srs = db2lin(d.srs_dbm[sched])
    pool = cell_of % 3
    for _ in range(params.n_fading):
        H = _mimo_channels(d, sched, params.k_factor_db, rng)  # (C, Us, M)
        W = np.zeros((d.n_cells, m, params.max_users), dtype=complex)
        P = np.zeros((d.n_cells, params.max_users))
        for c, users_c in enumerate(per_cell):
            if len(users_c) == 0:
                continue
            cols = np.array([pos[u] for u in users_c])
            A = d.a_bs[c, dl_nulls[c]].T if nulls else None
            if params.csi == "perfect":
                Hc = H[c, cols].T
            else:
                # nulls also shield the SRS observation from strong UAVs
                proj = orthogonal_projector(d.a_bs[c, srs_nulls[c]].T) if nulls else None
                same = pool == pool[cols[0]]
                idx = np.flatnonzero(same)
                est = srs_estimate(H[c, idx].T, SrsPlan(slot[idx], pool[idx], params.n_sequences),
                                   p_srs[idx], noise_bs, rng, beta=d.beta[c, sched[idx]],
                                   targets=np.searchsorted(idx, cols), projector=proj)
                Hc = est.entries
            if nulls:
                pre = null_steering_precoders(Hc, A, params.max_nulls, p_cell,
                                              strength=-np.arange(len(dl_nulls[c])))
            else:
                pre = zf_precoders(Hc, p_cell)
            W[c, :, : len(cols)] = pre.W
            P[c, : len(cols)] = pre.powers
        # X[c, k, j]: power from cell c's stream j at scheduled user k
        X = np.abs(np.einsum("ckm,cmj->ckj", np.conj(H), W)) ** 2 * P[:, None, :]
        total = X.sum(axis=(0, 2))
        sig = X[cell_of, np.arange(len(sched)), _stream_index(per_cell)]
        sinr_acc += sig / (total - sig + noise_ue)
    sinr = sinr_acc / params.n_fading
    share = np.array([len(per_cell[c]) for c in cell_of]) / d.n_assoc[cell_of]
    rate = share * params.c2_bandwidth_hz * np.log2(1.0 + sinr)
    is_uav = d.is_uav[sched]
    # UAVs are always scheduled, so every UAV appears once in ``sched``
    order = np.argsort(sched[is_uav])
    return {"uav_sinr_db": lin2db(sinr[is_uav][order]), "gue_sinr_db": lin2db(sinr[~is_uav]),
            "uav_rate_bps": rate[is_uav][order]}


def _stream_index(per_cell: list[np.ndarray]) -> np.ndarray:
    return np.concatenate([np.arange(len(s)) for s in per_cell])


@dataclass(frozen=True)
class MmimoResult:
    mode: str
    height: float
    uav_sinr: CdfSummary
    gue_sinr: CdfSummary
    uav_rate: CdfSummary
    threshold_bps: float

    @property
    def frac_above(self) -> float:
        return fraction_above(self.uav_rate, self.threshold_bps)

    def summary(self) -> dict:
        ps = (0.05, 0.5, 0.95)
        return {
            "mode": self.mode,
            "height": self.height,
            "frac_above_100kbps": self.frac_above,
            "sinr_percentiles": {str(p): self.uav_sinr.finite().percentile(p) for p in ps},
        }


def merge_drops(params: MmimoParams, per_drop: list[dict], modes=MODES) -> dict[str, MmimoResult]:
    out = {}
    for mode in modes:
        rows = [r[mode] for r in per_drop]
        out[mode] = MmimoResult(
            mode=mode, height=params.uav_height,
            uav_sinr=CdfSummary(np.concatenate([r["uav_sinr_db"] for r in rows])),
            gue_sinr=CdfSummary(np.concatenate([r["gue_sinr_db"] for r in rows])),
            uav_rate=CdfSummary(np.concatenate([r["uav_rate_bps"] for r in rows])),
            threshold_bps=params.rate_threshold_bps,
        )
    return out


def run_mmimo_study(params: MmimoParams, seeds, modes=MODES) -> dict[str, MmimoResult]:
    """Per-mode UAV/GUE SINR and UAV rate distributions over the given drops."""
    for m in modes:
        if m not in MODES:
            raise ConfigError(f"unknown mode {m!r}")
    return merge_drops(params, [mmimo_drop(params, s, modes) for s in seeds], modes)
