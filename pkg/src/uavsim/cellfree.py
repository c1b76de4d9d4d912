"""Uplink cell-free processing with single-antenna BSs.

All BSs jointly combine every user's signal, either with matched-filter (MF)
or MMSE combiners built from channel estimates. SINRs are always evaluated on
the true channels. The cellular baseline decodes each user at its serving BS
only.

Channel matrices are ``(..., M, K)``: BSs along rows, users along columns.
Powers and noise are linear (mW per PRB).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import channel as ch
from .exceptions import ConfigError
from .linklevel import db2lin, lin2db, noise_dbm
from .powerctrl import PowerControlParams, reference_loss_db, tx_power_per_prb_dbm
from .scenario import build_random_layout, wrap_distance
from .stats import CdfSummary

SCHEMES = ("cellular", "mf", "mmse")
CSI_MODES = ("srs", "perfect")


@dataclass(frozen=True)
class CollectiveChannel:
    """Channel coefficients between ``M`` single-antenna BSs and ``K`` users."""

    G: np.ndarray
    large_scale_db: np.ndarray  # (M, K) large-scale gain in dB (negative loss)

    def __post_init__(self):
        if self.G.shape[-2] < 1:
            raise ConfigError("need at least one BS")

    @property
    def n_bs(self) -> int:
        return self.G.shape[-2]

    @property
    def n_users(self) -> int:
        return self.G.shape[-1]


@dataclass(frozen=True)
class PilotConfig:
    """Pilot index per user; users sharing an index contaminate each other."""

    tau_p: int = 1
    assignment: tuple[int, ...] = ()

    def __post_init__(self):
        if self.tau_p < 1:
            raise ConfigError("tau_p must be >= 1")
        if any(not 0 <= a < self.tau_p for a in self.assignment):
            raise ConfigError("pilot index out of range")

    @classmethod
    def shared(cls, n_users: int) -> "PilotConfig":
        return cls(1, (0,) * n_users)

    @classmethod
    def orthogonal(cls, n_users: int) -> "PilotConfig":
        return cls(max(n_users, 1), tuple(range(n_users)))

    @classmethod
    def greedy(cls, large_scale_db: np.ndarray, tau_p: int) -> "PilotConfig":
        """Deterministic assignment keeping co-pilot users far apart.

        Users are taken in order; each gets the pilot whose current holders
        overlap least with it, where overlap is the summed product of
        linear large-scale gains over BSs.
        """
        beta = db2lin(large_scale_db)
        k = beta.shape[1]
        load = np.zeros((tau_p, beta.shape[0]))
        out = []
        for u in range(k):
            t = int(np.argmin(load @ beta[:, u])) if u >= tau_p else u
            out.append(t)
            load[t] += beta[:, u]
        return cls(tau_p, tuple(out))

    def __len__(self) -> int:
        return len(self.assignment)


@dataclass(frozen=True)
class CombinerSet:
    V: np.ndarray  # (..., M, K), unit-norm columns
    kind: str


def cf_estimate(G_true: np.ndarray, large_scale_db: np.ndarray, pilots: PilotConfig,
                pilot_power, noise: float, rng: np.random.Generator, *,
                perfect: bool = False):
    """Per-BS MMSE estimates from one pilot symbol.

    Every BS observes, for each pilot index, the superposition of all users
    on that index plus noise, and forms a scalar MMSE estimate from the
    large-scale gains. Returns ``(G_hat, error_variance)`` where the error
    variance is ``(M, K)``.
    """
    G_true = np.asarray(G_true)
    if perfect:
        return G_true.copy(), np.zeros(G_true.shape[-2:])
    if len(pilots) != G_true.shape[-1]:
        raise ConfigError("pilot assignment must cover every user")
    if not noise > 0:
        raise ValueError("noise must be positive")
    p = np.asarray(pilot_power, dtype=float) * np.ones(G_true.shape[-1])
    beta = db2lin(large_scale_db)
    a = np.asarray(pilots.assignment)
    onehot = (a[:, None] == np.arange(pilots.tau_p)[None, :]).astype(float)  # (K, T)
    # received pilot signal per BS and pilot index
    y = (G_true * np.sqrt(p)) @ onehot
    y = y + np.sqrt(noise) * ch.crandn(rng, y.shape)
    psi = (beta * p) @ onehot + noise  # (M, T) observation variance
    c = np.sqrt(p) * beta / psi[:, a]  # (M, K)
    G_hat = c * y[..., a]
    err = beta - p * beta ** 2 / psi[:, a]
    return G_hat, err


def _normalise(V: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(V, axis=-2, keepdims=True)
    if np.any(n == 0):
        raise ValueError("zero channel column: combiner undefined")
    return V / n


def mf_combiners(G_hat: np.ndarray) -> CombinerSet:
    return CombinerSet(_normalise(np.asarray(G_hat)), "MF")


def mmse_combiners(G_hat: np.ndarray, powers, noise: float, error_cov=None) -> CombinerSet:
    """Per-user MMSE combiners.

    ``v_k`` is proportional to ``(sum_{j != k} p_j g_j g_j^H + C + noise I)^-1 g_k``
    with ``C`` the diagonal estimation-error covariance
    ``sum_j p_j diag(err_j)`` when ``error_cov`` is given. Including user
    ``k`` itself in the inverse only rescales ``v_k``, so one solve serves
    all users.
    """
    if not noise > 0:
        raise ValueError("noise must be positive for MMSE combining")
    G_hat = np.asarray(G_hat)
    p = np.asarray(powers, dtype=float) * np.ones(G_hat.shape[-1])
    m = G_hat.shape[-2]
    Gp = G_hat * np.sqrt(p)
    R = Gp @ np.conj(np.swapaxes(Gp, -1, -2))
    diag = np.full(m, noise)
    if error_cov is not None:
        diag = diag + np.asarray(error_cov) @ p
    R = R + diag[..., :, None] * np.eye(m)
    V = np.linalg.solve(R, G_hat)
    return CombinerSet(_normalise(V), "MMSE")


def cf_uplink_sinr(G_true: np.ndarray, V: np.ndarray, powers, noise: float) -> np.ndarray:
    """Exact per-user SINR (linear) for combiners ``V`` on channels ``G_true``."""
    G_true = np.asarray(G_true)
    V = np.asarray(V)
    p = np.asarray(powers, dtype=float) * np.ones(G_true.shape[-1])
    X = np.abs(np.conj(np.swapaxes(V, -1, -2)) @ G_true) ** 2 * p  # [k, j] = p_j |v_k^H g_j|^2
    sig = np.diagonal(X, axis1=-2, axis2=-1)
    interf = X.sum(axis=-1) - sig
    vn = np.sum(np.abs(V) ** 2, axis=-2)
    with np.errstate(divide="ignore", invalid="ignore"):
        return sig / (interf + noise * vn)


def cellular_combiners(serving: np.ndarray, n_bs: int) -> np.ndarray:
    """Selection combiners: each user decoded at its serving BS only."""
    V = np.zeros((n_bs, len(serving)))
    V[np.asarray(serving), np.arange(len(serving))] = 1.0
    return V


# --------------------------------------------------------------------------
# Study
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CellFreeParams:
    isd: float = 200.0
    env: str = "UMi"
    n_bs: int = 57
    n_users: int = 57
    n_uav: int | None = None  # None: all users are UAVs
    uav_height: tuple[float, float] = (25.0, 150.0)
    gue_height: float = 1.5
    carrier_hz: float = 2e9
    bandwidth_hz: float = 20e6
    n_prb: int = 100
    p_max_dbm: float = 23.0
    p_ref_dbm: float = -55.0
    epsilon_uav: float = 0.7
    epsilon_gue: float = 0.7
    noise_figure_db: float = 5.0
    n_fading: int = 100
    pilots: str = "orthogonal"  # orthogonal | shared | greedy
    tau_p: int = 1  # only used by the greedy assignment
    k_factor_db: float = ch.DEFAULT_K_FACTOR_DB
    reference_rule: str = "strongest"
    include_error_cov: bool = True
    drops: int = 300
    extra: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if self.n_bs < 1 or self.n_users < 1:
            raise ConfigError("need at least one BS and one user")
        if self.n_uav is not None and not 0 <= self.n_uav <= self.n_users:
            raise ConfigError("n_uav must lie in [0, n_users]")
        if self.pilots not in ("orthogonal", "shared", "greedy"):
            raise ConfigError(f"unknown pilot scheme {self.pilots!r}")
        if self.n_fading < 1:
            raise ConfigError("n_fading must be >= 1")

    @classmethod
    def mixed(cls, **kw) -> "CellFreeParams":
        """One UAV per 14 GUEs (about 7% UAVs)."""
        kw.setdefault("n_uav", round(kw.get("n_users", 57) / 15))
        return cls(**kw)

    @property
    def noise_mw_per_prb(self) -> float:
        return float(db2lin(noise_dbm(self.bandwidth_hz / self.n_prb, self.noise_figure_db)))


def _pilot_config(params: CellFreeParams, beta_db: np.ndarray) -> PilotConfig:
    k = beta_db.shape[1]
    if params.pilots == "orthogonal":
        return PilotConfig.orthogonal(k)
    if params.pilots == "shared":
        return PilotConfig.shared(k)
    return PilotConfig.greedy(beta_db, params.tau_p)


def cf_drop(params: CellFreeParams, seed: int) -> dict[tuple[str, str], np.ndarray]:
    """One drop: fading-averaged UAV SINRs (dB) per (scheme, csi mode)."""
    rng = np.random.default_rng(seed)
    layout = build_random_layout(params.n_bs, params.isd, params.env, rng)
    k = params.n_users
    n_uav = k if params.n_uav is None else params.n_uav
    is_uav = np.zeros(k, dtype=bool)
    is_uav[:n_uav] = True
    xy = rng.uniform(0.0, layout.side, size=(k, 2))
    h = np.where(is_uav, rng.uniform(*params.uav_height, size=k), params.gue_height)
    users = np.column_stack([xy, h])
    bs = np.column_stack([layout.sites, np.full(layout.n_sites, layout.bs_height)])
    d2d, d3d, _ = wrap_distance(bs[:, None, :], users[None, :, :], layout)
    d2d = np.maximum(d2d, 1.0)
    d3d = np.sqrt(d2d ** 2 + (h[None, :] - layout.bs_height) ** 2)
    hh = np.broadcast_to(h[None, :], d2d.shape)
    kinds = np.where(is_uav, "bs-uav", "bs-gue")
    loss = np.empty(d2d.shape)
    los = np.empty(d2d.shape, dtype=bool)
    for kind in np.unique(kinds):
        cols = kinds == kind
        pl_los = ch.los_probability(kind, d2d[:, cols], hh[:, cols], params.env)
        los[:, cols] = rng.random(pl_los.shape) < pl_los
        pl = ch.pathloss_db(kind, d3d[:, cols], hh[:, cols], params.carrier_hz, los[:, cols],
                            params.env, d2d=d2d[:, cols], h_bs=layout.bs_height)
        sf = ch.shadowing_std_db(kind, hh[:, cols], los[:, cols], params.env)
        loss[:, cols] = pl + sf * rng.standard_normal(pl.shape)
    beta_db = -loss

    xi = reference_loss_db(loss, params.reference_rule, axis=0)
    p_dbm = np.where(
        is_uav,
        tx_power_per_prb_dbm(PowerControlParams(params.p_max_dbm, params.p_ref_dbm,
                                                params.epsilon_uav, params.n_prb), xi),
        tx_power_per_prb_dbm(PowerControlParams(params.p_max_dbm, params.p_ref_dbm,
                                                params.epsilon_gue, params.n_prb), xi),
    )
    p = db2lin(p_dbm)
    noise = params.noise_mw_per_prb
    serving = np.argmax(beta_db, axis=0)

    # Ricean LoS phase is fixed by geometry; fading varies per realization
    phase = np.exp(2j * np.pi * rng.random(d2d.shape))
    n_f = params.n_fading
    h_ss = ch.small_scale(1, rng, los=np.broadcast_to(los, (n_f,) + los.shape),
                          steering=phase[..., None], k_factor_db=params.k_factor_db,
                          size=(n_f,) + los.shape)[..., 0]
    G = np.sqrt(db2lin(beta_db)) * h_ss  # (F, M, K)

    pilots = _pilot_config(params, beta_db)
    V_cell = cellular_combiners(serving, params.n_bs)
    out = {}
    for mode in CSI_MODES:
        G_hat, err = cf_estimate(G, beta_db, pilots, p, noise, rng, perfect=(mode == "perfect"))
        sinr = {
            "cellular": cf_uplink_sinr(G, np.broadcast_to(V_cell, G.shape), p, noise),
            "mf": cf_uplink_sinr(G, mf_combiners(G_hat).V, p, noise),
            "mmse": cf_uplink_sinr(
                G, mmse_combiners(G_hat, p, noise,
                                  err if params.include_error_cov else None).V, p, noise),
        }
        for scheme, s in sinr.items():
            avg = s.mean(axis=0)[is_uav]
            out[(scheme, mode)] = lin2db(avg)
    return out


def merge_cf_drops(per_drop) -> dict[tuple[str, str], CdfSummary]:
    """Pool per-drop outputs of :func:`cf_drop` in the given order.

    Users with zero transmit power yield ``-inf`` and are left out.
    """
    acc: dict[tuple[str, str], list[np.ndarray]] = {(s, m): [] for s in SCHEMES for m in CSI_MODES}
    for row in per_drop:
        for key, v in row.items():
            acc[key].append(v)
    return {key: CdfSummary(np.concatenate(v) if v else []).finite() for key, v in acc.items()}


def run_cf_study(params: CellFreeParams, seeds) -> dict[tuple[str, str], CdfSummary]:
    """Six SINR distributions (3 schemes x 2 CSI modes) over the given drops."""
    return merge_cf_drops(cf_drop(params, seed) for seed in seeds)
