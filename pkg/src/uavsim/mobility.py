"""RSRP maps over a macro layout and learned handover policies for UAV routes.

A route is a sequence of grid points. At every step the UAV picks its
serving cell among the strongest candidates at that point; the reward
trades the normalized RSRP of the chosen cell against a handover cost.
Q-learning runs per route, vectorized over a batch of routes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from . import channel as ch
from .exceptions import ConfigError
from .scenario import NetworkLayout, build_hex_layout, wrap_distance
from .stats import CdfSummary

RSRP_NORM_RANGE_DBM = (-120.0, -60.0)
RANK_DECIMALS = 9  # RSRP resolution (dB) used when ranking cells


# --------------------------------------------------------------------------
# RSRP map
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RsrpGrid:
    xy: np.ndarray  # (n, 2) grid point coordinates
    ij: np.ndarray  # (n, 2) integer lattice coordinates
    rsrp_dbm: np.ndarray  # (n, n_cells)
    cell_size: float
    altitude: float
    layout: NetworkLayout

    @property
    def n_points(self) -> int:
        return len(self.xy)

    @property
    def n_cells(self) -> int:
        return self.rsrp_dbm.shape[1]

    @property
    def extent_m2(self) -> float:
        return self.n_points * self.cell_size ** 2

    @property
    def _ranked(self) -> np.ndarray:
        # rounding-level differences count as ties so a common offset keeps the ranking
        return np.round(self.rsrp_dbm, RANK_DECIMALS)

    @property
    def best_cell(self) -> np.ndarray:
        """Strongest cell per point; ties go to the lowest index."""
        return np.argmax(self._ranked, axis=1)

    def candidates(self, n: int = 8) -> np.ndarray:
        """Top-``n`` cells per point, strongest first (stable on ties)."""
        n = min(n, self.n_cells)
        return np.argsort(-self._ranked, axis=1, kind="stable")[:, :n]

    def neighbor_pairs(self) -> np.ndarray:
        """Index pairs of 4-neighbor grid points."""
        lookup = {tuple(k): i for i, k in enumerate(self.ij.tolist())}
        out = []
        for i, (a, b) in enumerate(self.ij.tolist()):
            for d in ((1, 0), (0, 1)):
                j = lookup.get((a + d[0], b + d[1]))
                if j is not None:
                    out.append((i, j))
        return np.array(out, dtype=int).reshape(-1, 2)

    def edge_change_fraction(self) -> float:
        """Share of 4-neighbor edges whose best cell differs."""
        pairs = self.neighbor_pairs()
        if not len(pairs):
            return 0.0
        best = self.best_cell
        return float(np.mean(best[pairs[:, 0]] != best[pairs[:, 1]]))

    def nearest(self, xy: np.ndarray) -> np.ndarray:
        """Grid index closest to each (folded) position."""
        tree = cKDTree(self.xy)
        return tree.query(self.layout.fold(np.asarray(xy, dtype=float)))[1]


def build_rsrp_map(layout: NetworkLayout | None = None, altitude: float = 50.0, *,
                   cell_size: float = 50.0, tx_power_dbm: float = 46.0, bandwidth_hz: float = 20e6,
                   ref_bandwidth_hz: float = 1e6, fc_hz: float = 2e9,
                   antenna: ch.AntennaConfig = ch.AntennaConfig(), seed: int = 0) -> RsrpGrid:
    """Per-cell RSRP over a square lattice clipped to the layout region.

    RSRP is the received power within ``ref_bandwidth_hz`` of a carrier
    radiating ``tx_power_dbm`` evenly over ``bandwidth_hz``.

    LoS states and shadowing are drawn once per (point, site), so the map is
    fixed for a given seed.
    """
    layout = layout if layout is not None else build_hex_layout(1500.0, "UMa")
    if not cell_size > 0:
        raise ConfigError("cell_size must be positive")
    reach = layout.isd * (len(layout.sites) ** 0.5 + 1.0)
    lo, hi = layout.sites.min(axis=0) - reach, layout.sites.max(axis=0) + reach
    ii = np.arange(np.floor(lo[0] / cell_size), np.ceil(hi[0] / cell_size) + 1)
    jj = np.arange(np.floor(lo[1] / cell_size), np.ceil(hi[1] / cell_size) + 1)
    ij = np.stack(np.meshgrid(ii, jj, indexing="ij"), axis=-1).reshape(-1, 2)
    xy = ij * cell_size
    keep = layout.contains(xy)
    ij, xy = ij[keep].astype(int), xy[keep]
    pos = np.column_stack([xy, np.full(len(xy), altitude)])
    sites = np.column_stack([layout.sites, np.full(layout.n_sites, layout.bs_height)])
    rng = np.random.default_rng([seed, 7])
    d2d, d3d, _ = wrap_distance(sites[:, None, :], pos[None, :, :], layout)
    kind = "bs-uav" if altitude > ch.AERIAL_MIN_HEIGHT_M else "bs-gue"
    h = np.full(d2d.shape, altitude)
    los = rng.random(d2d.shape) < ch.los_probability(kind, d2d, h, layout.env)
    pl = ch.pathloss_db(kind, np.maximum(d3d, 1.0), h, fc_hz, los, layout.env,
                        d2d=d2d, h_bs=layout.bs_height)
    sf = ch.shadowing_std_db(kind, h, los, layout.env) * rng.standard_normal(d2d.shape)
    loss = (pl + sf)[layout.cell_site].T
    gain = ch.cell_gain_dbi(layout, pos, antenna, "composite")
    p_ref = tx_power_dbm - 10.0 * np.log10(bandwidth_hz / ref_bandwidth_hz)
    return RsrpGrid(xy, ij, p_ref + gain - loss, float(cell_size), float(altitude), layout)


# --------------------------------------------------------------------------
# Routes and policies
# --------------------------------------------------------------------------

def straight_routes(grid: RsrpGrid, n_routes: int, n_steps: int,
                    rng: np.random.Generator) -> np.ndarray:
    """Straight constant-altitude routes, one grid cell per step.

    Entry points are uniform over the grid and bearings uniform; positions
    wrap around the layout. Returns ``(n_routes, n_steps)`` grid indices.
    """
    if n_steps < 1 or n_routes < 0:
        raise ConfigError("routes need n_steps >= 1 and n_routes >= 0")
    start = grid.xy[rng.integers(0, grid.n_points, n_routes)]
    bearing = rng.uniform(0.0, 2.0 * np.pi, n_routes)
    step = grid.cell_size * np.column_stack([np.cos(bearing), np.sin(bearing)])
    t = np.arange(n_steps)
    xy = start[:, None, :] + t[None, :, None] * step[:, None, :]
    return grid.nearest(xy.reshape(-1, 2)).reshape(n_routes, n_steps)


@dataclass(frozen=True)
class RewardWeights:
    w_ho: float
    w_rsrp: float

    def __post_init__(self):
        if self.w_ho < 0 or self.w_rsrp < 0:
            raise ConfigError("weights must be non-negative")
        if self.w_ho == 0 and self.w_rsrp == 0:
            raise ConfigError("weights cannot both be zero")


@dataclass(frozen=True)
class QHyper:
    alpha: float = 1.0  # transitions along a route are deterministic
    gamma: float = 0.9
    epsilon_start: float = 1.0
    epsilon_end: float = 0.01
    episodes: int = 2000
    n_candidates: int = 8

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError("alpha must lie in (0, 1]")
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError("gamma must lie in [0, 1)")
        if not 0.0 <= self.epsilon_end <= self.epsilon_start <= 1.0:
            raise ConfigError("need 0 <= epsilon_end <= epsilon_start <= 1")
        if self.episodes < 0 or self.n_candidates < 1:
            raise ConfigError("episodes must be >= 0 and n_candidates >= 1")


def rsrp_norm(rsrp_dbm, lo: float = RSRP_NORM_RANGE_DBM[0], hi: float = RSRP_NORM_RANGE_DBM[1]):
    """Map ``[lo, hi]`` dBm linearly onto ``[0, 1]``, clipped."""
    return np.clip((np.asarray(rsrp_dbm, dtype=float) - lo) / (hi - lo), 0.0, 1.0)


@dataclass(frozen=True)
class RouteProblem:
    """Candidate cells and per-step rewards along a batch of routes."""

    routes: np.ndarray  # (R, L) grid indices
    cand: np.ndarray  # (R, L, K) cell ids
    rsrp: np.ndarray  # (R, L, K) dBm of each candidate
    same: np.ndarray  # (R, L, K_prev, K) candidate k at t equals candidate j at t-1

    @classmethod
    def build(cls, grid: RsrpGrid, routes: np.ndarray, n_candidates: int = 8) -> "RouteProblem":
        routes = np.asarray(routes, dtype=int)
        cand = grid.candidates(n_candidates)[routes]
        rsrp = np.take_along_axis(grid.rsrp_dbm[routes], cand, axis=-1)
        same = np.zeros(cand.shape[:2] + (cand.shape[2], cand.shape[2]), dtype=bool)
        same[:, 1:] = cand[:, :-1, :, None] == cand[:, 1:, None, :]
        return cls(routes, cand, rsrp, same)

    def rewards(self, weights: RewardWeights) -> np.ndarray:
        """``(R, L, K_prev, K)`` reward of choosing k after serving candidate j."""
        r = weights.w_rsrp * rsrp_norm(self.rsrp)[:, :, None, :]
        return r - weights.w_ho * (~self.same)


@dataclass(frozen=True)
class QTable:
    """Q-values per route step: ``q[r, t, j, k]`` for previous candidate j and action k."""

    q: np.ndarray
    problem: RouteProblem

    def actions(self) -> np.ndarray:
        """Greedy rollout of the learned values: candidate index per step."""
        r_n, l_n = self.q.shape[:2]
        act = np.zeros((r_n, l_n), dtype=int)
        rows = np.arange(r_n)
        for t in range(1, l_n):
            act[:, t] = np.argmax(self.q[rows, t, act[:, t - 1]], axis=-1)
        return act

    def as_dict(self) -> dict[tuple[int, int], np.ndarray]:
        """Map ``(grid index, serving cell)`` to action values for visited states."""
        out = {}
        p = self.problem
        for r in range(self.q.shape[0]):
            for t in range(1, self.q.shape[1]):
                for j in range(self.q.shape[2]):
                    out[(int(p.routes[r, t]), int(p.cand[r, t - 1, j]))] = self.q[r, t, j]
        return out


def greedy_actions(problem: RouteProblem) -> np.ndarray:
    """Always the strongest cell."""
    return np.zeros(problem.routes.shape, dtype=int)


def greedy_policy(grid: RsrpGrid) -> np.ndarray:
    """Serving cell per grid point regardless of the current cell."""
    return grid.best_cell


def q_learn(problem: RouteProblem, weights: RewardWeights, hyper: QHyper = QHyper(),
            rng: np.random.Generator | None = None) -> QTable:
    """Tabular Q-learning with epsilon-greedy exploration, one episode per route pass.

    The first step always attaches to the strongest cell. Each episode rolls
    out the current epsilon-greedy policy and then applies the one-step
    updates from the last step backwards, so a reward reaches the start of
    the route within one episode.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    rew = problem.rewards(weights)
    r_n, l_n, k_n = problem.cand.shape
    q = np.zeros((r_n, l_n, k_n, k_n))
    rows = np.arange(r_n)
    n_ep = hyper.episodes
    for e in range(n_ep):
        frac = e / max(n_ep - 1, 1)
        eps = hyper.epsilon_start + (hyper.epsilon_end - hyper.epsilon_start) * frac
        explore = rng.random((r_n, l_n)) < eps
        rand_a = rng.integers(0, k_n, (r_n, l_n))
        act = np.zeros((r_n, l_n), dtype=int)
        for t in range(1, l_n):
            best = np.argmax(q[rows, t, act[:, t - 1]], axis=-1)
            act[:, t] = np.where(explore[:, t], rand_a[:, t], best)
        for t in range(l_n - 1, 0, -1):
            prev, cur = act[:, t - 1], act[:, t]
            target = rew[rows, t, prev, cur]
            if t + 1 < l_n:
                target = target + hyper.gamma * q[rows, t + 1, cur].max(axis=-1)
            old = q[rows, t, prev, cur]
            q[rows, t, prev, cur] = old + hyper.alpha * (target - old)
    return QTable(q, problem)


def optimal_q(problem: RouteProblem, weights: RewardWeights, gamma: float = 0.9) -> QTable:
    """Exact finite-horizon Q-values by backward induction (the fixed point of q_learn)."""
    rew = problem.rewards(weights)
    q = np.zeros(rew.shape)
    l_n = rew.shape[1]
    for t in range(l_n - 1, 0, -1):
        future = q[:, t + 1].max(axis=-1) if t + 1 < l_n else 0.0
        q[:, t] = rew[:, t] + gamma * (future[:, None, :] if t + 1 < l_n else 0.0)
    return QTable(q, problem)


# --------------------------------------------------------------------------
# Evaluation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PolicyEvaluation:
    handovers: CdfSummary  # per route
    rsrp: CdfSummary  # per step
    counts: np.ndarray
    ratio: np.ndarray  # per route, against greedy
    cells: np.ndarray | None = None  # (R, L) serving cell per route step


def route_handovers(problem: RouteProblem, actions: np.ndarray) -> np.ndarray:
    cells = np.take_along_axis(problem.cand, actions[..., None], axis=-1)[..., 0]
    return np.sum(cells[:, 1:] != cells[:, :-1], axis=1)


def evaluate_policy(problem: RouteProblem, actions: np.ndarray) -> PolicyEvaluation:
    """Handover counts, serving RSRP and handover ratio against greedy.

    The ratio is ``count / max(greedy_count, 1)`` per route.
    """
    counts = route_handovers(problem, actions)
    greedy = route_handovers(problem, greedy_actions(problem))
    rsrp = np.take_along_axis(problem.rsrp, actions[..., None], axis=-1)[..., 0]
    cells = np.take_along_axis(problem.cand, actions[..., None], axis=-1)[..., 0]
    return PolicyEvaluation(CdfSummary(counts), CdfSummary(rsrp.ravel()), counts,
                            counts / np.maximum(greedy, 1), cells)


def top_decile_ratio(ev: PolicyEvaluation) -> float:
    """90th percentile of the per-route handover ratio."""
    return float(CdfSummary(ev.ratio).percentile(0.9))


def action_agreement(a: np.ndarray, b: np.ndarray) -> float:
    """Share of route steps (after the first) where two policies pick the same candidate."""
    return float(np.mean(a[:, 1:] == b[:, 1:]))


@dataclass(frozen=True)
class MobilityParams:
    isd: float = 1500.0
    altitude: float = 50.0
    cell_size: float = 50.0
    tx_power_dbm: float = 46.0
    fc_hz: float = 2e9
    n_routes: int = 200
    n_steps: int = 100
    weights: tuple[tuple[float, float], ...] = ((0.0, 1.0), (1.0, 9.0), (5.0, 5.0))
    hyper: QHyper = QHyper()


def run_mobility_study(params: MobilityParams, seed: int
                       ) -> tuple[dict[tuple[float, float], PolicyEvaluation], RouteProblem]:
    """Learn and evaluate one policy per weight pair on a common map and route set.

    Returns the evaluations keyed by ``(w_ho, w_rsrp)`` and the route problem
    they were evaluated on.
    """
    grid = build_rsrp_map(build_hex_layout(params.isd, "UMa"), params.altitude,
                          cell_size=params.cell_size, tx_power_dbm=params.tx_power_dbm,
                          fc_hz=params.fc_hz, seed=seed)
    routes = straight_routes(grid, params.n_routes, params.n_steps, np.random.default_rng([seed, 8]))
    problem = RouteProblem.build(grid, routes, params.hyper.n_candidates)
    out = {}
    for k, (w_ho, w_rsrp) in enumerate(params.weights):
        table = q_learn(problem, RewardWeights(w_ho, w_rsrp), params.hyper,
                        np.random.default_rng([seed, 9, k]))
        out[(w_ho, w_rsrp)] = evaluate_policy(problem, table.actions())
    return out, problem
