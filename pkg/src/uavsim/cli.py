"""Command-line runner: one subcommand per study.

    uavsim <pattern|mmimo|cellfree|u2u|mobility|thz> [--config PATH] [--seed N]
           [--jobs N] [--out DIR]

``--config`` also accepts a ``manifest.json`` from an earlier run, which
replays it with the recorded config text and seed. Exit codes: 0 success,
2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from functools import partial
from pathlib import Path

import numpy as np

from . import __version__
from . import cellfree as cf
from . import channel as ch
from . import mmimo as mm
from . import mobility as mob
from . import thz
from . import u2u
from .config import params_from_section, parse_config, read_config, section
from .emit import cdf_rows, manifest_hash, write_csv, write_json, write_manifest
from .exceptions import ConfigError, NumericalError
from .scenario import drop_seeds

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

RUN_KEYS = ("seed", "drops")
PATTERN_KEYS = ("heights", "n_points", "d_min", "d_max", "bs_height", "rows", "downtilt")
MMIMO_STUDY_KEYS = ("modes", "heights")
CF_STUDY_KEYS = ("scenario",)
U2U_STUDY_KEYS = ("studies", "epsilon_gue", "epsilon_uav", "drops", "heights", "epsilons",
                  "eta_u", "delta_max", "antennas")
THZ_KEYS = ("n_points", "d_min", "d_max", "tx_power_dbm", "se_cap", "nf_28_db", "nf_140_db")


def _pool_map(fn, items, jobs: int) -> list:
    """Ordered map; results do not depend on ``jobs``."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


def _floats(text: str | None, default) -> list[float]:
    if text is None:
        return list(default)
    try:
        return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad number list {text!r}") from exc


def _num(sec: dict, key: str, default, kind=float):
    if key not in sec:
        return kind(default)
    try:
        v = float(sec[key])
        if kind is int and not v.is_integer():
            raise ValueError
        return kind(v)
    except ValueError:
        raise ConfigError(f"{key}: expected {kind.__name__}, got {sec[key]!r}") from None


def _words(text: str | None, default) -> list[str]:
    if text is None:
        return list(default)
    return [x.strip() for x in text.split(",") if x.strip()]


class Run:
    """Shared state of one invocation."""

    def __init__(self, name, cp, text, config_path, seed, jobs, out):
        self.name, self.cp, self.text = name, cp, text
        self.config_path, self.seed, self.jobs = config_path, seed, jobs
        self.out = Path(out)
        self.mhash = manifest_hash(name, text, seed, __version__)
        self.outputs: list[Path] = []

    def sec(self, name: str, allowed=None) -> dict[str, str]:
        s = section(self.cp, name)
        extra = set(s) - set(allowed) if allowed is not None else set()
        if extra:
            raise ConfigError(f"[{name}]: unknown keys {sorted(extra)}")
        return s

    def drops(self, default: int) -> int:
        return _num(self.sec("run", RUN_KEYS), "drops", default, int)

    def csv(self, fname, header, rows):
        self.outputs.append(write_csv(self.out / fname, header, rows, self.mhash))

    def json(self, fname, payload):
        self.outputs.append(write_json(self.out / fname, payload, self.mhash))


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------

def cmd_pattern(run: Run) -> None:
    s = run.sec("pattern", PATTERN_KEYS)
    heights = _floats(s.get("heights"), (1.5, 50.0, 75.0, 150.0))
    n = _num(s, "n_points", 200, int)
    d = np.linspace(_num(s, "d_min", 10.0), _num(s, "d_max", 1000.0), n) if n > 0 else []
    bs_h = _num(s, "bs_height", 25.0)
    cfg = ch.AntennaConfig(rows=_num(s, "rows", 8, int), downtilt=_num(s, "downtilt", 12.0))
    rows = []
    for h in heights:
        for x in d:
            el = np.degrees(np.arctan2(h - bs_h, x))
            g = ch.composite_bs_gain_dbi(cfg, cfg.downtilt, 0.0, (0.0, el))
            rows.append((h, float(x), float(g)))
    run.csv("pattern.csv", ("height_m", "d2d_m", "gain_dbi"), rows)


def cmd_mmimo(run: Run) -> None:
    base = params_from_section(mm.MmimoParams, run.sec("mmimo"))
    study = run.sec("mmimo.study", MMIMO_STUDY_KEYS)
    modes = _words(study.get("modes"), mm.MODES)
    for m in modes:
        if m not in mm.MODES:
            raise ConfigError(f"unknown mode {m!r}")
    heights = _floats(study.get("heights"), (base.uav_height,))
    seeds = drop_seeds(run.seed, run.drops(base.drops))
    summaries, rows = [], []
    for h in heights:
        params = replace(base, uav_height=h)
        per_drop = _pool_map(partial(mm.mmimo_drop, params, modes=tuple(modes)), seeds, run.jobs)
        res = mm.merge_drops(params, per_drop, modes)
        for m in modes:
            r = res[m]
            s = r.summary()
            s["gue_sinr_median_db"] = r.gue_sinr.finite().median() if r.gue_sinr.count else None
            summaries.append(s)
            rows += cdf_rows((h, m, "uav_sinr_db"), r.uav_sinr.finite().samples)
            rows += cdf_rows((h, m, "gue_sinr_db"), r.gue_sinr.finite().samples)
            rows += cdf_rows((h, m, "uav_rate_bps"), r.uav_rate.samples)
    run.csv("mmimo_cdf.csv", ("height_m", "mode", "metric", "p", "value"), rows)
    run.json("mmimo_summary.json", {"drops": len(seeds), "results": summaries})


def cmd_cellfree(run: Run) -> None:
    sec = run.sec("cellfree")
    scenario = run.sec("cellfree.study", CF_STUDY_KEYS).get("scenario", "uav")
    if scenario not in ("uav", "mixed"):
        raise ConfigError(f"unknown cell-free scenario {scenario!r}")
    params = params_from_section(cf.CellFreeParams, sec)
    if scenario == "mixed" and params.n_uav is None:
        params = replace(params, n_uav=round(params.n_users / 15))
    seeds = drop_seeds(run.seed, run.drops(params.drops))
    res = cf.merge_cf_drops(_pool_map(partial(cf.cf_drop, params), seeds, run.jobs))
    rows, summary = [], {}
    for (scheme, mode), s in res.items():
        rows += cdf_rows((scheme, mode), s.samples)
        if s.count:
            summary[f"{scheme}/{mode}"] = {"median_db": s.median(), "p5_db": s.percentile(0.05),
                                          "count": s.count}
    run.csv("cellfree_cdf.csv", ("scheme", "csi", "p", "sinr_db"), rows)
    run.json("cellfree_summary.json", {"scenario": scenario, "drops": len(seeds), "curves": summary})


def _u2u_task(args):
    params, sharing, eps_uav, eps_gue, seed = args
    return u2u.u2u_drop(params, sharing, u2u.default_power(eps_uav), u2u.default_power(eps_gue), seed)


def cmd_u2u(run: Run) -> None:
    base = params_from_section(u2u.U2uParams, run.sec("u2u"))
    study = run.sec("u2u.study", U2U_STUDY_KEYS)
    studies = _words(study.get("studies"), ("height", "epsilon", "rates", "wobble"))
    eps_gue = _num(study, "epsilon_gue", 0.6)
    seeds = drop_seeds(run.seed, run.drops(_num(study, "drops", 100, int)))
    summary: dict = {"drops": len(seeds)}

    def pooled(params, sharing, eps):
        rows = _pool_map(_u2u_task, [(params, sharing, eps, eps_gue, s) for s in seeds], run.jobs)
        return u2u.merge_u2u_drops(rows, params.coverage_threshold_db)

    if "height" in studies:
        eps = _num(study, "epsilon_uav", 0.6)
        rows, med = [], {}
        base_res = pooled(replace(base, pair_density_per_km2=0.0), u2u.SharingConfig(), eps)
        rows += cdf_rows(("none", "gue", "sinr_db"), base_res.gue_sinr.samples)
        for h in _floats(study.get("heights"), (50.0, 150.0)):
            r = pooled(replace(base, uav_height=h), u2u.SharingConfig(eta_u=1.0), eps)
            rows += cdf_rows((h, "gue", "sinr_db"), r.gue_sinr.samples)
            rows += cdf_rows((h, "u2u", "sinr_db"), r.u2u_sinr.samples)
            med[str(h)] = {"gue_median_db": r.gue_sinr.median(),
                           "u2u_median_db": r.u2u_sinr.median() if r.u2u_sinr.count else None}
        run.csv("u2u_height_cdf.csv", ("height_m", "tier", "metric", "p", "value"), rows)
        summary["height"] = {"baseline_gue_median_db": base_res.gue_sinr.median(), "by_height": med}
    if "epsilon" in studies:
        rows = []
        for e in _floats(study.get("epsilons"), np.round(np.arange(0.1, 1.0, 0.1), 1)):
            r = pooled(base, u2u.SharingConfig(eta_u=_num(study, "eta_u", 1.0)), e)
            rows.append((e, r.gue_coverage, r.u2u_coverage))
        run.csv("u2u_epsilon.csv", ("epsilon_uav", "gue_coverage", "u2u_coverage"), rows)
    if "rates" in studies:
        configs = [("overlay", u2u.SharingConfig("overlay"), 0.6),
                   ("overlay", u2u.SharingConfig("overlay"), 0.8),
                   ("underlay", u2u.SharingConfig(), 0.6),
                   ("underlay", u2u.SharingConfig(), 0.8)]
        rows = []
        for label, sharing, e in configs:
            r = pooled(base, sharing, e)
            rows.append((label, e, "GUE", r.gue_rate.percentile(0.05)))
            rows.append((label, e, "U2U", r.u2u_rate.percentile(0.05) if r.u2u_rate.count else 0.0))
        run.csv("u2u_rates.csv", ("sharing", "epsilon_uav", "tier", "p5_rate_bps"), rows)
    if "wobble" in studies:
        rows = []
        for dmax in _floats(study.get("delta_max"), (0.0, 1.0, 2.0)):
            for n in _floats(study.get("antennas"), (1, 2, 4, 8, 16, 32, 64, 128, 256)):
                cfg = u2u.WobbleConfig(int(n), dmax)
                se = u2u.wobble_spectral_efficiency(cfg, rng=np.random.default_rng([run.seed, int(n)]))
                rows.append((dmax, int(n), se))
        run.csv("u2u_wobble.csv", ("delta_max_deg", "n_antennas", "mean_se_bps_hz"), rows)
    run.json("u2u_summary.json", summary)


def cmd_mobility(run: Run) -> None:
    hyper = params_from_section(mob.QHyper, run.sec("qlearning"))
    params = params_from_section(mob.MobilityParams, run.sec("mobility"), hyper=hyper)
    res, problem = mob.run_mobility_study(params, run.seed)
    ho, rsrp, policy, summary = [], [], [], {}
    greedy = res.get((0.0, 1.0))
    for (w_ho, w_rsrp), ev in res.items():
        tag = f"{w_ho:g}/{w_rsrp:g}"
        ho += [(tag, i, int(c), float(r)) for i, (c, r) in enumerate(zip(ev.counts, ev.ratio))]
        rsrp += cdf_rows((tag,), ev.rsrp.samples)
        for r, t in np.ndindex(ev.cells.shape):
            prev = ev.cells[r, t - 1] if t else -1
            policy.append((tag, r, t, int(problem.routes[r, t]), int(prev), int(ev.cells[r, t])))
        summary[tag] = {"median_handovers": ev.handovers.median(),
                        "top_decile_ratio": mob.top_decile_ratio(ev),
                        "rsrp_p5_dbm": ev.rsrp.percentile(0.05),
                        "rsrp_min_dbm": float(ev.rsrp.samples[0])}
        if greedy is not None:
            summary[tag]["rsrp_p5_gap_db"] = ev.rsrp.percentile(0.05) - greedy.rsrp.percentile(0.05)
    run.csv("mobility_handovers.csv", ("weights", "route", "handovers", "ratio"), ho)
    run.csv("mobility_rsrp_cdf.csv", ("weights", "p", "rsrp_dbm"), rsrp)
    run.csv("mobility_policy.csv", ("weights", "route", "step", "grid_index", "previous_cell",
                                    "serving_cell"), policy)
    run.json("mobility_summary.json", summary)


def cmd_thz(run: Run) -> None:
    s = run.sec("thz", THZ_KEYS)
    n = _num(s, "n_points", 31, int)
    grid = np.geomspace(_num(s, "d_min", 10.0), _num(s, "d_max", 10000.0), n)
    p = _num(s, "tx_power_dbm", 23.0)
    cap = _num(s, "se_cap", thz.DEFAULT_SE_CAP)
    bands = (replace(thz.BAND_28, tx_power_dbm=p, se_cap=cap,
                     noise_figure_db=_num(s, "nf_28_db", 7.0)),
             replace(thz.BAND_140, tx_power_dbm=p, se_cap=cap,
                     noise_figure_db=_num(s, "nf_140_db", 10.0)))
    rows = thz.rate_vs_distance_sweep(bands, grid)
    header = ("fc", "mode", "spacing", "d_m", "rate_bps", "rank_effective")
    run.csv("thz_rates.csv", header, [tuple(r[k] for k in header) for r in rows])


COMMANDS = {"pattern": cmd_pattern, "mmimo": cmd_mmimo, "cellfree": cmd_cellfree,
            "u2u": cmd_u2u, "mobility": cmd_mobility, "thz": cmd_thz}


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="uavsim", description="UAV cellular system-level studies")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="INI config or a manifest.json to replay")
        p.add_argument("--seed", type=int, help="master seed (overrides [run] seed)")
        p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
        p.add_argument("--out", default="out")
    return ap


def _load(args):
    """Config parser, raw text, config path and master seed."""
    if args.config is None:
        text, path = "", None
    elif args.config.endswith(".json"):
        try:
            man = json.loads(Path(args.config).read_text())
            text, path = man["config_text"], man.get("config_path")
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"unreadable manifest {args.config}: {exc}") from exc
        if man.get("subcommand") != args.command:
            raise ConfigError(f"manifest is for {man.get('subcommand')!r}, not {args.command!r}")
        if args.seed is None:
            args.seed = int(man["master_seed"])
    else:
        _, text = read_config(args.config)
        path = args.config
    cp = parse_config(text, path or "<empty>")
    run_sec = section(cp, "run")
    if set(run_sec) - set(RUN_KEYS):
        raise ConfigError(f"[run]: unknown keys {sorted(set(run_sec) - set(RUN_KEYS))}")
    if _num(run_sec, "drops", 1, int) < 1:
        raise ConfigError("drops must be >= 1")
    seed = args.seed if args.seed is not None else _num(run_sec, "seed", 0, int)
    if seed < 0:
        raise ConfigError("seed must be non-negative")
    return cp, text, path, seed


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        cp, text, path, seed = _load(args)
        run = Run(args.command, cp, text, path, seed, args.jobs, args.out)
        COMMANDS[args.command](run)
        write_manifest(run.out, args.command, path, text, seed, __version__, run.outputs, args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
