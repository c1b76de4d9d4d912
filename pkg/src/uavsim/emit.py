"""Deterministic CSV/JSON writers and run manifests.

Every output carries the manifest hash, which covers the subcommand,
config text, master seed, package version and schema version but not the
wall-clock time, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
import time
from pathlib import Path

import numpy as np

from .stats import CdfSummary

SCHEMA_VERSION = 1


def _atomic_write(path: Path, data: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fmt(v) -> str:
    """Shortest round-trip text for numbers; plain str otherwise."""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def manifest_hash(subcommand: str, config_text: str, seed: int, version: str) -> str:
    blob = json.dumps({"subcommand": subcommand, "config": config_text, "seed": int(seed),
                       "version": version, "schema_version": SCHEMA_VERSION}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def write_csv(path: Path, header, rows, mhash: str) -> Path:
    lines = [f"# schema_version={SCHEMA_VERSION} manifest_hash={mhash}", ",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    _atomic_write(Path(path), "\n".join(lines) + "\n")
    return Path(path)


def write_json(path: Path, payload: dict, mhash: str) -> Path:
    body = {"schema_version": SCHEMA_VERSION, "manifest_hash": mhash, **_jsonable(payload)}
    _atomic_write(Path(path), json.dumps(body, sort_keys=True, indent=2) + "\n")
    return Path(path)


def file_sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out_dir: Path, subcommand: str, config_path: str | None, config_text: str,
                   seed: int, version: str, outputs: list[Path], jobs: int) -> Path:
    """``manifest.json`` with everything needed to replay the run."""
    mhash = manifest_hash(subcommand, config_text, seed, version)
    out_dir = Path(out_dir)
    body = {
        "schema_version": SCHEMA_VERSION,
        "manifest_hash": mhash,
        "subcommand": subcommand,
        "config_path": config_path,
        "config_text": config_text,
        "master_seed": int(seed),
        "code_version": version,
        "jobs": int(jobs),
        "outputs": {p.name: file_sha256(p) for p in sorted(outputs)},
        "wall_clock": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    path = out_dir / "manifest.json"
    _atomic_write(path, json.dumps(body, sort_keys=True, indent=2) + "\n")
    return path


def cdf_rows(label: tuple, samples, n_points: int = 100):
    """Quantile rows ``label + (p, value)`` at probabilities ``(i + 0.5) / n_points``."""
    s = CdfSummary(samples)
    if not s.count:
        return []
    ps = (np.arange(n_points) + 0.5) / n_points
    return [label + (float(p), s.percentile(float(p))) for p in ps]
