"""Deterministic result emission: CSV tables and JSON reports.

Floats are rendered with 17 significant digits so a config file plus
master seed reproduces every output byte for byte; every table carries
the config hash and package version in a header comment.
"""

import hashlib
import json
import os

import numpy as np


def fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def config_hash(raw_text: str) -> str:
    return hashlib.sha256(raw_text.encode("utf-8")).hexdigest()[:16]


def _version() -> str:
    from . import __version__
    return __version__


def write_csv(path: str, columns: dict, cfg_hash: str = "") -> None:
    """columns: ordered mapping name -> sequence; all equal length."""
    names = list(columns)
    rows = len(columns[names[0]]) if names else 0
    lines = [f"# fieldroad {_version()} config={cfg_hash}",
             ",".join(names)]
    for r in range(rows):
        lines.append(",".join(fmt(columns[n][r]) for n in names))
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(fmt(obj)) if obj == obj else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return obj


def write_json(path: str, payload: dict, cfg_hash: str = "") -> None:
    payload = dict(payload)
    payload["_meta"] = {"version": _version(), "config": cfg_hash}
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
