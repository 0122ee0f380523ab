"""CSV tables and run manifests.

Both are written with fixed column order, ``repr`` floats and ``\\n`` line
endings, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import platform
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy

from .. import __version__
from ..errors import DomainError
from .config import ExperimentConfig, config_hash, dumps

MANIFEST_NAME = "manifest.txt"


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "" if np.isnan(v) else repr(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path, columns: Sequence[str], rows: Iterable[Mapping]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            missing = [c for c in columns if c not in row]
            if missing:
                raise DomainError(f"row lacks columns {missing}")
            w.writerow([_cell(row[c]) for c in columns])
    return path


def read_csv(path) -> list[dict[str, str]]:
    path = Path(path)
    if not path.exists():
        raise DomainError(f"CSV file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def start_params(cfg: ExperimentConfig) -> str:
    """The config on one line, ``key=value`` pairs separated by ``; ``."""
    pairs = (ln.replace(" = ", "=", 1) for ln in dumps(cfg.with_(out=None)).splitlines())
    return "; ".join(pairs)


def write_manifest(out_dir, cfg: ExperimentConfig, command: str, outputs: Sequence) -> Path:
    """``key = value`` record of what produced the files in ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = {
        "artifact_version": __version__,
        "command": command,
        "experiment_id": cfg.experiment_id,
        "seed": "none" if cfg.seed is None else str(cfg.seed),
        "config_hash": config_hash(cfg),
        "start_params": start_params(cfg),
        "outputs": ", ".join(Path(p).name for p in outputs),
        "python_version": platform.python_version(),
        "numpy_version": np.__version__,
        "scipy_version": scipy.__version__,
    }
    path = out_dir / MANIFEST_NAME
    path.write_text("".join(f"{k} = {v}\n" for k, v in lines.items()), encoding="utf-8")
    return path


def read_manifest(path) -> dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise DomainError(f"manifest not found: {path}")
    out = {}
    for ln in path.read_text(encoding="utf-8").splitlines():
        if " = " in ln:
            k, v = ln.split(" = ", 1)
            out[k] = v
    return out
