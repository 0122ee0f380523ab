"""Optimization traces and their on-disk form."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DomainError


@dataclass(eq=False)
class ReconstructionTrace:
    """Per-iteration history of a reconstruction run.

    ``fidelities`` holds NaN where no reference state was supplied.
    ``runs_consumed`` counts experimental runs spent by online methods.
    """

    ks: list[int] = field(default_factory=list)
    costs: list[float] = field(default_factory=list)
    fidelities: list[float] = field(default_factory=list)
    final_state: np.ndarray | None = None
    final_params: np.ndarray | None = None
    runs_consumed: int = 0
    stopped_early: bool = False
    method: str = ""

    def append(self, k: int, cost: float, fid: float = float("nan")) -> None:
        self.ks.append(int(k))
        self.costs.append(float(cost))
        self.fidelities.append(float(fid))

    def __len__(self) -> int:
        return len(self.ks)

    @property
    def final_cost(self) -> float:
        return self.costs[-1] if self.costs else float("nan")

    @property
    def final_fidelity(self) -> float:
        return self.fidelities[-1] if self.fidelities else float("nan")

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "cost", "fidelity_vs_reference"])
            for k, c, f in zip(self.ks, self.costs, self.fidelities):
                w.writerow([k, repr(c), "" if np.isnan(f) else repr(f)])
        return path


def write_state_matrix(path, rho: np.ndarray) -> Path:
    """Row-major text matrix; one row per line, entries ``re,im`` separated by spaces."""
    rho = np.asarray(rho, dtype=complex)
    lines = [" ".join(f"{float(z.real)!r},{float(z.imag)!r}" for z in row) for row in rho]
    path = Path(path)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_state_matrix(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise DomainError(f"state file not found: {path}")
    rows = []
    for ln in path.read_text(encoding="utf-8").splitlines():
        if not ln.strip():
            continue
        row = []
        for tok in ln.split():
            re, im = tok.split(",")
            row.append(complex(float(re), float(im)))
        rows.append(row)
    mat = np.array(rows, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise DomainError(f"state file {path} does not hold a square matrix")
    return mat
