"""Experiment drivers: Monte-Carlo studies assembled from the library modules.

Every driver splits its work into tasks keyed by (grid point, repetition,
item).  Each task derives its own seeds from the master seed and its key, so a
task's result does not depend on which worker ran it or in what order, and
results are reduced in key order.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from ..calibrate import simulate_calibration
from ..errors import DomainError
from ..measure.noise import measurement_bias
from ..measure.sampling import sample_shots
from ..qcore import (
    fidelity,
    ket_to_dm,
    make_pure_state,
    make_two_photon_state,
    num_qubits,
    random_density_matrix,
    random_pure_state,
)
from ..reconstruct.mle import mle
from ..reconstruct.sgqt import ProjectiveSampler, sgqt
from ..reconstruct.slst import slst
from ..seeding import derive_rng, derive_seed
from ..shadows import shadow_norm_empirical_many
from .config import ExperimentConfig
from .grids import observable_grid, state_grid
from .results import write_csv, write_manifest

PLUS_PROJECTOR = 0.5 * np.ones((2, 2), dtype=complex)


@dataclass(frozen=True, eq=False)
class Table:
    columns: tuple[str, ...]
    rows: tuple[dict, ...]

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows])

    def where(self, **match) -> "Table":
        rows = tuple(r for r in self.rows if all(r[k] == v for k, v in match.items()))
        return Table(self.columns, rows)

    def write(self, path) -> Path:
        return write_csv(path, self.columns, self.rows)


def _map(fn: Callable, tasks: Sequence, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=1))


def _rows(cfg: ExperimentConfig, dicts) -> tuple[dict, ...]:
    head = {"experiment_id": cfg.experiment_id, "seed": cfg.require_seed()}
    return tuple({**head, **d} for d in dicts)


# -- states ---------------------------------------------------------------------


def parse_state(descriptor: str, seed: int = 0) -> np.ndarray:
    """Build a state from a descriptor.

    Forms: ``psi:gamma,phi`` (single-qubit ket), ``eta:value`` (two-photon
    ket), ``basis:0101`` (computational ket), ``random_pure:N`` and
    ``random_mixed:N`` (drawn from ``seed``).
    """
    kind, _, arg = descriptor.partition(":")
    try:
        if kind == "psi":
            g, p = (float(x) for x in arg.split(","))
            return make_pure_state(g, p)
        if kind == "eta":
            return make_two_photon_state(float(arg))
        if kind == "basis":
            if not arg or set(arg) - {"0", "1"}:
                raise ValueError(arg)
            ket = np.zeros(2 ** len(arg), dtype=complex)
            ket[int(arg, 2)] = 1.0
            return ket
        if kind in ("random_pure", "random_mixed"):
            n = int(arg)
            if n < 1:
                raise ValueError(arg)
            rng = derive_rng(seed, "state", descriptor)
            if kind == "random_pure":
                return random_pure_state(2**n, rng)
            return random_density_matrix(2**n, rng)
    except ValueError:
        raise DomainError(f"malformed state descriptor {descriptor!r}") from None
    raise DomainError(f"unknown state descriptor {descriptor!r}")


def as_density(state: np.ndarray) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    return ket_to_dm(state) if state.ndim == 1 else state


# -- variance convergence -------------------------------------------------------


def _variance_task(task) -> float:
    cfg, i_m, m, rep = task
    states = state_grid(cfg.n_states, cfg.require_seed(), cfg.state_lattice).states
    s = derive_seed(cfg.require_seed(), "variance", i_m, rep)
    return float(shadow_norm_empirical_many(states, [PLUS_PROJECTOR], cfg.povm, m, s)[0])


def run_variance_convergence(cfg: ExperimentConfig) -> Table:
    """Empirical shadow norm of |+><+| over the state grid versus M."""
    tasks = [(cfg, i, m, r) for i, m in enumerate(cfg.M_grid) for r in range(cfg.repetitions)]
    vals = np.array(_map(_variance_task, tasks, cfg.workers)).reshape(len(cfg.M_grid), cfg.repetitions)
    rows = (
        {"M": m, "mean": v.mean(), "std": v.std(ddof=1) if v.size > 1 else 0.0, "repetitions": v.size}
        for m, v in zip(cfg.M_grid, vals)
    )
    return Table(("experiment_id", "seed", "M", "mean", "std", "repetitions"), _rows(cfg, rows))


# -- observable sweep ----------------------------------------------------------


NORM_SWEEP_POVMS = ("octahedron", "sic")


def _norm_task(task) -> np.ndarray:
    cfg, povm, i = task
    seed = cfg.require_seed()
    state = state_grid(cfg.n_states, seed, cfg.state_lattice).states[i]
    obs = observable_grid(cfg.n_observables, seed).observables
    # state i of the grid, exactly as shadow_norm_empirical_many would sample it
    base = derive_seed(seed, "norm-sweep", povm)
    vals = shadow_norm_empirical_many([state], obs, povm, cfg.M, derive_seed(base, i))
    return vals


def run_norm_sweep(cfg: ExperimentConfig) -> Table:
    """Per-observable empirical shadow norm for the octahedron and SIC POVMs."""
    tasks = [(cfg, p, i) for p in NORM_SWEEP_POVMS for i in range(cfg.n_states)]
    out = np.array(_map(_norm_task, tasks, cfg.workers)).reshape(len(NORM_SWEEP_POVMS), cfg.n_states, -1)
    best = out.max(axis=1)
    grid = observable_grid(cfg.n_observables, cfg.require_seed())
    rows = (
        {"observable_index": j, "kappa": grid.kappa[j], "nu": grid.nu[j], "octahedron": best[0, j], "sic": best[1, j]}
        for j in range(len(grid))
    )
    cols = ("experiment_id", "seed", "observable_index", "kappa", "nu", "octahedron", "sic")
    return Table(cols, _rows(cfg, rows))


# -- fidelity versus M ------------------------------------------------------------


FIDELITY_METHODS = ("slst", "sgqt", "mle")


def _fidelity_task(task) -> tuple[float, float, float]:
    cfg, i_m, m, rep, i = task
    seed = cfg.require_seed()
    psi = state_grid(cfg.n_states, seed, cfg.state_lattice).states[i]
    rho = ket_to_dm(psi)
    key = (i_m, rep, i)

    records = sample_shots(psi, cfg.povm, m, derive_seed(seed, "fc-slst", *key))
    spsa = cfg.spsa(seed=derive_seed(seed, "fc-slst-spsa", *key))
    f_slst = fidelity(rho, slst(records, spsa, model=cfg.model, init=cfg.init).final_state)

    # matched budget: one run per projection, M runs in total
    k = max(1, m // cfg.runs_per_iteration)
    sampler = ProjectiveSampler(psi, derive_seed(seed, "fc-sgqt", *key))
    sg_cfg = cfg.spsa(cfg.sgqt_preset, k_max=k, seed=derive_seed(seed, "fc-sgqt-spsa", *key))
    f_sgqt = fidelity(rho, sgqt(sampler, 2, sg_cfg, cfg.runs_per_iteration).final_state)

    noise = measurement_bias(cfg.mle_bias) if cfg.mle_bias > 0 else None
    biased = sample_shots(psi, cfg.povm, m, derive_seed(seed, "fc-mle", *key), noise)
    f_mle = fidelity(rho, mle(biased))
    return f_slst, f_sgqt, f_mle


def run_fidelity_curves(cfg: ExperimentConfig) -> Table:
    """Mean fidelity of SLST, SGQT and biased-data MLE versus the run budget M.

    Per repetition the fidelities are averaged (and medianed) over the state
    grid; rows report the mean and std over repetitions of the averages and
    the median over repetitions of the per-repetition medians.
    """
    n, reps = cfg.n_states, cfg.repetitions
    tasks = [(cfg, a, m, r, i) for a, m in enumerate(cfg.M_grid) for r in range(reps) for i in range(n)]
    vals = np.array(_map(_fidelity_task, tasks, cfg.workers)).reshape(len(cfg.M_grid), reps, n, 3)
    rows = []
    for a, m in enumerate(cfg.M_grid):
        for j, method in enumerate(FIDELITY_METHODS):
            per_rep = vals[a, :, :, j]
            means = per_rep.mean(axis=1)
            rows.append(
                {
                    "method": method,
                    "M": m,
                    "mean_fidelity": means.mean(),
                    "std_fidelity": means.std(ddof=1) if reps > 1 else 0.0,
                    "median_fidelity": float(np.median(np.median(per_rep, axis=1))),
                    "n_states": n,
                    "repetitions": reps,
                }
            )
    cols = ("experiment_id", "seed", "method", "M", "mean_fidelity", "std_fidelity", "median_fidelity",
            "n_states", "repetitions")
    return Table(cols, _rows(cfg, rows))


# -- robust versus plain ----------------------------------------------------------


def noise_grid(cfg: ExperimentConfig) -> list[tuple[float, float]]:
    """(delta_bar, sigma) pairs: sigma from 0 to delta_bar in ``sigma_steps`` steps."""
    pts = []
    for db in cfg.delta_grid:
        if db == 0:
            pts.append((0.0, 0.0))
            continue
        for s in np.linspace(0.0, db, cfg.sigma_steps + 1):
            pts.append((float(db), float(np.round(s, 12))))
    return pts


def _robust_task(task) -> tuple[float, float]:
    cfg, i_pt, db, sg, rep = task
    seed = cfg.require_seed()
    state = parse_state(cfg.state, seed)
    rho = as_density(state)
    n = num_qubits(rho.shape[0])
    noise = cfg.noise_model(db, sg) if (db > 0 or sg > 0) else None
    key = (i_pt, rep)
    records = sample_shots(state, cfg.povm, cfg.M, derive_seed(seed, "rb-data", *key), noise)
    calib = simulate_calibration(n, cfg.M_prime, derive_seed(seed, "rb-calib", *key), noise, cfg.povm)
    # both reconstructions share the SPSA perturbation sequence
    spsa = cfg.spsa(seed=derive_seed(seed, "rb-spsa", *key))
    plain = slst(records, spsa, model=cfg.model, init=cfg.init).final_state
    robust = slst(records, spsa, calib=calib, model=cfg.model, init=cfg.init).final_state
    return fidelity(rho, plain), fidelity(rho, robust)


def run_robust_comparison(cfg: ExperimentConfig) -> Table:
    """Plain and calibrated SLST under Pauli noise, one row per repetition."""
    pts = noise_grid(cfg)
    tasks = [(cfg, i, db, sg, r) for i, (db, sg) in enumerate(pts) for r in range(cfg.repetitions)]
    vals = _map(_robust_task, tasks, cfg.workers)
    rows = (
        {"delta_bar": t[2], "sigma": t[3], "repetition": t[4], "plain_fidelity": v[0], "robust_fidelity": v[1]}
        for t, v in zip(tasks, vals)
    )
    cols = ("experiment_id", "seed", "delta_bar", "sigma", "repetition", "plain_fidelity", "robust_fidelity")
    return Table(cols, _rows(cfg, rows))


# -- scaling with M and N ---------------------------------------------------------


def _scaling_task(task) -> float:
    cfg, n, i_m, m, i = task
    seed = cfg.require_seed()
    psi = random_pure_state(2**n, derive_rng(seed, "scaling-state", n, i))
    records = sample_shots(psi, cfg.povm, m, derive_seed(seed, "scaling", n, i_m, i))
    spsa = cfg.with_(spsa_preset=cfg.spsa_preset.replace("{n}", str(n))).spsa(seed=derive_seed(seed, "scaling-spsa", n, i_m, i))
    tau = slst(records, spsa, model=cfg.model, init=cfg.init).final_state
    return 1.0 - fidelity(ket_to_dm(psi), tau)


def run_scaling_study(cfg: ExperimentConfig) -> Table:
    """Median SLST infidelity over random pure states per (N, M).

    ``spsa_preset`` may contain ``{n}``, replaced by the qubit number.
    """
    if any(n > 4 for n in cfg.n_qubits_grid):
        raise DomainError("the scaling study is limited to N <= 4 qubits")
    tasks = [
        (cfg, n, a, m, i)
        for n in cfg.n_qubits_grid
        for a, m in enumerate(cfg.M_grid)
        for i in range(cfg.n_states)
    ]
    vals = np.array(_map(_scaling_task, tasks, cfg.workers)).reshape(len(cfg.n_qubits_grid), len(cfg.M_grid), -1)
    rows = (
        {
            "n_qubits": n,
            "M": m,
            "median_infidelity": float(np.median(vals[a, b])),
            "mean_infidelity": float(vals[a, b].mean()),
            "n_states": cfg.n_states,
        }
        for a, n in enumerate(cfg.n_qubits_grid)
        for b, m in enumerate(cfg.M_grid)
    )
    cols = ("experiment_id", "seed", "n_qubits", "M", "median_infidelity", "mean_infidelity", "n_states")
    return Table(cols, _rows(cfg, rows))


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of log(y) against log(x)."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    return float(np.polyfit(lx, ly, 1)[0])


# -- dispatch -------------------------------------------------------------------


DRIVERS: dict[str, Callable[[ExperimentConfig], Table]] = {
    "variance": run_variance_convergence,
    "norm_sweep": run_norm_sweep,
    "fidelity_curves": run_fidelity_curves,
    "robust": run_robust_comparison,
    "scaling": run_scaling_study,
}


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> tuple[Table, list[Path]]:
    """Run the driver named by ``cfg.experiment``; write CSV and manifest if ``out_dir``."""
    try:
        driver = DRIVERS[cfg.experiment]
    except KeyError:
        raise DomainError(f"config names no runnable experiment (got {cfg.experiment!r})") from None
    table = driver(cfg)
    paths: list[Path] = []
    if out_dir is not None:
        out_dir = Path(out_dir)
        paths.append(table.write(out_dir / f"{cfg.experiment_id}.csv"))
        paths.append(write_manifest(out_dir, cfg, f"experiment {cfg.experiment}", paths))
    return table, paths
