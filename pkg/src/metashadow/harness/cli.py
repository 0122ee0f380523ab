"""Command-line entry point.

Exit codes: 0 success, 1 domain error (bad data, missing file, no seed),
2 bad usage.  Every command writes a ``manifest.txt`` next to its outputs.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from ..calibrate import CalibrationResult, run_calibration, simulate_calibration
from ..errors import DomainError
from ..measure.povm import OCTAHEDRON_LABELS, OCTAHEDRON_VECTORS
from ..measure.sampling import RecordSet, sample_shots
from .. import metadesign as md
from ..qcore import PAULIS, fidelity, num_qubits
from ..reconstruct.mle import mle_fit
from ..reconstruct.sgqt import ProjectiveSampler, sgqt
from ..reconstruct.slst import slst
from ..reconstruct.trace import write_state_matrix
from ..shadows import estimate_observable
from . import config as cfgmod
from .config import ExperimentConfig
from .experiments import as_density, parse_state, run_experiment
from .grids import bloch_ket
from .results import write_csv, write_manifest

DEFAULT_OUT = "out"
RECORDS_NAME = "records.jsonl"
CALIBRATION_NAME = "calibration.txt"
STATE_NAME = "state.txt"
TRACE_NAME = "trace.csv"
ESTIMATE_COLUMNS = ("experiment_id", "quantity", "observable_descriptor", "M", "value", "std_error", "seed")

_PAULI_LETTERS = dict(zip("IXYZ", PAULIS))


def parse_observable(text: str, n_qubits: int):
    """``pauli:XZ`` (tensor product, one letter per qubit) or ``proj:kappa,nu`` (1 qubit)."""
    kind, _, arg = text.partition(":")
    if kind == "pauli":
        if len(arg) != n_qubits or set(arg) - set(_PAULI_LETTERS):
            raise DomainError(f"observable {text!r} needs {n_qubits} letters from IXYZ")
        return [_PAULI_LETTERS[c] for c in arg]
    if kind == "proj":
        if n_qubits != 1:
            raise DomainError("proj observables are single-qubit")
        try:
            kappa, nu = (float(x) for x in arg.split(","))
        except ValueError:
            raise DomainError(f"malformed observable {text!r}") from None
        k = bloch_ket(2 * kappa, nu)
        return np.outer(k, k.conj())
    raise DomainError(f"unknown observable {text!r}; use pauli:<letters> or proj:kappa,nu")


def _config(args) -> ExperimentConfig:
    cfg = cfgmod.load(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg = cfg.with_(seed=args.seed)
    if args.records is not None:
        cfg = cfg.with_(records=args.records)
    if args.calibration is not None:
        cfg = cfg.with_(calibration=args.calibration)
    cfg.require_seed()
    return cfg


def _out(args, cfg) -> Path:
    out = Path(args.out or cfg.out or DEFAULT_OUT)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _records(cfg) -> RecordSet:
    if cfg.records is None:
        raise DomainError("no records file; pass --records or set 'records' in the config")
    return RecordSet.load(cfg.records)


def _calibration(cfg) -> CalibrationResult | None:
    return None if cfg.calibration is None else CalibrationResult.load(cfg.calibration)


def _finish(out: Path, cfg: ExperimentConfig, command: str, paths: list) -> int:
    write_manifest(out, cfg, command, paths)
    for p in paths:
        print(p)
    return 0


# -- commands -------------------------------------------------------------------


def cmd_sample(args, cfg) -> int:
    out = _out(args, cfg)
    seed = cfg.require_seed()
    state = parse_state(cfg.state, seed)
    records = sample_shots(state, cfg.povm, cfg.M, seed, cfg.noise_model(), state_descriptor=cfg.state)
    return _finish(out, cfg, "sample", [records.save(out / RECORDS_NAME)])


def cmd_estimate(args, cfg) -> int:
    out = _out(args, cfg)
    records = _records(cfg)
    O = parse_observable(cfg.observable, records.n_qubits)
    rep = estimate_observable(records, O, _calibration(cfg), descriptor=cfg.observable)
    base = {"experiment_id": cfg.experiment_id, "observable_descriptor": rep.observable_descriptor, "M": rep.M,
            "seed": cfg.seed}
    rows = [
        {**base, "quantity": "mean", "value": rep.mean, "std_error": rep.std_error},
        {**base, "quantity": "variance", "value": rep.variance, "std_error": None},
    ]
    path = write_csv(out / "estimate.csv", ESTIMATE_COLUMNS, rows)
    return _finish(out, cfg, "estimate", [path])


def _run_named(args, cfg, kind: str) -> int:
    out = _out(args, cfg)
    _, paths = run_experiment(cfg.with_(experiment=kind), out)
    for p in paths:
        print(p)
    return 0


def cmd_calibrate(args, cfg) -> int:
    out = _out(args, cfg)
    if cfg.records is not None:
        calib = run_calibration(_records(cfg), seed=cfg.seed)
    else:
        n = num_qubits(as_density(parse_state(cfg.state, cfg.seed)).shape[0])
        calib = simulate_calibration(n, cfg.M_prime, cfg.seed, cfg.noise_model(), cfg.povm)
    return _finish(out, cfg, "calibrate", [calib.save(out / CALIBRATION_NAME)])


def _reference(args, cfg):
    if not args.reference:
        return None
    return as_density(parse_state(cfg.state, cfg.seed))


def cmd_slst(args, cfg) -> int:
    out = _out(args, cfg)
    records = _records(cfg)
    trace = slst(records, cfg.spsa(), _calibration(cfg), init=cfg.init, model=cfg.model,
                 reference=_reference(args, cfg))
    paths = [trace.to_csv(out / TRACE_NAME), write_state_matrix(out / STATE_NAME, trace.final_state)]
    return _finish(out, cfg, "slst", paths)


def cmd_sgqt(args, cfg) -> int:
    out = _out(args, cfg)
    state = parse_state(cfg.state, cfg.seed)
    rho = as_density(state)
    sampler = ProjectiveSampler(state, cfg.seed)
    spsa = cfg.with_(spsa_preset=cfg.sgqt_preset).spsa()
    trace = sgqt(sampler, rho.shape[0], spsa, cfg.runs_per_iteration, reference=rho if args.reference else None)
    paths = [trace.to_csv(out / TRACE_NAME), write_state_matrix(out / STATE_NAME, trace.final_state)]
    return _finish(out, cfg, "sgqt", paths)


def cmd_mle(args, cfg) -> int:
    out = _out(args, cfg)
    res = mle_fit(_records(cfg))
    row = {"experiment_id": cfg.experiment_id, "seed": cfg.seed, "log_likelihood": res.log_likelihood,
           "grad_norm": res.grad_norm, "iterations": res.iterations, "converged": res.converged}
    if args.reference:
        row["fidelity_vs_reference"] = fidelity(as_density(parse_state(cfg.state, cfg.seed)), res.state)
    paths = [write_state_matrix(out / STATE_NAME, res.state), write_csv(out / "mle.csv", tuple(row), [row])]
    return _finish(out, cfg, "mle", paths)


def cmd_metadesign(args, cfg) -> int:
    out = _out(args, cfg)
    paths = []
    for region in md.region_layout():
        for sign, prof in zip(("plus", "minus"), md.region_phase_profiles(region)):
            paths.append(md.write_phase_csv(prof, out / f"phase_{region.name}_{sign}.csv"))
    paths.append(md.write_layout_manifest(out / "layout.txt"))
    rows = []
    for label, ket in zip(OCTAHEDRON_LABELS, OCTAHEDRON_VECTORS):
        s = md.stokes_from_intensities(md.ideal_router_intensities(ket))
        rows.append({"experiment_id": cfg.experiment_id, "seed": cfg.seed, "input": label,
                     "s1": s.s1, "s2": s.s2, "s3": s.s3})
    paths.append(write_csv(out / "stokes.csv", ("experiment_id", "seed", "input", "s1", "s2", "s3"), rows))
    return _finish(out, cfg, "metadesign", paths)


def cmd_experiment(args, cfg) -> int:
    return _run_named(args, cfg, cfg.experiment)


COMMANDS = {
    "sample": (cmd_sample, "simulate measurement records"),
    "estimate": (cmd_estimate, "shadow estimate of an observable"),
    "variance": (lambda a, c: _run_named(a, c, "variance"), "shadow-norm convergence in M"),
    "norm-sweep": (lambda a, c: _run_named(a, c, "norm_sweep"), "shadow norm across observables"),
    "calibrate": (cmd_calibrate, "estimate noisy-channel coefficients"),
    "slst": (cmd_slst, "self-learning shadow tomography on records"),
    "sgqt": (cmd_sgqt, "self-guided tomography with a simulated analyzer"),
    "mle": (cmd_mle, "maximum-likelihood reconstruction of records"),
    "metadesign": (cmd_metadesign, "metasurface phase maps, layout and Stokes check"),
    "experiment": (cmd_experiment, "run the driver named in the config"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", help=f"output directory (default: {DEFAULT_OUT})")
    common.add_argument("--records", help="record file to read")
    common.add_argument("--calibration", help="calibration file to read")
    common.add_argument("--reference", action="store_true", help="log fidelity against the config state")
    parser = argparse.ArgumentParser(prog="metashadow", description="Classical-shadow tomography toolkit.")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True
    for name, (_, text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=text, description=text)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else 2
    try:
        cfg = _config(args)
        return COMMANDS[args.command][0](args, cfg)
    except (DomainError, FileNotFoundError) as e:
        msg = str(e) if not isinstance(e, FileNotFoundError) else f"file not found: {e.filename}"
        print(f"metashadow {args.command}: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
