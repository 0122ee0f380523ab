"""Flat ``key = value`` run configuration.

Format: UTF-8 text, one ``key = value`` per line, ``#`` starts a comment.
Lists are comma separated.  Unknown keys are rejected so typos do not pass
silently.  :func:`dumps` writes every key in a fixed order, so
``dumps(loads(text))`` is a fixed point and its SHA-256 is the config hash.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields, replace
from pathlib import Path

from ..errors import DomainError
from ..measure.noise import NoiseModel
from ..reconstruct.spsa import SpsaConfig, preset

EXPERIMENTS = ("none", "variance", "norm_sweep", "fidelity_curves", "robust", "scaling")
NOISE_KINDS = ("none", "pauli")
_SPSA_OVERRIDES = ("a1", "a2", "a3", "b1", "b2")


def _int(s: str) -> int:
    # exact for plain integers, float syntax such as 1e4 must be integral
    s = s.strip()
    try:
        return int(s)
    except ValueError:
        v = float(s)
        if not v.is_integer():
            raise ValueError(f"not an integer: {s!r}") from None
        return int(v)


def _int_list(s: str) -> tuple[int, ...]:
    return tuple(_int(x) for x in s.split(",") if x.strip())


def _float_list(s: str) -> tuple[float, ...]:
    return tuple(float(x) for x in s.split(",") if x.strip())


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("true", "yes", "1"):
        return True
    if v in ("false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _opt_float(s: str) -> float | None:
    return None if s.strip() in ("", "none") else float(s)


def _opt_int(s: str) -> int | None:
    return None if s.strip() in ("", "none") else _int(s)


def _opt_str(s: str) -> str | None:
    return None if s.strip() in ("", "none") else s.strip()


def _fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_fmt(v) for v in value)
    return str(value)


@dataclass(frozen=True)
class ExperimentConfig:
    """Every knob a driver or CLI command reads.

    ``seed`` has no default: runs are never seeded from the clock.
    SPSA gains come from ``spsa_preset`` with optional per-key overrides.
    """

    seed: int | None = None
    experiment: str = "none"
    experiment_id: str = "run"
    state: str = "psi:0.91,0.12"
    povm: str = "octahedron"
    M: int = 1000
    M_prime: int = 2000
    k_max: int | None = None
    spsa_preset: str = "single_qubit"
    a1: float | None = None
    a2: float | None = None
    a3: float | None = None
    b1: float | None = None
    b2: float | None = None
    model: str = "cholesky"
    init: str = "spectral"
    noise: str = "none"
    delta_bar: float = 0.0
    sigma: float = 0.0
    observable: str = "pauli:X"
    repetitions: int = 5
    workers: int = 1
    M_grid: tuple[int, ...] = (16, 32, 64, 128, 256, 512, 1024, 2048, 4096, 10000)
    n_states: int = 20
    state_lattice: bool = True
    n_observables: int = 128
    delta_grid: tuple[float, ...] = (0.0, 0.05, 0.1)
    sigma_steps: int = 5
    n_qubits_grid: tuple[int, ...] = (2, 3, 4)
    sgqt_preset: str = "sgqt_single_qubit"
    runs_per_iteration: int = 7
    mle_bias: float = 0.1
    records: str | None = None
    calibration: str | None = None
    out: str | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise DomainError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        if self.noise not in NOISE_KINDS:
            raise DomainError(f"unknown noise {self.noise!r}; choose from {NOISE_KINDS}")
        for name in ("M", "M_prime", "repetitions", "workers", "n_states", "n_observables", "sigma_steps"):
            if getattr(self, name) < 1:
                raise DomainError(f"{name} must be at least 1")
        if any(m < 1 for m in self.M_grid):
            raise DomainError("M_grid entries must be at least 1")
        if not 0.0 <= self.mle_bias <= 1.0:
            raise DomainError("mle_bias must lie in [0, 1]")

    def require_seed(self) -> int:
        if self.seed is None:
            raise DomainError("config has no seed; set 'seed = <int>' or pass --seed")
        return int(self.seed)

    def spsa(self, name: str | None = None, **changes) -> SpsaConfig:
        """SPSA settings: preset, then config overrides, then ``changes``.

        The ``a1`` ... ``b2`` and ``k_max`` overrides belong to ``spsa_preset``;
        they are not applied when another preset is named explicitly.
        """
        over = {}
        if name is None:
            over = {k: getattr(self, k) for k in _SPSA_OVERRIDES if getattr(self, k) is not None}
            if self.k_max is not None:
                over["k_max"] = self.k_max
        over["seed"] = self.require_seed()
        over.update(changes)
        return preset(name or self.spsa_preset, **over)

    def noise_model(self, delta_bar: float | None = None, sigma: float | None = None) -> NoiseModel | None:
        if self.noise == "none" and delta_bar is None:
            return None
        db = self.delta_bar if delta_bar is None else delta_bar
        sg = self.sigma if sigma is None else sigma
        return NoiseModel.pauli((db, db, db), sg)

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


_PARSERS = {
    "seed": _opt_int,
    "experiment": str.strip,
    "experiment_id": str.strip,
    "state": str.strip,
    "povm": str.strip,
    "M": _int,
    "M_prime": _int,
    "k_max": _opt_int,
    "spsa_preset": str.strip,
    "a1": _opt_float,
    "a2": _opt_float,
    "a3": _opt_float,
    "b1": _opt_float,
    "b2": _opt_float,
    "model": str.strip,
    "init": str.strip,
    "noise": str.strip,
    "delta_bar": float,
    "sigma": float,
    "observable": str.strip,
    "repetitions": int,
    "workers": int,
    "M_grid": _int_list,
    "n_states": int,
    "state_lattice": _bool,
    "n_observables": int,
    "delta_grid": _float_list,
    "sigma_steps": int,
    "n_qubits_grid": _int_list,
    "sgqt_preset": str.strip,
    "runs_per_iteration": int,
    "mle_bias": float,
    "records": _opt_str,
    "calibration": _opt_str,
    "out": _opt_str,
}
KEYS = tuple(f.name for f in fields(ExperimentConfig))
assert set(KEYS) == set(_PARSERS)


def loads(text: str) -> ExperimentConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in _PARSERS:
            raise DomainError(f"config line {lineno}: unknown key {key!r}")
        if key in values:
            raise DomainError(f"config line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _PARSERS[key](value)
        except ValueError as e:
            raise DomainError(f"config line {lineno}: bad value for {key}: {e}") from None
    return ExperimentConfig(**values)


def dumps(cfg: ExperimentConfig) -> str:
    return "".join(f"{k} = {_fmt(getattr(cfg, k))}\n" for k in KEYS)


def load(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise DomainError(f"config file not found: {path}")
    return loads(path.read_text(encoding="utf-8"))


def save(cfg: ExperimentConfig, path) -> Path:
    path = Path(path)
    path.write_text(dumps(cfg), encoding="utf-8")
    return path


def config_hash(cfg: ExperimentConfig) -> str:
    """SHA-256 of the canonical serialization; ``out`` is excluded."""
    return hashlib.sha256(dumps(cfg.with_(out=None)).encode("utf-8")).hexdigest()
