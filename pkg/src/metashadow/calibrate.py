"""Robust-shadow calibration of a noisy measurement channel.

For a channel that is diagonal on the identity/traceless blocks of each qubit,
the coefficients f_lambda (lambda in {0,1}^N) are estimated from shots on
|0...0>: each shot contributes prod_{n: lambda_n = 1} <psi_{l_n}|Z|psi_{l_n}>.
Noiseless octahedron measurements give f_lambda = 3^-|lambda|.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, SingularCalibrationError
from .measure.noise import NoiseModel
from .measure.povm import PAULI_SETTINGS, SETTINGS, VECTOR_TABLE, setting_vector_table
from .measure.sampling import RecordSet, ShotRecord, sample_shots
from .qcore import tensor

SINGULAR_THRESHOLD = 1e-6
MIN_CALIBRATION_SHOTS = 100
CALIBRATION_FORMAT = "metashadow.calibration/1"

# <psi|Z|psi> for every labelled outcome state
Z_VALUES = (np.abs(VECTOR_TABLE[:, 0]) ** 2 - np.abs(VECTOR_TABLE[:, 1]) ** 2).round(15)
_ALLOWED = tuple(SETTINGS.index(s) for s in ("octahedron", *PAULI_SETTINGS))


def _bits(lam, n: int | None = None) -> tuple[int, ...]:
    if isinstance(lam, str):
        bits = tuple(int(c) for c in lam)
    elif isinstance(lam, (int, np.integer)) and n is not None:
        bits = tuple(int(c) for c in format(int(lam), f"0{n}b"))
    else:
        bits = tuple(int(b) for b in lam)
    if any(b not in (0, 1) for b in bits):
        raise DomainError(f"lambda must be a bit vector, got {lam!r}")
    return bits


def lambda_labels(n_qubits: int) -> list[str]:
    """All bitstrings of length N in index order (first qubit most significant)."""
    return [format(i, f"0{n_qubits}b") for i in range(2**n_qubits)]


@dataclass(eq=False)
class CalibrationResult:
    """Subspace coefficients f_lambda indexed by int(lambda bitstring)."""

    n_qubits: int
    coefficients: np.ndarray
    std_errors: np.ndarray
    M_prime: int
    seed: int | None = None

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        self.std_errors = np.asarray(self.std_errors, dtype=float)
        if self.coefficients.shape != (2**self.n_qubits,) or self.std_errors.shape != self.coefficients.shape:
            raise DomainError(f"calibration for {self.n_qubits} qubits needs {2**self.n_qubits} coefficients")

    def coefficient(self, lam) -> float:
        bits = _bits(lam, self.n_qubits)
        if len(bits) != self.n_qubits:
            raise DomainError(f"lambda {lam!r} has the wrong length")
        return float(self.coefficients[int("".join(map(str, bits)), 2)])

    def as_dict(self) -> dict[str, float]:
        return dict(zip(lambda_labels(self.n_qubits), self.coefficients.tolist()))

    @classmethod
    def ideal(cls, n_qubits: int) -> "CalibrationResult":
        weights = np.array([bin(i).count("1") for i in range(2**n_qubits)])
        return cls(n_qubits, 3.0**-weights, np.zeros(2**n_qubits), 0)

    # -- text format ---------------------------------------------------------

    def dumps(self) -> str:
        lines = [
            f"# {CALIBRATION_FORMAT}",
            f"n_qubits = {self.n_qubits}",
            f"M_prime = {self.M_prime}",
            f"seed = {'none' if self.seed is None else self.seed}",
            "lambda,f,std_error",
        ]
        for lab, f, se in zip(lambda_labels(self.n_qubits), self.coefficients, self.std_errors):
            lines.append(f"{lab},{float(f)!r},{float(se)!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "CalibrationResult":
        header: dict[str, str] = {}
        rows: dict[str, tuple[float, float]] = {}
        lines = text.splitlines()
        if not lines or lines[0].strip() != f"# {CALIBRATION_FORMAT}":
            raise DomainError("not a calibration file")
        for ln in lines[1:]:
            ln = ln.strip()
            if not ln or ln.startswith("#") or ln == "lambda,f,std_error":
                continue
            if "=" in ln:
                key, val = (x.strip() for x in ln.split("=", 1))
                header[key] = val
                continue
            try:
                lab, f, se = ln.split(",")
                rows[lab.strip()] = (float(f), float(se))
            except ValueError:
                raise DomainError(f"malformed calibration line {ln!r}") from None
        try:
            n = int(header["n_qubits"])
            m_prime = int(header["M_prime"])
        except (KeyError, ValueError):
            raise DomainError("calibration header needs n_qubits and M_prime") from None
        labels = lambda_labels(n)
        if sorted(rows) != sorted(labels):
            raise DomainError(f"calibration file must list all {len(labels)} lambda labels")
        seed = header.get("seed", "none")
        return cls(
            n,
            np.array([rows[lab][0] for lab in labels]),
            np.array([rows[lab][1] for lab in labels]),
            m_prime,
            None if seed == "none" else int(seed),
        )

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.dumps(), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path) -> "CalibrationResult":
        path = Path(path)
        if not path.exists():
            raise DomainError(f"calibration file not found: {path}")
        return cls.loads(path.read_text(encoding="utf-8"))


def calibration_single_shot(shot: ShotRecord, lam) -> float:
    """prod over qubits with lambda_n = 1 of <psi_{l_n}|Z|psi_{l_n}>.

    Octahedron shots and uniformly random Pauli-basis shots are accepted;
    both realize the octahedron ensemble.
    """
    bits = _bits(lam, len(shot.outcomes))
    if len(bits) != len(shot.outcomes):
        raise DomainError("lambda length does not match the shot")
    value = 1.0
    for b, name, o in zip(bits, shot.settings, shot.outcomes):
        if SETTINGS.index(name) not in _ALLOWED:
            raise DomainError(f"calibration needs octahedron or Pauli settings, got {name!r}")
        if b:
            value *= Z_VALUES[setting_vector_table()[SETTINGS.index(name), o]]
    return float(value)


def calibration_values(records: RecordSet) -> np.ndarray:
    """Single-shot estimator for every lambda, shape (M, 2^N)."""
    if not np.all(np.isin(records.settings, _ALLOWED)):
        raise DomainError("calibration needs octahedron or Pauli settings on every qubit")
    z = Z_VALUES[setting_vector_table()[records.settings, records.outcomes]]  # (M, N)
    n = records.n_qubits
    out = np.empty((len(records), 2**n))
    for i, lab in enumerate(lambda_labels(n)):
        mask = np.array([c == "1" for c in lab])
        out[:, i] = np.prod(np.where(mask[None, :], z, 1.0), axis=1)
    return out


def run_calibration(records: RecordSet, seed: int | None = None) -> CalibrationResult:
    """Average the single-shot estimator over calibration shots on |0...0>."""
    m = len(records)
    if m < MIN_CALIBRATION_SHOTS:
        raise DomainError(f"calibration needs at least {MIN_CALIBRATION_SHOTS} shots, got {m}")
    from .shadows import check_pauli_uniformity

    check_pauli_uniformity(records)
    vals = calibration_values(records)
    mean = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / np.sqrt(m)
    seed = records.master_seed if seed is None else seed
    return CalibrationResult(records.n_qubits, mean, se, m, seed)


def calibration_state(n_qubits: int, prep_infidelity: float = 0.0) -> np.ndarray:
    """|0...0>, optionally tilted so each qubit has overlap 1 - prep_infidelity with |0>."""
    if not 0.0 <= prep_infidelity <= 1.0:
        raise DomainError("prep_infidelity must lie in [0, 1]")
    q = np.array([np.sqrt(1 - prep_infidelity), np.sqrt(prep_infidelity)], dtype=complex)
    return tensor(*([q] * n_qubits))


def simulate_calibration(
    n_qubits: int,
    M_prime: int,
    master_seed: int,
    noise: NoiseModel | None = None,
    policy="octahedron",
    prep_infidelity: float = 0.0,
) -> CalibrationResult:
    """Sample calibration shots on the (optionally imperfect) |0...0> and fit f."""
    state = calibration_state(n_qubits, prep_infidelity)
    records = sample_shots(state, policy, M_prime, master_seed, noise, state_descriptor="calibration")
    return run_calibration(records)


@dataclass(frozen=True, eq=False)
class InverseChannel:
    """sum_lambda f_lambda^-1 Pi_lambda, stored as the per-lambda factors."""

    n_qubits: int
    coefficients: np.ndarray
    factors: np.ndarray

    def liouville_matrix(self) -> np.ndarray:
        """Diagonal 4^N x 4^N Pauli-Liouville matrix of the inverse channel."""
        return np.diag(self.factors[_pauli_to_lambda(self.n_qubits)])

    def forward_liouville_matrix(self) -> np.ndarray:
        return np.diag(self.coefficients[_pauli_to_lambda(self.n_qubits)])

    def apply(self, vec: np.ndarray) -> np.ndarray:
        return self.factors[_pauli_to_lambda(self.n_qubits)] * np.asarray(vec)


def _pauli_to_lambda(n: int) -> np.ndarray:
    """For each normalized Pauli string index, the lambda index of its block."""
    idx = np.arange(4**n)
    lam = np.zeros(4**n, dtype=int)
    for q in range(n):
        digit = (idx // 4 ** (n - 1 - q)) % 4
        lam = lam * 2 + (digit != 0)
    return lam


def noisy_inverse(calib: CalibrationResult) -> InverseChannel:
    coeffs = np.asarray(calib.coefficients, dtype=float)
    small = np.abs(coeffs) < SINGULAR_THRESHOLD
    if np.any(small):
        bad = [lab for lab, s in zip(lambda_labels(calib.n_qubits), small) if s]
        raise SingularCalibrationError(f"calibration coefficients too close to zero for lambda {bad}")
    return InverseChannel(calib.n_qubits, coeffs.copy(), 1.0 / coeffs)


__all__ = [
    "CalibrationResult",
    "InverseChannel",
    "SINGULAR_THRESHOLD",
    "Z_VALUES",
    "calibration_single_shot",
    "calibration_state",
    "calibration_values",
    "lambda_labels",
    "noisy_inverse",
    "run_calibration",
    "simulate_calibration",
]
