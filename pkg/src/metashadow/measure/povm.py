"""Single-qubit POVM constructions."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import DomainError
from ..qcore import ket_to_dm

_S = 1 / np.sqrt(2)

# Octahedron vertices in label order H, V, +, -, R, L with R = (H + iV)/sqrt(2).
OCTAHEDRON_VECTORS = np.array(
    [[1, 0], [0, 1], [_S, _S], [_S, -_S], [_S, 1j * _S], [_S, -1j * _S]], dtype=complex
)
OCTAHEDRON_LABELS = ("H", "V", "+", "-", "R", "L")

SIC_VECTORS = np.array(
    [
        [1, 0],
        [1 / np.sqrt(3), np.sqrt(2 / 3)],
        [1 / np.sqrt(3), np.sqrt(2 / 3) * np.exp(2j * np.pi / 3)],
        [1 / np.sqrt(3), np.sqrt(2 / 3) * np.exp(4j * np.pi / 3)],
    ],
    dtype=complex,
)
SIC_LABELS = ("psi1", "psi2", "psi3", "psi4")

# Global table of every pure state that can label a single-qubit outcome.
# Indices 0-5 are the octahedron vertices, 6-9 the SIC states.
VECTOR_TABLE = np.concatenate([OCTAHEDRON_VECTORS, SIC_VECTORS])

# Setting vocabulary; RecordSet stores indices into this tuple.
SETTINGS = ("octahedron", "sic", "pauli_x", "pauli_y", "pauli_z")
PAULI_SETTINGS = ("pauli_x", "pauli_y", "pauli_z")
MAX_OUTCOMES = 6

# (setting, outcome) -> VECTOR_TABLE index; -1 marks padding.
_VECTOR_IDS = {
    "octahedron": (0, 1, 2, 3, 4, 5),
    "sic": (6, 7, 8, 9),
    "pauli_x": (2, 3),
    "pauli_y": (4, 5),
    "pauli_z": (0, 1),
}


@dataclass(frozen=True, eq=False)
class PovmSpec:
    """A single-qubit POVM whose effects are weighted rank-1 projectors."""

    kind: str
    labels: tuple[str, ...]
    vectors: np.ndarray
    effects: np.ndarray

    def __post_init__(self):
        total = np.sum(self.effects, axis=0)
        if not np.allclose(total, np.eye(2), atol=1e-12, rtol=0):
            raise DomainError(f"{self.kind} effects do not sum to the identity")
        for e in self.effects:
            if np.linalg.eigvalsh(e)[0] < -1e-12:
                raise DomainError(f"{self.kind} has a non-PSD effect")
        self.vectors.setflags(write=False)
        self.effects.setflags(write=False)

    @property
    def num_outcomes(self) -> int:
        return len(self.labels)

    @property
    def vector_ids(self) -> tuple[int, ...]:
        return _VECTOR_IDS[self.kind]


def _weighted(vectors: np.ndarray, weight: float) -> np.ndarray:
    return np.array([weight * ket_to_dm(v) for v in vectors])


@lru_cache(maxsize=None)
def octahedron_povm() -> PovmSpec:
    v = OCTAHEDRON_VECTORS.copy()
    return PovmSpec("octahedron", OCTAHEDRON_LABELS, v, _weighted(v, 1 / 3))


@lru_cache(maxsize=None)
def sic_povm() -> PovmSpec:
    v = SIC_VECTORS.copy()
    return PovmSpec("sic", SIC_LABELS, v, _weighted(v, 1 / 2))


@lru_cache(maxsize=None)
def pauli_povm(axis: str) -> PovmSpec:
    """Projective measurement onto the +1/-1 eigenstates of sigma_axis."""
    kind = f"pauli_{axis}"
    if kind not in PAULI_SETTINGS:
        raise DomainError(f"unknown Pauli axis {axis!r}")
    ids = _VECTOR_IDS[kind]
    v = VECTOR_TABLE[list(ids)].copy()
    labels = tuple(OCTAHEDRON_LABELS[i] for i in ids)
    return PovmSpec(kind, labels, v, _weighted(v, 1.0))


def povm_for_setting(setting: str) -> PovmSpec:
    if setting == "octahedron":
        return octahedron_povm()
    if setting == "sic":
        return sic_povm()
    if setting in PAULI_SETTINGS:
        return pauli_povm(setting[-1])
    raise DomainError(f"unknown measurement setting {setting!r}")


@lru_cache(maxsize=None)
def setting_vector_table() -> np.ndarray:
    """(setting code, outcome) -> VECTOR_TABLE index, padded with -1."""
    table = -np.ones((len(SETTINGS), MAX_OUTCOMES), dtype=np.int64)
    for code, name in enumerate(SETTINGS):
        ids = _VECTOR_IDS[name]
        table[code, : len(ids)] = ids
    table.setflags(write=False)
    return table


@lru_cache(maxsize=None)
def padded_effects() -> np.ndarray:
    """Effects of every setting padded to six outcomes, shape (5, 6, 2, 2)."""
    out = np.zeros((len(SETTINGS), MAX_OUTCOMES, 2, 2), dtype=complex)
    for code, name in enumerate(SETTINGS):
        eff = povm_for_setting(name).effects
        out[code, : len(eff)] = eff
    out.setflags(write=False)
    return out
