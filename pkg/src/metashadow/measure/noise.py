"""Measurement-side noise channels.

A :class:`NoiseModel` acts independently on each targeted qubit just before
the POVM.  Pauli models mix the state as

    rho' = (1 - (dx + dy + dz)/3) rho + dx/3 X rho X + dy/3 Y rho Y + dz/3 Z rho Z

with the weights either fixed or redrawn per shot from a Gaussian and clamped
to [0, 1].  Kraus models apply an arbitrary CPTP map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from ..errors import DomainError
from ..qcore import I2, X, Y, Z, num_qubits

KINDS = ("none", "pauli_fixed", "pauli_resampled", "kraus_list")
_PAULI_XYZ = np.array([X, Y, Z])


@dataclass(frozen=True, eq=False)
class NoiseModel:
    kind: str = "none"
    delta_bar: tuple[float, float, float] = (0.0, 0.0, 0.0)
    sigma: float = 0.0
    kraus: tuple[np.ndarray, ...] = ()
    targets: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown noise kind {self.kind!r}")
        if len(self.delta_bar) != 3:
            raise DomainError("delta_bar needs three entries (x, y, z)")
        if self.sigma < 0:
            raise DomainError("sigma must be non-negative")
        if self.kind == "kraus_list":
            if not self.kraus:
                raise DomainError("kraus_list noise needs at least one operator")
            completeness = sum(k.conj().T @ k for k in self.kraus)
            if not np.allclose(completeness, I2, atol=1e-10, rtol=0):
                raise DomainError("Kraus operators do not satisfy sum K^dag K = 1")

    @classmethod
    def pauli(cls, delta_bar, sigma: float = 0.0, targets=None) -> "NoiseModel":
        kind = "pauli_resampled" if sigma > 0 else "pauli_fixed"
        return cls(kind, tuple(float(d) for d in delta_bar), float(sigma), (), targets)

    @classmethod
    def from_kraus(cls, ops, targets=None) -> "NoiseModel":
        ops = tuple(np.asarray(k, dtype=complex) for k in ops)
        return cls("kraus_list", kraus=ops, targets=targets)

    @property
    def is_identity(self) -> bool:
        if self.kind == "none":
            return True
        if self.kind in ("pauli_fixed", "pauli_resampled"):
            return self.sigma == 0 and all(d == 0 for d in self.delta_bar)
        return False

    @property
    def resampled(self) -> bool:
        return self.kind == "pauli_resampled" and self.sigma > 0

    def targets_for(self, n_qubits: int) -> tuple[int, ...]:
        if self.targets is None:
            return tuple(range(n_qubits))
        for t in self.targets:
            if not 0 <= t < n_qubits:
                raise DomainError(f"noise target {t} out of range for {n_qubits} qubits")
        return tuple(self.targets)

    def draw_deltas(self, u: np.ndarray) -> np.ndarray:
        """Pauli weights from uniforms ``u`` of shape (..., 3), clamped to [0, 1]."""
        mean = np.asarray(self.delta_bar, dtype=float)
        if self.kind == "pauli_resampled" and self.sigma > 0:
            u = np.clip(u, 1e-300, 1 - 1e-16)
            deltas = mean + self.sigma * ndtri(u)
        else:
            deltas = np.broadcast_to(mean, np.shape(u)).copy()
        return np.clip(deltas, 0.0, 1.0)


def depolarizing_kraus(p: float) -> tuple[np.ndarray, ...]:
    """Kraus form of rho -> (1 - p) rho + p 1/2."""
    if not 0.0 <= p <= 1.0:
        raise DomainError("depolarizing strength must lie in [0, 1]")
    return (np.sqrt(1 - 3 * p / 4) * I2, *(np.sqrt(p / 4) * s for s in (X, Y, Z)))


def amplitude_damping_kraus(gamma: float) -> tuple[np.ndarray, ...]:
    if not 0.0 <= gamma <= 1.0:
        raise DomainError("damping probability must lie in [0, 1]")
    k0 = np.array([[1, 0], [0, np.sqrt(1 - gamma)]], dtype=complex)
    k1 = np.array([[0, np.sqrt(gamma)], [0, 0]], dtype=complex)
    return k0, k1


def measurement_bias(contraction: float = 0.1, targets=None) -> NoiseModel:
    """Fixed depolarizing-type Pauli noise shrinking every Bloch component.

    A contraction c rescales Bloch vectors by (1 - c), i.e. each outcome
    probability p is replaced by (1 - c) p + c / L.
    """
    delta = 3 * contraction / 4
    return NoiseModel.pauli((delta, delta, delta), targets=targets)


def pauli_mix(op: np.ndarray, deltas: np.ndarray) -> np.ndarray:
    """Single-qubit Pauli mixing applied to a (batch of) 2x2 operators.

    ``op`` has shape (..., 2, 2) and ``deltas`` shape (..., 3) broadcastable
    against the leading dimensions of ``op``.  The map is self-adjoint, so it
    serves both the Schrodinger and the Heisenberg picture.
    """
    deltas = np.asarray(deltas, dtype=float)
    keep = 1.0 - deltas.sum(axis=-1) / 3.0
    out = keep[..., None, None] * op
    for i, s in enumerate(_PAULI_XYZ):
        out = out + (deltas[..., i] / 3.0)[..., None, None] * (s @ op @ s)
    return out


def kraus_adjoint(op: np.ndarray, kraus) -> np.ndarray:
    """Heisenberg-picture action sum_k K^dag op K on (..., 2, 2) operators."""
    return sum(k.conj().T @ op @ k for k in kraus)


def _embed(op: np.ndarray, qubit: int, n: int) -> np.ndarray:
    mats = [I2] * n
    mats[qubit] = op
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def apply_noise(rho: np.ndarray, model: NoiseModel, shot_rng: np.random.Generator | None = None) -> np.ndarray:
    """Apply ``model`` to every targeted qubit of ``rho`` (Schrodinger picture)."""
    rho = np.asarray(rho, dtype=complex)
    if model.is_identity:
        return rho.copy()
    n = num_qubits(rho.shape[0])
    for q in model.targets_for(n):
        if model.kind == "kraus_list":
            ops = [_embed(k, q, n) for k in model.kraus]
        else:
            if model.resampled and shot_rng is None:
                raise DomainError("resampled Pauli noise needs a random stream")
            u = shot_rng.random(3) if model.resampled else np.zeros(3)
            deltas = model.draw_deltas(u)
            weights = [1.0 - deltas.sum() / 3.0, *(deltas / 3.0)]
            ops = [np.sqrt(w) * _embed(s, q, n) for w, s in zip(weights, (I2, X, Y, Z))]
        rho = sum(k @ rho @ k.conj().T for k in ops)
    return rho
