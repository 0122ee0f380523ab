"""Observable and state grids on the Bloch sphere."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError
from ..qcore import ket_to_dm
from ..seeding import derive_rng

PROJECTOR_ATOL = 1e-12


def bloch_ket(theta: float, phi: float) -> np.ndarray:
    """cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>."""
    return np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)], dtype=complex)


def _angles(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    theta = np.arccos(np.clip(v[:, 2], -1.0, 1.0))
    phi = np.arctan2(v[:, 1], v[:, 0])
    return theta, phi


def uniform_sphere(n: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def fibonacci_sphere(n: int) -> np.ndarray:
    """Near-uniform deterministic points: equal-area bands, golden-angle turns."""
    i = np.arange(n) + 0.5
    z = 1 - 2 * i / n
    az = np.pi * (1 + np.sqrt(5)) * i
    rho = np.sqrt(1 - z * z)
    return np.stack([rho * np.cos(az), rho * np.sin(az), z], axis=1)


@dataclass(frozen=True, eq=False)
class ObservableGrid:
    """Rank-1 projectors |k><k| with |k> = cos(kappa)|0> + e^{i nu} sin(kappa)|1>."""

    kappa: np.ndarray
    nu: np.ndarray
    observables: tuple[np.ndarray, ...]

    def __post_init__(self):
        for O in self.observables:
            if np.max(np.abs(O @ O - O)) > PROJECTOR_ATOL:
                raise DomainError("observable grid entry is not a projector")

    def __len__(self) -> int:
        return len(self.observables)

    @property
    def count(self) -> int:
        return len(self)


@dataclass(frozen=True, eq=False)
class StateGrid:
    """Pure states cos(gamma)|H> + e^{i phi} sin(gamma)|V>."""

    gamma: np.ndarray
    phi: np.ndarray
    states: tuple[np.ndarray, ...]

    def __post_init__(self):
        for s in self.states:
            if abs(np.linalg.norm(s) - 1) > 1e-12:
                raise DomainError("state grid entry is not normalized")

    def __len__(self) -> int:
        return len(self.states)

    @property
    def count(self) -> int:
        return len(self)


def observable_grid(n: int = 128, seed: int = 0) -> ObservableGrid:
    """``n`` projectors with Bloch vectors uniform on the sphere.

    kappa = arccos(z)/2 is the half polar angle and nu the azimuth.
    """
    if n < 1:
        raise DomainError("observable grid needs n >= 1")
    theta, phi = _angles(uniform_sphere(n, derive_rng(seed, "observable-grid")))
    obs = tuple(ket_to_dm(bloch_ket(t, p)) for t, p in zip(theta, phi))
    return ObservableGrid(theta / 2, phi, obs)


def state_grid(n: int = 20, seed: int = 0, lattice: bool = True) -> StateGrid:
    """``n`` pure qubit states, Fibonacci lattice (seed ignored) or uniform random."""
    if n < 1:
        raise DomainError("state grid needs n >= 1")
    v = fibonacci_sphere(n) if lattice else uniform_sphere(n, derive_rng(seed, "state-grid"))
    theta, phi = _angles(v)
    states = tuple(bloch_ket(t, p) for t, p in zip(theta, phi))
    return StateGrid(theta / 2, phi, states)
