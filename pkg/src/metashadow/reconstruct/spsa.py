"""Simultaneous-perturbation stochastic approximation (SPSA).

Gain sequences follow A_k = a1 / (k + a2)^a3 and B_k = b1 / k^b2 with the
iteration index starting at k = 1.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from typing import Callable

import numpy as np

from ..errors import DomainError


@dataclass(frozen=True)
class SpsaConfig:
    a1: float
    a2: float = 0.0
    a3: float = 0.602
    b1: float = 0.5
    b2: float = 0.101
    k_max: int = 100
    seed: int = 0

    def __post_init__(self):
        if not self.a1 > 0 or not self.b1 > 0:
            raise DomainError("a1 and b1 must be positive")
        if not 0 < self.a3 <= 1 or not 0 < self.b2 <= 1:
            raise DomainError("a3 and b2 must lie in (0, 1]")
        if self.a2 < 0:
            raise DomainError("a2 must be non-negative")
        if self.k_max < 1:
            raise DomainError("k_max must be at least 1")

    def gain_a(self, k: int) -> float:
        return self.a1 / (k + self.a2) ** self.a3

    def gain_b(self, k: int) -> float:
        if k < 1:
            raise DomainError("SPSA iterations are counted from k = 1")
        return self.b1 / k**self.b2

    def with_(self, **changes) -> "SpsaConfig":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return asdict(self)


# Named hyperparameter sets.  Scaling presets are keyed by qubit number.
PRESETS: dict[str, SpsaConfig] = {
    "single_qubit": SpsaConfig(13.0, 0.0, 0.602, 0.5, 0.101, k_max=30),
    "two_qubit": SpsaConfig(8.5, 0.0, 0.602, 1.4, 0.101, k_max=200),
    "robust": SpsaConfig(34.1, 0.0, 0.602, 5.7, 0.101, k_max=100),
    "scaling_n2": SpsaConfig(20.0, 0.0, 0.602, 0.35, 0.101, k_max=200),
    "scaling_n4": SpsaConfig(15.0, 0.0, 0.602, 0.79, 0.101, k_max=1000),
    "scaling_n6": SpsaConfig(30.0, 0.0, 0.602, 0.92, 0.101, k_max=5000),
    "scaling_n8": SpsaConfig(77.0, 0.0, 0.602, 0.92, 0.101, k_max=25000),
    "spectral_init_n2": SpsaConfig(4.3, 0.0, 0.602, 0.5, 0.101, k_max=200),
    "spectral_init_n3": SpsaConfig(6.2, 0.0, 0.602, 1.4, 0.101, k_max=200),
    "spectral_init_n4": SpsaConfig(16.4, 0.0, 0.602, 2.8, 0.101, k_max=200),
    "random_init_n2": SpsaConfig(48.0, 0.0, 0.602, 1.1, 0.101, k_max=200),
    "random_init_n3": SpsaConfig(44.0, 0.0, 0.602, 8.0, 0.101, k_max=200),
    "random_init_n4": SpsaConfig(49.0, 0.0, 0.602, 12.7, 0.101, k_max=200),
    # Tuned here, not published.  Chosen on a tuning set of targets disjoint
    # from the benchmark seeds; the pure model needs much smaller phase steps.
    "single_qubit_pure": SpsaConfig(1.0, 0.0, 0.602, 0.05, 0.101, k_max=30),
    "sgqt_single_qubit": SpsaConfig(2.0, 0.0, 0.602, 0.7, 0.101, k_max=45),
    "scaling_pure_n2": SpsaConfig(0.1, 0.0, 0.602, 0.02, 0.101, k_max=200),
    "scaling_pure_n3": SpsaConfig(0.1, 0.0, 0.602, 0.02, 0.101, k_max=200),
    "scaling_pure_n4": SpsaConfig(0.1, 0.0, 0.602, 0.02, 0.101, k_max=200),
}


def preset(name: str, **overrides) -> SpsaConfig:
    try:
        cfg = PRESETS[name]
    except KeyError:
        raise DomainError(f"unknown SPSA preset {name!r}; choose from {sorted(PRESETS)}") from None
    return cfg.with_(**overrides) if overrides else cfg


def spsa_perturbation(dim: int, k: int, seed: int) -> np.ndarray:
    """Bernoulli +-1 vector determined by (seed, k) alone."""
    if dim < 1:
        raise DomainError("perturbation dimension must be at least 1")
    rng = np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, int(k)])
    return 2.0 * rng.integers(0, 2, size=dim) - 1.0


class CountedObjective:
    """Wrap an objective and count its evaluations."""

    def __init__(self, fn: Callable[[np.ndarray], float]):
        self.fn = fn
        self.calls = 0

    def __call__(self, r: np.ndarray) -> float:
        self.calls += 1
        return self.fn(r)


def spsa_gradient(
    cost: Callable[[np.ndarray], float],
    r: np.ndarray,
    k: int,
    config: SpsaConfig,
    delta: np.ndarray | None = None,
) -> tuple[np.ndarray, float, float]:
    """Two-point estimate g = [f(r + B D) - f(r - B D)] / (2B) * D.

    Returns the gradient estimate and the two cost values.  ``delta`` defaults
    to :func:`spsa_perturbation` seeded by ``(config.seed, k)``.
    """
    r = np.asarray(r, dtype=float)
    if delta is None:
        delta = spsa_perturbation(r.size, k, config.seed)
    b = config.gain_b(k)
    f_plus = float(cost(r + b * delta))
    f_minus = float(cost(r - b * delta))
    if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
        raise FloatingPointError(f"non-finite cost at SPSA iteration {k}")
    return (f_plus - f_minus) / (2 * b) * delta, f_plus, f_minus


__all__ = [
    "CountedObjective",
    "PRESETS",
    "SpsaConfig",
    "preset",
    "spsa_gradient",
    "spsa_perturbation",
]
