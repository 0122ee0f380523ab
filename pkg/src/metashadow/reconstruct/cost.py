"""Unbiased Frobenius-distance cost built from classical shadows."""

from __future__ import annotations

import numpy as np

from ..errors import DomainError
from ..measure.sampling import RecordSet
from ..shadows import estimate_purity, mean_shadow


class ShadowCost:
    """N_F(tau) = Tr(tau^2) - (2/M) sum_m Tr(rho_hat_m tau) [+ purity term].

    The linear term only depends on the mean shadow, which is computed once.
    The tau-independent purity U-statistic is added when ``include_constant``
    is set and is evaluated lazily.
    """

    def __init__(self, records: RecordSet, calib=None):
        if len(records) == 0:
            raise DomainError("cannot build a cost from an empty record set")
        self.records = records
        self.calib = calib
        self.rho_bar = mean_shadow(records, calib)
        self._constant: float | None = None

    @property
    def dim(self) -> int:
        return self.rho_bar.shape[0]

    @property
    def constant(self) -> float:
        if self._constant is None:
            self._constant = estimate_purity(self.records, self.calib).mean
        return self._constant

    def __call__(self, tau: np.ndarray, include_constant: bool = False) -> float:
        tau = np.asarray(tau)
        if tau.shape != self.rho_bar.shape:
            raise DomainError(f"tau has shape {tau.shape}, records need {self.rho_bar.shape}")
        # both operands are Hermitian, so the traces are real
        value = float(np.vdot(tau, tau).real - 2 * np.vdot(self.rho_bar, tau).real)
        if include_constant:
            value += self.constant
        return value


def nf_cost(tau: np.ndarray, records: RecordSet, calib=None, include_constant: bool = False) -> float:
    """Unbiased estimate of ||rho - tau||_F^2 up to the optional constant."""
    if include_constant and len(records) < 2:
        raise DomainError("the purity term needs at least two shots")
    return ShadowCost(records, calib)(tau, include_constant)


def exact_cost(tau: np.ndarray, rho: np.ndarray, include_constant: bool = True) -> float:
    """Infinite-M limit of the cost: ||rho - tau||_F^2 (or without Tr rho^2)."""
    diff = np.vdot(tau, tau).real - 2 * np.vdot(rho, tau).real
    return float(diff + (np.vdot(rho, rho).real if include_constant else 0.0))
