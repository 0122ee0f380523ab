"""Maximum-likelihood state estimation on the Cholesky parameterization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from ..errors import DomainError
from ..measure.povm import MAX_OUTCOMES, PAULI_SETTINGS, SETTINGS, padded_effects
from ..measure.sampling import RecordSet
from ..qcore import _cholesky_layout, check_density_matrix, cholesky_compose, cholesky_matrix, cholesky_params
from ..shadows import _batched_kron

PROB_FLOOR = 1e-12
_PAULI_CODES = frozenset(SETTINGS.index(s) for s in PAULI_SETTINGS)
_COMPLETE_CODES = frozenset(SETTINGS.index(s) for s in ("octahedron", "sic"))


@dataclass(eq=False)
class MleResult:
    state: np.ndarray
    params: np.ndarray
    log_likelihood: float
    grad_norm: float
    iterations: int
    converged: bool


def check_informationally_complete(records: RecordSet) -> None:
    """Every qubit must see a 4-outcome+ POVM or all three Pauli axes."""
    for q in range(records.n_qubits):
        codes = set(np.unique(records.settings[:, q]).tolist())
        if codes & _COMPLETE_CODES:
            continue
        if _PAULI_CODES <= codes:
            continue
        names = sorted(SETTINGS[c] for c in codes)
        raise DomainError(f"qubit {q} settings {names} are not informationally complete")


class LikelihoodModel:
    """Grouped outcome counts and the joint effect of each distinct event."""

    def __init__(self, records: RecordSet):
        if len(records) == 0:
            raise DomainError("MLE needs at least one shot")
        check_informationally_complete(records)
        keys = records.settings.astype(np.int64) * MAX_OUTCOMES + records.outcomes
        uniq, counts = np.unique(keys, axis=0, return_counts=True)
        eff = padded_effects()[uniq // MAX_OUTCOMES, uniq % MAX_OUTCOMES]  # (U, N, 2, 2)
        self.effects = _batched_kron(eff)
        self.counts = counts.astype(float)
        self.M = float(counts.sum())
        self.dim = self.effects.shape[1]

    def probabilities(self, tau: np.ndarray) -> np.ndarray:
        return np.einsum("uab,ba->u", self.effects, tau).real

    def log_likelihood(self, tau: np.ndarray) -> float:
        p = np.maximum(self.probabilities(tau), PROB_FLOOR)
        return float(np.dot(self.counts, np.log(p)))

    def objective(self, r: np.ndarray) -> tuple[float, np.ndarray]:
        """Negative log-likelihood per shot and its gradient in r."""
        d = self.dim
        t = cholesky_matrix(r, d)
        a = t @ t.conj().T
        norm = np.trace(a).real
        tau = a / norm
        p = np.maximum(self.probabilities(tau), PROB_FLOOR)
        value = -float(np.dot(self.counts, np.log(p))) / self.M
        g = np.einsum("u,uab->ab", self.counts / p, self.effects) / self.M
        h = g - np.trace(g @ tau).real * np.eye(d)
        x = (2.0 / norm) * (t.conj().T @ h)
        grad = np.empty_like(r)
        idx = np.arange(d)
        grad[:d] = x[idx, idx].real
        rows, cols = _cholesky_layout(d)
        grad[d::2] = x[cols, rows].real
        grad[d + 1 :: 2] = -x[cols, rows].imag
        return value, -grad


def mle_fit(records: RecordSet, k_max: int = 2000, gtol: float = 1e-6, init: np.ndarray | None = None) -> MleResult:
    """Maximize sum over shots of log Tr(tau E_shot) with L-BFGS-B.

    The start is the maximally mixed state unless ``init`` is given.
    Stationarity is judged by the infinity norm of the per-shot gradient.
    """
    model = LikelihoodModel(records)
    d = model.dim
    tau0 = np.eye(d) / d if init is None else check_density_matrix(init)
    r0 = cholesky_params(0.9 * tau0 + 0.1 * np.eye(d) / d)
    res = minimize(
        model.objective,
        r0,
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": k_max, "gtol": gtol * 1e-2, "ftol": 1e-15, "maxcor": 30},
    )
    _, grad = model.objective(res.x)
    gnorm = float(np.max(np.abs(grad)))
    tau = cholesky_compose(res.x, d)
    return MleResult(
        check_density_matrix(tau),
        res.x,
        model.log_likelihood(tau),
        gnorm,
        int(res.nit),
        gnorm < gtol or res.nit >= k_max,
    )


def mle(records: RecordSet, k_max: int = 2000) -> np.ndarray:
    """MLE density matrix for the records."""
    return mle_fit(records, k_max).state
