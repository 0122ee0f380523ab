"""Self-guided quantum tomography: SPSA ascent on measured projection rates."""

from __future__ import annotations

from typing import Callable, Protocol

import numpy as np

from ..errors import DomainError
from ..qcore import check_density_matrix, fidelity, ket_to_dm, pure_compose, pure_params, random_pure_state
from ..seeding import derive_rng, derive_seed
from .spsa import SpsaConfig, spsa_perturbation
from .trace import ReconstructionTrace

RUNS_PLUS = 4
RUNS_MINUS = 3


class Sampler(Protocol):
    def __call__(self, psi: np.ndarray, n_runs: int) -> float: ...


def _projection_probability(rho: np.ndarray, psi: np.ndarray) -> float:
    return float(np.clip(np.vdot(psi, rho @ psi).real, 0.0, 1.0))


class ProjectiveSampler:
    """Counts of successful projections of a hidden state onto a probe state.

    Each run is a single two-outcome measurement {|psi><psi|, 1 - |psi><psi|}.
    ``bias`` contracts the success probability towards 1/2, modelling a
    miscalibrated analyzer.  Call ``i`` draws from a stream keyed by
    ``(seed, i)``, so results do not depend on how many other samplers exist.
    """

    def __init__(self, state: np.ndarray, seed: int, bias: float = 0.0):
        state = np.asarray(state, dtype=complex)
        self.rho = ket_to_dm(state) if state.ndim == 1 else check_density_matrix(state)
        if not 0.0 <= bias <= 1.0:
            raise DomainError("bias must lie in [0, 1]")
        self.seed = int(seed)
        self.bias = float(bias)
        self.calls = 0
        self.runs = 0

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    def probability(self, psi: np.ndarray) -> float:
        p = _projection_probability(self.rho, psi)
        return (1 - self.bias) * p + self.bias / 2

    def __call__(self, psi: np.ndarray, n_runs: int) -> float:
        if n_runs < 1:
            raise DomainError("each projection needs at least one run")
        rng = derive_rng(self.seed, self.calls)
        self.calls += 1
        self.runs += n_runs
        return float(rng.binomial(n_runs, self.probability(psi)))


class ExactSampler(ProjectiveSampler):
    """Infinite-statistics limit: returns n_runs times the exact probability."""

    def __init__(self, state: np.ndarray, bias: float = 0.0):
        super().__init__(state, 0, bias)

    def __call__(self, psi: np.ndarray, n_runs: int) -> float:
        self.calls += 1
        self.runs += n_runs
        return n_runs * self.probability(psi)


def _split_runs(runs_per_iteration: int) -> tuple[int, int]:
    if runs_per_iteration == 7:
        return RUNS_PLUS, RUNS_MINUS
    if runs_per_iteration < 2:
        raise DomainError("SGQT needs at least two runs per iteration")
    plus = (runs_per_iteration + 1) // 2
    return plus, runs_per_iteration - plus


def sgqt(
    sampler: Sampler | Callable[[np.ndarray, int], float],
    target_dim: int,
    config: SpsaConfig,
    runs_per_iteration: int = 7,
    init: np.ndarray | None = None,
    reference: np.ndarray | None = None,
) -> ReconstructionTrace:
    """SPSA ascent on the estimated projection probability of a pure probe.

    Per iteration, 4 runs estimate F(r + B D) and 3 runs estimate F(r - B D)
    (for the default 7 runs); r is updated as r + A_k g_k.
    """
    d = int(target_dim)
    if d < 2:
        raise DomainError("target dimension must be at least 2")
    n_plus, n_minus = _split_runs(runs_per_iteration)
    if init is None:
        r = pure_params(random_pure_state(d, derive_rng(config.seed, "sgqt-init")))
    else:
        init = np.asarray(init)
        r = pure_params(init) if init.ndim == 1 and init.size == d else np.asarray(init, dtype=float)
    if r.shape != (2 * d - 1,):
        raise DomainError(f"SGQT parameters must have length {2 * d - 1}")

    trace = ReconstructionTrace(method="sgqt")
    for k in range(1, config.k_max + 1):
        delta = spsa_perturbation(r.size, k, derive_seed(config.seed, "sgqt"))
        b = config.gain_b(k)
        f_plus = sampler(pure_compose(r + b * delta, d), n_plus) / n_plus
        f_minus = sampler(pure_compose(r - b * delta, d), n_minus) / n_minus
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise FloatingPointError(f"sampler returned a non-finite value at iteration {k}")
        trace.runs_consumed += n_plus + n_minus
        g = (f_plus - f_minus) / (2 * b) * delta
        r = r + config.gain_a(k) * g
        tau = ket_to_dm(pure_compose(r, d))
        fid = fidelity(reference, tau) if reference is not None else float("nan")
        trace.append(k, 0.5 * (f_plus + f_minus), fid)
    trace.final_params = r
    trace.final_state = check_density_matrix(ket_to_dm(pure_compose(r, d)))
    return trace
