"""Self-learning shadow tomography: SPSA descent on the shadow cost."""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..errors import DomainError
from ..measure.sampling import RecordSet
from ..qcore import (
    check_density_matrix,
    cholesky_compose,
    cholesky_params,
    eigen_hermitian,
    fidelity,
    ket_to_dm,
    pure_compose,
    pure_params,
    random_pure_state,
)
from ..seeding import derive_rng
from ..shadows import mean_shadow
from .cost import ShadowCost
from .spsa import SpsaConfig, spsa_gradient, spsa_perturbation
from .trace import ReconstructionTrace

MODELS = ("cholesky", "pure")
PLATEAU_WINDOW = 20
PLATEAU_RTOL = 1e-6
INIT_JITTER = 1e-10
# Norm of the initial Cholesky vector.  tau is invariant under r -> s r, so
# the norm only sets the effective SPSA step; the shipped presets assume 6.
DEFAULT_PARAM_SCALE = {"cholesky": 6.0, "pure": None}
_AUTO = "auto"


def init_tau0(records: RecordSet, calib=None) -> np.ndarray:
    """Spectral start: the mean shadow with its eigenvalues replaced by |lambda_i|."""
    rho_bar = mean_shadow(records, calib)
    vals, vecs = eigen_hermitian(rho_bar)
    weights = np.abs(vals)
    total = weights.sum()
    if total == 0.0:
        raise DomainError("mean shadow is zero; spectral initialization undefined")
    tau = (vecs * (weights / total)) @ vecs.conj().T
    return (tau + tau.conj().T) / 2


def composer(model: str, d: int) -> Callable[[np.ndarray], np.ndarray]:
    if model == "cholesky":
        return lambda r: cholesky_compose(r, d)
    if model == "pure":
        return lambda r: ket_to_dm(pure_compose(r, d))
    raise DomainError(f"unknown state model {model!r}; choose from {MODELS}")


def params_for(model: str, tau: np.ndarray) -> np.ndarray:
    tau = check_density_matrix(tau)
    if model == "cholesky":
        return cholesky_params(tau, jitter=INIT_JITTER)
    _, vecs = eigen_hermitian(tau)
    return pure_params(vecs[:, -1])


def _initial_params(model: str, d: int, init, records, calib, seed: int) -> np.ndarray:
    if init is None or (isinstance(init, str) and init == "spectral"):
        return params_for(model, init_tau0(records, calib))
    if isinstance(init, str) and init == "random":
        rng = derive_rng(seed, "slst-init")
        if model == "cholesky":
            return rng.normal(size=d * d)
        return pure_params(random_pure_state(d, rng))
    if isinstance(init, str):
        raise DomainError(f"unknown init {init!r}; use 'spectral', 'random' or a density matrix")
    r = np.asarray(init, dtype=float) if np.ndim(init) == 1 else params_for(model, init)
    return r


def rescale_params(r: np.ndarray, model: str, d: int, scale: float) -> np.ndarray:
    """Rescale the scale-free part of ``r`` to Euclidean norm ``scale``.

    Both models are invariant under r -> s r of their amplitude block (the
    whole vector for Cholesky, the moduli for the pure model), so this only
    changes the effective SPSA step size, not the state.
    """
    if not scale > 0:
        raise DomainError("param_scale must be positive")
    r = np.array(r, dtype=float)
    block = slice(None) if model == "cholesky" else slice(0, d)
    r[block] *= scale / np.linalg.norm(r[block])
    return r


def run_spsa(
    objective: Callable[[np.ndarray], float],
    r0: np.ndarray,
    config: SpsaConfig,
    compose: Callable[[np.ndarray], np.ndarray],
    sign: float,
    trace: ReconstructionTrace,
    monitor: Callable[[np.ndarray, np.ndarray], tuple[float, float]],
    plateau: bool = False,
) -> np.ndarray:
    """Generic SPSA loop, r_{k+1} = r_k + sign * A_k g_k.

    ``monitor(r, tau)`` returns the (cost, fidelity) pair logged per iteration.
    """
    r = np.array(r0, dtype=float)
    for k in range(1, config.k_max + 1):
        delta = spsa_perturbation(r.size, k, config.seed)
        g, _, _ = spsa_gradient(objective, r, k, config, delta)
        r = r + sign * config.gain_a(k) * g
        if not np.all(np.isfinite(r)):
            raise FloatingPointError(f"SPSA parameters diverged at iteration {k}")
        tau = check_density_matrix(compose(r))
        cost, fid = monitor(r, tau)
        trace.append(k, cost, fid)
        if plateau and len(trace) > PLATEAU_WINDOW:
            old = trace.costs[-1 - PLATEAU_WINDOW]
            if abs(cost - old) <= PLATEAU_RTOL * max(abs(old), 1e-300):
                trace.stopped_early = True
                break
    return r


def slst(
    records: RecordSet,
    config: SpsaConfig,
    calib=None,
    init=None,
    model: str = "cholesky",
    reference: np.ndarray | None = None,
    plateau: bool = True,
    param_scale: float | str | None = _AUTO,
) -> ReconstructionTrace:
    """Minimize the shadow cost over a physical parameterization of tau.

    Args:
        records: measurement records.
        config: SPSA gains and iteration budget.
        calib: optional calibration; switches to the calibrated inverse channel.
        init: ``"spectral"`` (default), ``"random"``, a density matrix or a raw
            parameter vector.
        model: ``"cholesky"`` (d^2 parameters, any mixed state) or ``"pure"``
            (2d - 1 parameters, rank one).
        reference: if given, the fidelity to it is logged every iteration.
        plateau: stop once the cost changes by less than 1e-6 (relative) over
            20 iterations.
        param_scale: norm the initial amplitude parameters are rescaled to;
            ``"auto"`` uses :data:`DEFAULT_PARAM_SCALE`, ``None`` keeps them.
    """
    cost = ShadowCost(records, calib)
    d = cost.dim
    compose = composer(model, d)
    r0 = _initial_params(model, d, init, records, calib, config.seed)
    if not np.any(r0[:d] if model == "pure" else r0):
        raise DomainError("initial parameters are all zero")
    if param_scale == _AUTO:
        param_scale = DEFAULT_PARAM_SCALE[model]
    if param_scale is not None:
        r0 = rescale_params(r0, model, d, param_scale)

    def objective(r):
        return cost(compose(r))

    def monitor(r, tau):
        fid = fidelity(reference, tau) if reference is not None else float("nan")
        return cost(tau), fid

    trace = ReconstructionTrace(method=f"slst-{model}")
    r = run_spsa(objective, r0, config, compose, -1.0, trace, monitor, plateau)
    trace.final_params = r
    trace.final_state = check_density_matrix(compose(r))
    return trace
