"""Classical shadows: snapshots, inverse channels and shadow estimators.

A snapshot of an N-qubit shot is the tensor product of per-qubit factors
3|psi_l><psi_l| - 1, where |psi_l> is the pure state labelling the observed
outcome.  With a calibration the ideal inverse (a factor 3 on every traceless
block) is replaced by the inverse of the measured subspace coefficients.

All estimators work on the distinct (setting, outcome) rows of a record set
weighted by their multiplicities, so cost scales with the number of distinct
outcome strings rather than with M.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import DomainError
from .measure.povm import PAULI_SETTINGS, SETTINGS, VECTOR_TABLE, PovmSpec, povm_for_setting, setting_vector_table
from .measure.sampling import RecordSet, ShotRecord, sample_shots
from .qcore import I2, check_density_matrix, ket_to_dm, tensor, to_liouville

FULL_OPERATOR_MAX_QUBITS = 3
_PAULI_CODES = tuple(SETTINGS.index(s) for s in PAULI_SETTINGS)
_UNIFORMITY_PVALUE = 1e-6

# per-vector single-qubit tables
_PROJ = np.array([ket_to_dm(v) for v in VECTOR_TABLE])
# Populations of every labelled state are multiples of 1/6; snapping them
# makes each snapshot trace exactly 1, so Tr(1 rho_hat) has zero variance.
_PROJ[:, [0, 1], [0, 1]] = np.round(_PROJ[:, [0, 1], [0, 1]].real * 6) / 6
SNAPSHOT_TABLE = 3 * _PROJ - I2
_BLOCK0 = I2 / 2
_BLOCK1 = _PROJ - I2 / 2


@dataclass(frozen=True, eq=False)
class Snapshot:
    """One classical snapshot.

    Exactly one of ``factors`` (ideal inverse, shape (N, 2, 2)) and
    ``liouville`` (calibrated inverse, length 4**N) is set.
    """

    origin_shot: int
    factors: np.ndarray | None = None
    liouville: np.ndarray | None = None

    def matrix(self) -> np.ndarray:
        if self.factors is not None:
            return tensor(*self.factors)
        from .qcore import from_liouville

        return from_liouville(self.liouville)


@dataclass(frozen=True)
class EstimateReport:
    mean: float
    std_error: float
    M: int
    observable_descriptor: str = ""
    variance: float = 0.0

    def __post_init__(self):
        if self.M < 1 or self.std_error < 0:
            raise DomainError("EstimateReport needs M >= 1 and a non-negative error")


# -- channels ---------------------------------------------------------------------


def forward_ideal_channel(rho: np.ndarray) -> np.ndarray:
    """Single-qubit measurement channel (rho + Tr(rho) 1) / 3."""
    rho = np.asarray(rho, dtype=complex)
    return (rho + np.trace(rho) * I2) / 3


def invert_ideal_channel(x: np.ndarray) -> np.ndarray:
    """Inverse of the single-qubit channel: 3X - Tr(X) 1."""
    x = np.asarray(x, dtype=complex)
    if x.shape != (2, 2):
        raise DomainError(f"expected a 2x2 operator, got shape {x.shape}")
    return 3 * x - np.trace(x) * I2


def ideal_inverse_factors(n_qubits: int) -> np.ndarray:
    """Inverse subspace coefficients 3**|lambda| indexed by the bitstring lambda."""
    weights = np.array([bin(i).count("1") for i in range(2**n_qubits)])
    return 3.0**weights


def _inverse_factors(calib, n: int) -> np.ndarray:
    if calib is None:
        return ideal_inverse_factors(n)
    from .calibrate import InverseChannel, noisy_inverse

    inv = calib if isinstance(calib, InverseChannel) else noisy_inverse(calib)
    if inv.n_qubits != n:
        raise DomainError(f"calibration covers {inv.n_qubits} qubits, records have {n}")
    return inv.factors


def _lambda_bits(n: int) -> np.ndarray:
    """Rows are the bitstrings lambda in index order, first qubit most significant."""
    return np.array(list(product((0, 1), repeat=n)), dtype=int).reshape(2**n, n)


# -- snapshots ----------------------------------------------------------------------


def _shot_vector_ids(shot: ShotRecord, settings: Sequence[PovmSpec] | None) -> list[int]:
    if settings is not None:
        if len(settings) != len(shot.settings):
            raise DomainError("settings list does not match the shot's qubit count")
        for spec, name in zip(settings, shot.settings):
            if spec.kind != name:
                raise DomainError(f"shot was measured with {name!r}, not {spec.kind!r}")
    ids = []
    for name, o in zip(shot.settings, shot.outcomes):
        if name not in SETTINGS:
            raise DomainError(f"unknown setting kind {name!r}")
        ids.append(povm_for_setting(name).vector_ids[o])
    return ids


def snapshot_ideal(shot: ShotRecord, settings: Sequence[PovmSpec] | None = None) -> Snapshot:
    """Per-qubit factors 3|psi_l><psi_l| - 1 for the observed outcomes."""
    ids = _shot_vector_ids(shot, settings)
    return Snapshot(shot.run_index, factors=SNAPSHOT_TABLE[ids].copy())


def snapshot_calibrated(shot: ShotRecord, calib) -> Snapshot:
    """Liouville vector sum_lambda f_lambda^-1 Pi_lambda |psi_l>> of one shot."""
    ids = _shot_vector_ids(shot, None)
    n = len(ids)
    inv = _inverse_factors(calib, n)
    mat = _calibrated_matrix(np.array(ids), inv)
    return Snapshot(shot.run_index, liouville=to_liouville(mat))


def _calibrated_matrix(ids: np.ndarray, inv: np.ndarray) -> np.ndarray:
    n = len(ids)
    out = 0
    for lam, c in zip(_lambda_bits(n), inv):
        blocks = [_BLOCK1[v] if b else _BLOCK0 for v, b in zip(ids, lam)]
        out = out + c * tensor(*blocks)
    return out


# -- record preprocessing -------------------------------------------------------


def check_pauli_uniformity(records: RecordSet) -> None:
    """Raise unless every qubit measured in Pauli bases saw uniformly random axes.

    Pauli-basis snapshots reproduce the octahedron ensemble only when the axis
    is drawn uniformly per shot; a chi-square test at p = 1e-6 guards this.
    """
    for q in range(records.n_qubits):
        col = records.settings[:, q]
        counts = np.array([np.sum(col == c) for c in _PAULI_CODES])
        total = counts.sum()
        if total == 0:
            continue
        p = stats.chisquare(counts).pvalue if total >= 3 else 1.0
        if not p > _UNIFORMITY_PVALUE:
            raise DomainError(
                f"qubit {q}: Pauli axes are not uniformly distributed (counts {counts.tolist()}); "
                "shadow estimators need a uniformly random axis per shot"
            )


def unique_vector_rows(records: RecordSet) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Distinct outcome-vector rows, their counts and the shot-to-row map."""
    if len(records) == 0:
        raise DomainError("record set is empty")
    check_pauli_uniformity(records)
    ids = setting_vector_table()[records.settings, records.outcomes]
    if np.any(ids < 0):
        raise DomainError("record contains an outcome index outside its setting")
    uniq, inverse, counts = np.unique(ids, axis=0, return_inverse=True, return_counts=True)
    return uniq, counts, inverse.reshape(-1)


def _batched_kron(factors: np.ndarray) -> np.ndarray:
    """(U, N, 2, 2) per-qubit factors -> (U, 2^N, 2^N) Kronecker products."""
    out = factors[:, 0]
    for q in range(1, factors.shape[1]):
        u, a, _ = out.shape
        out = np.einsum("uab,ucd->uacbd", out, factors[:, q]).reshape(u, 2 * a, 2 * a)
    return out


def _row_snapshots(uniq: np.ndarray, inv: np.ndarray, ideal: bool) -> np.ndarray:
    if ideal:
        return _batched_kron(SNAPSHOT_TABLE[uniq])
    n = uniq.shape[1]
    out = 0
    for lam, c in zip(_lambda_bits(n), inv):
        blocks = np.where(lam[None, :, None, None].astype(bool), _BLOCK1[uniq], _BLOCK0)
        out = out + c * _batched_kron(blocks)
    return out


def _is_ideal(calib) -> bool:
    return calib is None


def _as_observable(O, n: int):
    """Return ('full', matrix) or ('factored', (N, 2, 2) array)."""
    if isinstance(O, (list, tuple)):
        facs = np.array([np.asarray(f, dtype=complex) for f in O])
        if facs.shape != (n, 2, 2):
            raise DomainError(f"factored observable needs {n} 2x2 factors, got shape {facs.shape}")
        return "factored", facs
    mat = np.asarray(O, dtype=complex)
    if mat.shape != (2**n, 2**n):
        raise DomainError(f"observable shape {mat.shape} does not match {n} qubits")
    if n > FULL_OPERATOR_MAX_QUBITS:
        raise DomainError(
            f"full-matrix observables are limited to {FULL_OPERATOR_MAX_QUBITS} qubits; "
            "pass a list of per-qubit factors instead"
        )
    return "full", mat


def _row_values(records: RecordSet, O, calib) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per distinct row, o = Tr(O rho_hat); plus counts and shot map."""
    uniq, counts, inverse = unique_vector_rows(records)
    n = records.n_qubits
    inv = _inverse_factors(calib, n)
    kind, op = _as_observable(O, n)
    if kind == "full":
        snaps = _row_snapshots(uniq, inv, _is_ideal(calib))
        vals = np.einsum("ab,uba->u", op, snaps).real
        return vals, counts, inverse
    t0 = np.einsum("nab,ba->n", op, _BLOCK0)  # (N,)
    t1 = np.einsum("nab,unba->un", op, _BLOCK1[uniq])  # (U, N)
    vals = np.zeros(len(uniq), dtype=complex)
    for lam, c in zip(_lambda_bits(n), inv):
        terms = np.where(lam[None, :].astype(bool), t1, t0[None, :])
        vals += c * np.prod(terms, axis=1)
    return vals.real, counts, inverse


def shot_values(records: RecordSet, O, calib=None) -> np.ndarray:
    """Single-shot estimates o_m = Tr(O rho_hat_m) in shot order."""
    vals, _, inverse = _row_values(records, O, calib)
    return vals[inverse]


def _describe(O, descriptor: str | None) -> str:
    if descriptor is not None:
        return descriptor
    if isinstance(O, (list, tuple)):
        return f"factored[{len(O)}]"
    return f"matrix[{np.asarray(O).shape[0]}]"


def estimate_observable(records: RecordSet, O, calib=None, descriptor: str | None = None) -> EstimateReport:
    """Shadow estimate (1/M) sum_m Tr(O rho_hat_m).

    ``O`` is a full 2^N x 2^N matrix (N <= 3) or a list of N single-qubit
    factors of a tensor-product observable.
    """
    vals, counts, _ = _row_values(records, O, calib)
    m = int(counts.sum())
    mean = float(np.dot(counts, vals) / m)
    var = float(np.dot(counts, (vals - mean) ** 2) / m)
    se = float(np.sqrt(var * m / (m - 1) / m)) if m > 1 else 0.0
    return EstimateReport(mean, se, m, _describe(O, descriptor), var)


def empirical_variance(records: RecordSet, O, calib=None) -> float:
    """(1/M) sum_m (o_m - O_hat)^2 with divisor M."""
    if len(records) < 2:
        raise DomainError("empirical variance needs at least two shots")
    return estimate_observable(records, O, calib).variance


def mean_shadow(records: RecordSet, calib=None) -> np.ndarray:
    """Average snapshot (1/M) sum_m rho_hat_m as a dense matrix."""
    uniq, counts, _ = unique_vector_rows(records)
    inv = _inverse_factors(calib, records.n_qubits)
    snaps = _row_snapshots(uniq, inv, _is_ideal(calib))
    rho = np.einsum("u,uab->ab", counts / counts.sum(), snaps)
    return (rho + rho.conj().T) / 2


def snapshot_purities(records: RecordSet, calib=None) -> tuple[np.ndarray, np.ndarray]:
    """Tr(rho_hat^2) per distinct row, with row counts."""
    uniq, counts, _ = unique_vector_rows(records)
    if _is_ideal(calib):
        # Tr((3P - 1)^2) = 5 per qubit
        return np.full(len(uniq), 5.0**records.n_qubits), counts
    inv = _inverse_factors(calib, records.n_qubits)
    snaps = _row_snapshots(uniq, inv, False)
    return np.einsum("uab,uba->u", snaps, snaps).real, counts


def estimate_purity(records: RecordSet, calib=None) -> EstimateReport:
    """U-statistic 2/(M(M-1)) sum_{m<n} Tr(rho_hat_m rho_hat_n).

    Uses sum_{m != n} = M^2 Tr(rho_bar^2) - sum_m Tr(rho_hat_m^2).  The
    standard error is the first-order (Hajek) approximation
    2 std_m Tr(rho_hat_m rho_bar) / sqrt(M).
    """
    m = len(records)
    if m < 2:
        raise DomainError("purity estimation needs at least two shots")
    uniq, counts, _ = unique_vector_rows(records)
    inv = _inverse_factors(calib, records.n_qubits)
    snaps = _row_snapshots(uniq, inv, _is_ideal(calib))
    rho_bar = np.einsum("u,uab->ab", counts / m, snaps)
    diag, _ = snapshot_purities(records, calib)
    total = m * m * np.trace(rho_bar @ rho_bar).real - np.dot(counts, diag)
    value = float(total / (m * (m - 1)))
    h = np.einsum("uab,ba->u", snaps, rho_bar).real
    h_mean = np.dot(counts, h) / m
    h_var = np.dot(counts, (h - h_mean) ** 2) / (m - 1)
    se = float(2 * np.sqrt(h_var / m))
    return EstimateReport(value, se, m, "purity", float(h_var))


# -- analytic variance and shadow norms ---------------------------------------------


def _snap_halves(a: np.ndarray) -> np.ndarray:
    # octahedron projector entries are exactly 0, +-1/2, +-i/2 or 1
    snapped = np.round(a * 2) / 2
    return np.where(np.abs(a - snapped) < 1e-12, snapped, a)


def _povm_projectors(povm: PovmSpec) -> np.ndarray:
    if povm.kind not in ("octahedron", "sic"):
        raise DomainError(f"{povm.kind} is not a 2-design POVM; the analytic formulas need one")
    return np.array([_snap_halves(ket_to_dm(v)) for v in povm.vectors])


def _povm_snapshots(povm: PovmSpec) -> np.ndarray:
    return 3 * _povm_projectors(povm) - I2


def variance_analytic(rho: np.ndarray, O: np.ndarray, povm: PovmSpec) -> float:
    """sum_l Tr(rho_hat_l O)^2 Tr(rho E_l) - Tr(rho O)^2 for a single qubit.

    Both admitted POVMs weight every effect by 2/L, so the weight is applied
    after the sum; with the snapped octahedron projectors, rational inputs
    give exact results.
    """
    rho = check_density_matrix(rho)
    O = np.asarray(O, dtype=complex)
    if rho.shape != (2, 2) or O.shape != (2, 2):
        raise DomainError("variance_analytic is defined for single-qubit inputs")
    proj = _povm_projectors(povm)
    o_l = np.einsum("lab,ba->l", 3 * proj - I2, O).real
    q_l = np.einsum("lab,ba->l", proj, rho).real
    mean = np.trace(rho @ O).real
    return float(np.dot(o_l**2, q_l) * (2 / len(proj)) - mean**2)


def shadow_norm_theoretical(O: np.ndarray, povm: PovmSpec) -> float:
    """lambda_max of sum_l Tr(rho_hat_l O)^2 E_l."""
    O = np.asarray(O, dtype=complex)
    if O.shape != (2, 2):
        raise DomainError("shadow_norm_theoretical is defined for single-qubit observables")
    snaps = _povm_snapshots(povm)
    o_l = np.einsum("lab,ba->l", snaps, O).real
    op = np.einsum("l,lab->ab", o_l**2, povm.effects)
    return float(np.linalg.eigvalsh((op + op.conj().T) / 2)[-1])


def shadow_norm_empirical_many(
    states: Sequence[np.ndarray], observables: Sequence[np.ndarray], povm: PovmSpec | str, M: int, seed: int
) -> np.ndarray:
    """:func:`shadow_norm_empirical` for several observables on shared records.

    The records for state i depend only on (seed, i), so every observable sees
    the same shots.  Observables are full matrices, evaluated together on the
    distinct snapshot rows.
    """
    from .seeding import derive_seed

    if len(states) == 0:
        raise DomainError("state set is empty")
    if len(observables) == 0:
        raise DomainError("observable set is empty")
    name = povm if isinstance(povm, str) else povm.kind
    if M < 2:
        raise DomainError("empirical variance needs at least two shots")
    best = np.full(len(observables), -np.inf)
    for i, state in enumerate(states):
        records = sample_shots(state, name, M, derive_seed(seed, i))
        ops = np.array([_as_observable(O, records.n_qubits)[1] for O in observables])
        uniq, counts, _ = unique_vector_rows(records)
        snaps = _row_snapshots(uniq, None, True)
        vals = np.einsum("jab,uba->ju", ops, snaps).real
        mean = vals @ counts / M
        var = ((vals - mean[:, None]) ** 2) @ counts / M
        best = np.maximum(best, var)
    return best


def shadow_norm_empirical(
    states: Sequence[np.ndarray], O: np.ndarray, povm: PovmSpec | str, M: int, seed: int
) -> float:
    """Max over ``states`` of the empirical single-shot variance at M shots each.

    State i is sampled with master seed ``derive_seed(seed, i)``.
    """
    return float(shadow_norm_empirical_many(states, [O], povm, M, seed)[0])


__all__ = [
    "EstimateReport",
    "SNAPSHOT_TABLE",
    "Snapshot",
    "check_pauli_uniformity",
    "empirical_variance",
    "estimate_observable",
    "estimate_purity",
    "forward_ideal_channel",
    "ideal_inverse_factors",
    "invert_ideal_channel",
    "mean_shadow",
    "shadow_norm_empirical",
    "shadow_norm_empirical_many",
    "shadow_norm_theoretical",
    "shot_values",
    "snapshot_calibrated",
    "snapshot_ideal",
    "snapshot_purities",
    "unique_vector_rows",
    "variance_analytic",
]
