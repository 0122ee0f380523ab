"""Linear-algebra and state primitives for few-qubit polarization states.

Conventions used throughout the package:

* basis order is {H, V} per qubit with H = |0>, and multi-qubit operators use
  the Kronecker order in which the leftmost qubit is the slowest index;
* density matrices, observables and snapshots are plain ``numpy`` arrays;
  validation helpers raise :class:`~metashadow.errors.DomainError`;
* Liouville vectors use the normalized Pauli basis sigma_j / sqrt(2) per qubit.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

from .errors import DomainError

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (I2, X, Y, Z)

HERMITIAN_ATOL = 1e-12
TRACE_ATOL = 1e-12
PSD_ATOL = 1e-10
# eigenvalues below this are rounding noise; their square roots (~1e-8) are not
ZERO_EIG_ATOL = 1e-14


def num_qubits(dim: int) -> int:
    """Number of qubits for a Hilbert-space dimension; rejects non powers of two."""
    n = int(dim).bit_length() - 1
    if dim < 2 or 2**n != dim:
        raise DomainError(f"dimension {dim} is not a power of two >= 2")
    return n


def make_pure_state(gamma: float, phi: float) -> np.ndarray:
    """cos(gamma)|H> + sin(gamma) e^{i phi}|V>."""
    gamma = float(gamma) % (2 * np.pi)
    phi = float(phi) % (2 * np.pi)
    return np.array([np.cos(gamma), np.sin(gamma) * np.exp(1j * phi)], dtype=complex)


def make_two_photon_state(eta: float) -> np.ndarray:
    """sqrt(eta)|HV> + sqrt(1 - eta)|VH> in the basis (HH, HV, VH, VV)."""
    if not 0.0 <= eta <= 1.0:
        raise DomainError(f"eta must lie in [0, 1], got {eta}")
    return np.array([0.0, np.sqrt(eta), np.sqrt(1.0 - eta), 0.0], dtype=complex)


def ket_to_dm(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def tensor(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product of any number of operators (or kets), left to right."""
    if not ops:
        raise DomainError("tensor needs at least one operand")
    out = np.asarray(ops[0])
    for op in ops[1:]:
        out = np.kron(out, np.asarray(op))
    return out


def is_hermitian(a: np.ndarray, atol: float = HERMITIAN_ATOL) -> bool:
    a = np.asarray(a)
    return a.ndim == 2 and a.shape[0] == a.shape[1] and np.allclose(a, a.conj().T, rtol=0, atol=atol)


def check_density_matrix(rho: np.ndarray, atol: float = PSD_ATOL) -> np.ndarray:
    """Return ``rho`` as a complex array or raise if it is not a valid state."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DomainError(f"density matrix must be square, got shape {rho.shape}")
    num_qubits(rho.shape[0])
    if not is_hermitian(rho):
        raise DomainError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > TRACE_ATOL * max(1, rho.shape[0]):
        raise DomainError(f"density matrix trace is {np.trace(rho).real!r}, expected 1")
    if np.linalg.eigvalsh(rho)[0] < -atol:
        raise DomainError("density matrix has a negative eigenvalue")
    return rho


def eigen_hermitian(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues in ascending order with eigenvectors as orthonormal columns."""
    a = np.asarray(a, dtype=complex)
    if not is_hermitian(a, atol=1e-9):
        raise DomainError("eigen_hermitian requires a Hermitian matrix")
    vals, vecs = np.linalg.eigh(a)
    # eigh already sorts ascending; a stable argsort keeps tie order deterministic
    order = np.argsort(vals, kind="stable")
    return vals[order], vecs[:, order]


def _psd_sqrt(a: np.ndarray) -> np.ndarray:
    vals, vecs = eigen_hermitian(a)
    if vals[0] < -PSD_ATOL:
        raise DomainError("fidelity requires positive semidefinite inputs")
    vals = np.where(vals < ZERO_EIG_ATOL, 0.0, vals)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """Uhlmann root fidelity Tr sqrt(sqrt(a) b sqrt(a)).

    For a pure ``a`` this equals sqrt(<a|b|a>).  Eigenvalues in [-1e-10, 0)
    produced by Monte-Carlo drift are clamped to zero, and so are positive
    ones below 1e-14, which are rounding noise.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise DomainError(f"shape mismatch {a.shape} vs {b.shape}")
    sa = _psd_sqrt(a)
    inner = sa @ b @ sa
    inner = (inner + inner.conj().T) / 2
    vals = np.linalg.eigvalsh(inner)
    if vals[0] < -PSD_ATOL:
        raise DomainError("fidelity requires positive semidefinite inputs")
    f = float(np.sum(np.sqrt(np.where(vals < ZERO_EIG_ATOL, 0.0, vals))))
    return min(max(f, 0.0), 1.0)


# --- Pauli-Liouville representation ------------------------------------------


@lru_cache(maxsize=None)
def pauli_basis(n: int) -> np.ndarray:
    """All 4^n normalized Pauli tensor products, shape (4^n, 2^n, 2^n)."""
    single = [p / np.sqrt(2) for p in PAULIS]
    mats = [tensor(*combo) for combo in itertools.product(single, repeat=n)]
    basis = np.array(mats)
    basis.setflags(write=False)
    return basis


def to_liouville(op: np.ndarray) -> np.ndarray:
    """Coordinates Tr(sigma_j op) in the normalized Pauli basis.

    Real for Hermitian input; complex otherwise.
    """
    op = np.asarray(op, dtype=complex)
    n = num_qubits(op.shape[0])
    coords = np.einsum("jab,ba->j", pauli_basis(n), op)
    if np.max(np.abs(coords.imag), initial=0.0) < 1e-12:
        return coords.real.copy()
    return coords


def from_liouville(vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec)
    n = num_qubits(int(round(np.sqrt(vec.shape[0]))))
    if vec.shape[0] != 4**n:
        raise DomainError(f"Liouville vector length {vec.shape[0]} is not a power of 4")
    # the basis is orthonormal and Hermitian, so op = sum_j c_j sigma_j
    return np.einsum("j,jab->ab", vec.astype(complex), pauli_basis(n))


# --- physical parameterizations ---------------------------------------------


@lru_cache(maxsize=None)
def _cholesky_layout(d: int) -> tuple[np.ndarray, np.ndarray]:
    """Row/col positions of the off-diagonal complex entries of T.

    Entry k occupies parameters (d + 2k, d + 2k + 1).  Rows run top to bottom
    and, within a row, columns run from the diagonal towards column 0, so that
    the last row reads (r_{d^2-1} + i r_{d^2}, r_{d^2-3} + i r_{d^2-2}, ...).
    """
    rows, cols = [], []
    for i in range(1, d):
        for j in range(i - 1, -1, -1):
            rows.append(i)
            cols.append(j)
    return np.array(rows, dtype=int), np.array(cols, dtype=int)


def cholesky_matrix(r: np.ndarray, d: int) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if r.shape != (d * d,):
        raise DomainError(f"Cholesky parameters must have length {d * d}, got {r.shape}")
    if not np.all(np.isfinite(r)):
        raise DomainError("Cholesky parameters must be finite")
    rows, cols = _cholesky_layout(d)
    t = np.zeros((d, d), dtype=complex)
    t[np.arange(d), np.arange(d)] = r[:d]
    t[rows, cols] = r[d::2] + 1j * r[d + 1 :: 2]
    return t


def cholesky_compose(r: np.ndarray, d: int) -> np.ndarray:
    """tau = T T^dagger / Tr(T T^dagger) for lower-triangular T built from ``r``."""
    t = cholesky_matrix(r, d)
    a = t @ t.conj().T
    norm = np.trace(a).real
    if norm <= 0.0:
        raise DomainError("Cholesky parameters are all zero; normalization undefined")
    a = a / norm
    return (a + a.conj().T) / 2


def cholesky_params(tau: np.ndarray, jitter: float = 1e-10) -> np.ndarray:
    """Inverse of :func:`cholesky_compose` (up to the 1/trace normalization)."""
    tau = np.asarray(tau, dtype=complex)
    d = tau.shape[0]
    t = np.linalg.cholesky(tau + jitter * np.eye(d))
    rows, cols = _cholesky_layout(d)
    r = np.empty(d * d)
    r[:d] = t[np.arange(d), np.arange(d)].real
    off = t[rows, cols]
    r[d::2] = off.real
    r[d + 1 :: 2] = off.imag
    return r


def pure_compose(r: np.ndarray, d: int) -> np.ndarray:
    """Normalized ket with moduli r_1..r_d and phases r_{d+1}..r_{2d-1}.

    The first component carries no phase; its sign is normalized so that the
    first amplitude is real and non-negative.
    """
    r = np.asarray(r, dtype=float)
    if r.shape != (2 * d - 1,):
        raise DomainError(f"pure-state parameters must have length {2 * d - 1}, got {r.shape}")
    if not np.all(np.isfinite(r)):
        raise DomainError("pure-state parameters must be finite")
    mod = r[:d]
    norm = np.sqrt(np.sum(mod**2))
    if norm == 0.0:
        raise DomainError("pure-state moduli are all zero")
    psi = mod.astype(complex)
    psi[1:] = psi[1:] * np.exp(1j * r[d:])
    psi /= norm
    if mod[0] < 0:
        psi = -psi
    return psi


def pure_params(psi: np.ndarray) -> np.ndarray:
    """Parameters reproducing ``psi`` up to global phase under :func:`pure_compose`."""
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    if abs(psi[0]) > 0:
        psi = psi * np.exp(-1j * np.angle(psi[0]))
    return np.concatenate([np.abs(psi), np.angle(psi[1:])])


# --- randomness helpers -------------------------------------------------------


def random_pure_state(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random ket of dimension ``d``."""
    psi = rng.normal(size=d) + 1j * rng.normal(size=d)
    return psi / np.linalg.norm(psi)


def random_density_matrix(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random mixed state from the induced (Ginibre) measure."""
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    rho /= np.trace(rho).real
    return (rho + rho.conj().T) / 2


def random_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (g + g.conj().T) / 2


# --- 2-design check -------------------------------------------------------------


def check_two_design(povm) -> float:
    """Max-norm residual of the qubit 2-design identity for a rank-1 POVM.

    Compares (1/L) sum_l (|psi_l><psi_l|)^{(x)2} with P_sym / 3, where
    P_sym = (1 (x) 1 + SWAP) / 2 projects onto the symmetric subspace.
    """
    vectors = np.asarray(povm.vectors, dtype=complex)
    for effect, vec in zip(povm.effects, vectors):
        vals = np.linalg.eigvalsh(effect)
        if np.sum(vals > 1e-10) != 1:
            raise DomainError("check_two_design requires rank-1 effects")
        proj = ket_to_dm(vec)
        weight = np.trace(effect).real
        if not np.allclose(effect, weight * proj, atol=1e-10):
            raise DomainError("POVM effect is not proportional to its listed vector")
    second_moment = np.mean([np.kron(ket_to_dm(v), ket_to_dm(v)) for v in vectors], axis=0)
    swap = np.eye(4)[[0, 2, 1, 3]]
    p_sym = (np.eye(4) + swap) / 2
    return float(np.max(np.abs(second_moment - p_sym / 3)))
