"""Born-rule evaluation, seeded shot sampling and the record file format."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from ..errors import DomainError
from ..qcore import check_density_matrix, ket_to_dm, num_qubits
from .noise import NoiseModel, kraus_adjoint, pauli_mix
from .povm import MAX_OUTCOMES, PAULI_SETTINGS, SETTINGS, PovmSpec, padded_effects

RECORD_FORMAT = "metashadow.records/1"
RANDOM_PAULI = "random_pauli"
_BLOCK = 4096
_LETTERS = "abcdefghijklmnopqrstuvwxy"


@dataclass(frozen=True)
class ShotRecord:
    run_index: int
    settings: tuple[str, ...]
    outcomes: tuple[int, ...]

    def __post_init__(self):
        from .povm import povm_for_setting

        for s, o in zip(self.settings, self.outcomes):
            if not 0 <= o < povm_for_setting(s).num_outcomes:
                raise DomainError(f"outcome {o} invalid for setting {s!r}")


@dataclass(eq=False)
class RecordSet:
    """M measurement records stored column-wise.

    ``settings`` holds indices into :data:`~metashadow.measure.povm.SETTINGS`
    and ``outcomes`` the per-qubit outcome index, both of shape (M, n_qubits).
    """

    settings: np.ndarray
    outcomes: np.ndarray
    n_qubits: int
    master_seed: int | None = None
    state_descriptor: str = ""
    runs: np.ndarray | None = None

    def __post_init__(self):
        self.settings = np.asarray(self.settings, dtype=np.int8).reshape(-1, self.n_qubits)
        self.outcomes = np.asarray(self.outcomes, dtype=np.int8).reshape(-1, self.n_qubits)
        if self.settings.shape != self.outcomes.shape:
            raise DomainError("settings and outcomes must have the same shape")
        if self.runs is None:
            self.runs = np.arange(len(self.outcomes), dtype=np.int64)
        else:
            self.runs = np.asarray(self.runs, dtype=np.int64)

    def __len__(self) -> int:
        return self.outcomes.shape[0]

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def __getitem__(self, i: int) -> ShotRecord:
        return ShotRecord(
            int(self.runs[i]),
            tuple(SETTINGS[c] for c in self.settings[i]),
            tuple(int(o) for o in self.outcomes[i]),
        )

    def __iter__(self) -> Iterator[ShotRecord]:
        for i in range(len(self)):
            yield self[i]

    @property
    def shots(self) -> list[ShotRecord]:
        return list(self)

    def subset(self, index) -> "RecordSet":
        return RecordSet(
            self.settings[index], self.outcomes[index], self.n_qubits,
            self.master_seed, self.state_descriptor, self.runs[index],
        )

    @classmethod
    def from_shots(cls, shots: Sequence[ShotRecord], master_seed=None, state_descriptor="") -> "RecordSet":
        if not shots:
            raise DomainError("cannot build a RecordSet from zero shots")
        n = len(shots[0].outcomes)
        if any(len(s.outcomes) != n for s in shots):
            raise DomainError("all shots must have the same number of qubits")
        settings = [[SETTINGS.index(x) for x in s.settings] for s in shots]
        outcomes = [list(s.outcomes) for s in shots]
        runs = [s.run_index for s in shots]
        return cls(np.array(settings), np.array(outcomes), n, master_seed, state_descriptor, np.array(runs))

    # -- text format ---------------------------------------------------------

    def dumps(self) -> str:
        header = {
            "format": RECORD_FORMAT,
            "n_qubits": self.n_qubits,
            "master_seed": self.master_seed,
            "state_descriptor": self.state_descriptor,
        }
        lines = [json.dumps(header, separators=(",", ":"))]
        names = np.array(SETTINGS)
        for run, st, oc in zip(self.runs, self.settings, self.outcomes):
            row = {"run": int(run), "settings": names[st].tolist(), "outcomes": oc.tolist()}
            lines.append(json.dumps(row, separators=(",", ":")))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "RecordSet":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise DomainError("empty record file")
        header = json.loads(lines[0])
        if header.get("format") != RECORD_FORMAT:
            raise DomainError(f"unrecognized record format {header.get('format')!r}")
        n = int(header["n_qubits"])
        runs, settings, outcomes = [], [], []
        lookup = {name: i for i, name in enumerate(SETTINGS)}
        for ln in lines[1:]:
            row = json.loads(ln)
            if len(row["settings"]) != n or len(row["outcomes"]) != n:
                raise DomainError(f"record for run {row.get('run')} has wrong qubit count")
            runs.append(row["run"])
            try:
                settings.append([lookup[s] for s in row["settings"]])
            except KeyError as exc:
                raise DomainError(f"unknown setting {exc.args[0]!r}") from None
            outcomes.append(row["outcomes"])
        rs = cls(np.array(settings).reshape(-1, n), np.array(outcomes).reshape(-1, n), n,
                 header.get("master_seed"), header.get("state_descriptor", ""), np.array(runs))
        counts = np.array([MAX_OUTCOMES, 4, 2, 2, 2])[rs.settings]
        if np.any(rs.outcomes < 0) or np.any(rs.outcomes >= counts):
            raise DomainError("record file contains an outcome index outside its setting")
        return rs

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.dumps(), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path) -> "RecordSet":
        path = Path(path)
        if not path.exists():
            raise DomainError(f"record file not found: {path}")
        return cls.loads(path.read_text(encoding="utf-8"))


def concatenate_records(parts: Sequence[RecordSet]) -> RecordSet:
    """Join record sets over the same qubits; run indices are renumbered."""
    n = parts[0].n_qubits
    if any(p.n_qubits != n for p in parts):
        raise DomainError("cannot concatenate records with different qubit counts")
    settings = np.concatenate([p.settings for p in parts])
    outcomes = np.concatenate([p.outcomes for p in parts])
    return RecordSet(settings, outcomes, n, parts[0].master_seed, parts[0].state_descriptor)


# -- Born rule ------------------------------------------------------------------


def _joint_probabilities(rho: np.ndarray, effects: np.ndarray) -> np.ndarray:
    """Tr(rho (x)_n E_n) for batched per-qubit effects.

    ``effects`` has shape (B, N, L, 2, 2); the result has shape (B, L**N).
    """
    b, n, L = effects.shape[:3]
    rt = rho.reshape((2,) * (2 * n))
    rows = _LETTERS[:n]
    cols = _LETTERS[n : 2 * n]
    outs = _LETTERS[2 * n : 3 * n]
    terms = [rows + cols] + [f"z{outs[q]}{cols[q]}{rows[q]}" for q in range(n)]
    spec = ",".join(terms) + "->z" + outs
    ops = [rt] + [effects[:, q] for q in range(n)]
    p = np.einsum(spec, *ops, optimize=True).real
    return p.reshape(b, L**n)


def born_probabilities(rho: np.ndarray, povms: Sequence[PovmSpec]) -> np.ndarray:
    """Joint outcome distribution p(l_1..l_N) = Tr(rho E_{l_1} (x) ... (x) E_{l_N}).

    Outcomes are flattened lexicographically with the first qubit slowest.
    """
    rho = np.asarray(rho, dtype=complex)
    n = num_qubits(rho.shape[0])
    if len(povms) != n:
        raise DomainError(f"state has {n} qubits but {len(povms)} POVMs were given")
    sizes = [p.num_outcomes for p in povms]
    rt = rho.reshape((2,) * (2 * n))
    rows = _LETTERS[:n]
    cols = _LETTERS[n : 2 * n]
    outs = _LETTERS[2 * n : 3 * n]
    terms = [rows + cols] + [f"{outs[q]}{cols[q]}{rows[q]}" for q in range(n)]
    out = np.einsum(",".join(terms) + "->" + outs, rt, *[p.effects for p in povms], optimize=True).real
    out = np.clip(out.reshape(int(np.prod(sizes))), 0.0, None)
    return out


# -- sampling -------------------------------------------------------------------------


def parse_policy(policy) -> tuple[str, ...]:
    """Normalize a settings policy to one entry per qubit.

    Each entry is a setting name (``octahedron``, ``sic``, ``pauli_x`` ...) or
    ``random_pauli``, which draws the Pauli axis uniformly and independently
    per shot.
    """
    if isinstance(policy, str):
        policy = [p.strip() for p in policy.split(",")]
    policy = tuple(policy)
    for p in policy:
        if p != RANDOM_PAULI and p not in SETTINGS:
            raise DomainError(f"unknown settings policy entry {p!r}")
    return policy


def _block_uniforms(master_seed: int, block: int, width: int) -> np.ndarray:
    bitgen = np.random.Philox(key=int(master_seed), counter=np.array([0, 0, 0, block], dtype=np.uint64))
    return np.random.Generator(bitgen).random((_BLOCK, width))


def shot_uniforms(master_seed: int, shots: np.ndarray, n_qubits: int) -> np.ndarray:
    """Per-shot uniform variates; row i depends only on (master_seed, shots[i]).

    Columns: outcome draw, one axis draw per qubit, three noise draws per qubit.
    """
    width = 1 + 4 * n_qubits
    shots = np.asarray(shots, dtype=np.int64)
    out = np.empty((len(shots), width))
    blocks = shots // _BLOCK
    for blk in np.unique(blocks):
        sel = blocks == blk
        out[sel] = _block_uniforms(master_seed, int(blk), width)[shots[sel] % _BLOCK]
    return out


def _settings_from_policy(policy: tuple[str, ...], u_axis: np.ndarray) -> np.ndarray:
    m, n = u_axis.shape
    codes = np.empty((m, n), dtype=np.int8)
    first_pauli = SETTINGS.index(PAULI_SETTINGS[0])
    for q, p in enumerate(policy):
        if p == RANDOM_PAULI:
            codes[:, q] = first_pauli + np.minimum((u_axis[:, q] * 3).astype(np.int8), 2)
        else:
            codes[:, q] = SETTINGS.index(p)
    return codes


def _noisy_effects(codes: np.ndarray, noise: NoiseModel, u_noise: np.ndarray) -> np.ndarray:
    eff = padded_effects()[codes]  # (B, N, 6, 2, 2)
    if noise.is_identity:
        return eff
    eff = eff.copy()
    n = codes.shape[1]
    for q in noise.targets_for(n):
        if noise.kind == "kraus_list":
            eff[:, q] = kraus_adjoint(eff[:, q], noise.kraus)
        else:
            deltas = noise.draw_deltas(u_noise[:, 3 * q : 3 * q + 3])  # (B, 3)
            eff[:, q] = pauli_mix(eff[:, q], deltas[:, None, :])
    return eff


def _draw_outcomes(probs: np.ndarray, u: np.ndarray, n: int) -> np.ndarray:
    cdf = np.cumsum(np.clip(probs, 0.0, None), axis=1)
    cdf /= cdf[:, -1:]
    joint = np.sum(cdf <= u[:, None], axis=1)
    joint = np.minimum(joint, probs.shape[1] - 1)
    return np.stack(np.unravel_index(joint, (MAX_OUTCOMES,) * n), axis=1).astype(np.int8)


def sample_shots(
    state: np.ndarray,
    settings_policy,
    M: int,
    master_seed: int,
    noise: NoiseModel | None = None,
    state_descriptor: str = "",
    first_run: int = 0,
) -> RecordSet:
    """Simulate ``M`` independent measurement runs on ``state``.

    Every shot draws its Pauli axes (for ``random_pauli`` qubits), its noise
    realization and its outcome from a counter-based stream keyed by
    ``(master_seed, run index)``, so any subset of shots can be regenerated
    independently and in any order.
    """
    if M < 1:
        raise DomainError("M must be at least 1")
    state = np.asarray(state, dtype=complex)
    rho = ket_to_dm(state) if state.ndim == 1 else check_density_matrix(state)
    n = num_qubits(rho.shape[0])
    policy = parse_policy(settings_policy)
    if len(policy) == 1 and n > 1:
        policy = policy * n
    if len(policy) != n:
        raise DomainError(f"policy has {len(policy)} entries for {n} qubits")
    noise = noise or NoiseModel()
    noise.targets_for(n)

    runs = np.arange(first_run, first_run + M, dtype=np.int64)
    u = shot_uniforms(master_seed, runs, n)
    codes = _settings_from_policy(policy, u[:, 1 : 1 + n])
    u_noise = u[:, 1 + n :]

    outcomes = np.empty((M, n), dtype=np.int8)
    if noise.resampled:
        for start in range(0, M, _BLOCK):
            sl = slice(start, start + _BLOCK)
            eff = _noisy_effects(codes[sl], noise, u_noise[sl])
            probs = _joint_probabilities(rho, eff)
            outcomes[sl] = _draw_outcomes(probs, u[sl, 0], n)
    else:
        uniq, inverse = np.unique(codes, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        eff = _noisy_effects(uniq, noise, np.zeros((len(uniq), 3 * n)))
        probs = _joint_probabilities(rho, eff)
        outcomes[:] = _draw_outcomes(probs[inverse], u[:, 0], n)
    return RecordSet(codes, outcomes, n, master_seed, state_descriptor, runs)
