"""POVMs, noise channels and shot sampling."""

from .noise import (
    KINDS,
    NoiseModel,
    amplitude_damping_kraus,
    apply_noise,
    depolarizing_kraus,
    kraus_adjoint,
    measurement_bias,
    pauli_mix,
)
from .povm import (
    MAX_OUTCOMES,
    OCTAHEDRON_LABELS,
    PAULI_SETTINGS,
    SETTINGS,
    SIC_LABELS,
    VECTOR_TABLE,
    PovmSpec,
    octahedron_povm,
    padded_effects,
    pauli_povm,
    povm_for_setting,
    setting_vector_table,
    sic_povm,
)
from .sampling import (
    RANDOM_PAULI,
    RecordSet,
    ShotRecord,
    born_probabilities,
    concatenate_records,
    parse_policy,
    sample_shots,
    shot_uniforms,
)
