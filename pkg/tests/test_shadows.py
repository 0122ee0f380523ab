import numpy as np
import pytest

from metashadow.calibrate import CalibrationResult
from metashadow.errors import DomainError, SingularCalibrationError
from metashadow.measure import (
    OCTAHEDRON_LABELS,
    RecordSet,
    ShotRecord,
    octahedron_povm,
    pauli_povm,
    sample_shots,
    sic_povm,
)
from metashadow.qcore import I2, X, Z, from_liouville, ket_to_dm, make_two_photon_state, random_density_matrix, to_liouville
from metashadow.shadows import (
    empirical_variance,
    estimate_observable,
    estimate_purity,
    forward_ideal_channel,
    invert_ideal_channel,
    mean_shadow,
    shadow_norm_empirical,
    shadow_norm_empirical_many,
    shadow_norm_theoretical,
    shot_values,
    snapshot_calibrated,
    snapshot_ideal,
    variance_analytic,
)

RHO0 = np.diag([1.0, 0.0]).astype(complex)
PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)
P_PLUS = ket_to_dm(PLUS)
RT2 = np.sqrt(2)


def _shot(*outcomes, setting="octahedron"):
    return ShotRecord(0, (setting,) * len(outcomes), tuple(outcomes))


# -- snapshots and channels --------------------------------------------------------


def test_snapshot_ideal_examples():
    np.testing.assert_allclose(snapshot_ideal(_shot(0)).matrix(), np.diag([2, -1]), atol=1e-15)
    np.testing.assert_allclose(snapshot_ideal(_shot(2)).matrix(), [[0.5, 1.5], [1.5, 0.5]], atol=1e-15)
    for o in range(6):
        assert np.trace(snapshot_ideal(_shot(o)).matrix()).real == pytest.approx(1.0, abs=1e-12)
    for o in range(4):
        assert np.trace(snapshot_ideal(_shot(o, setting="sic")).matrix()).real == pytest.approx(1.0, abs=1e-12)


def test_pauli_setting_snapshot_matches_octahedron_vector():
    # pauli_y outcome 0 is the +1 eigenstate of Y, the octahedron's R
    r = OCTAHEDRON_LABELS.index("R")
    np.testing.assert_allclose(
        snapshot_ideal(_shot(0, setting="pauli_y")).matrix(), snapshot_ideal(_shot(r)).matrix(), atol=1e-15
    )


def test_snapshot_setting_mismatch():
    with pytest.raises(DomainError):
        snapshot_ideal(_shot(0), [sic_povm()])


def test_inverse_channel():
    np.testing.assert_allclose(invert_ideal_channel(I2 / 2), I2 / 2, atol=1e-15)
    fwd = forward_ideal_channel(RHO0)
    np.testing.assert_allclose(fwd, np.diag([2 / 3, 1 / 3]), atol=1e-15)
    np.testing.assert_allclose(invert_ideal_channel(fwd), RHO0, atol=1e-15)
    np.testing.assert_allclose(invert_ideal_channel(X), 3 * X, atol=1e-15)
    rho = random_density_matrix(2, np.random.default_rng(0))
    np.testing.assert_allclose(invert_ideal_channel(forward_ideal_channel(rho)), rho, atol=1e-14)


def test_snapshot_calibrated_ideal_reproduces_ideal():
    np.testing.assert_allclose(
        snapshot_calibrated(_shot(0), CalibrationResult.ideal(1)).liouville, [1 / RT2, 0, 0, 3 / RT2], atol=1e-12
    )
    calib = CalibrationResult.ideal(2)
    for a in range(6):
        for b in range(6):
            shot = _shot(a, b)
            got = snapshot_calibrated(shot, calib).liouville
            np.testing.assert_allclose(got, to_liouville(snapshot_ideal(shot).matrix()), atol=1e-12)


def test_snapshot_calibrated_scaling():
    base = CalibrationResult.ideal(1)
    halved = CalibrationResult(1, base.coefficients * [1, 0.5], np.zeros(2), 0)
    a = snapshot_calibrated(_shot(2), base).liouville
    b = snapshot_calibrated(_shot(2), halved).liouville
    np.testing.assert_allclose(b[0], a[0], atol=1e-15)
    np.testing.assert_allclose(b[1:], 2 * a[1:], atol=1e-14)


def test_snapshot_calibrated_singular():
    bad = CalibrationResult(1, np.array([1.0, 1e-8]), np.zeros(2), 0)
    with pytest.raises(SingularCalibrationError):
        snapshot_calibrated(_shot(0), bad)


# -- estimation ----------------------------------------------------------------------


def _within(rep, target, k=4.0):
    return abs(rep.mean - target) <= k * rep.std_error


def test_estimate_observable_examples():
    M = 100_000
    assert _within(estimate_observable(sample_shots(RHO0, "octahedron", M, 1), RHO0), 1.0)
    assert _within(estimate_observable(sample_shots(RHO0, "octahedron", M, 2), P_PLUS), 0.5)
    bell = ket_to_dm(make_two_photon_state(0.5))
    rec = sample_shots(bell, "octahedron", M, 3)
    assert _within(estimate_observable(rec, np.kron(X, X)), 1.0)
    # factored and full forms agree shot by shot
    np.testing.assert_allclose(shot_values(rec, [X, X]), shot_values(rec, np.kron(X, X)), atol=1e-12)


def test_estimate_with_random_pauli_partner():
    bell = ket_to_dm(make_two_photon_state(0.5))
    rec = sample_shots(bell, "octahedron,random_pauli", 100_000, 4)
    assert _within(estimate_observable(rec, [Z, Z]), -1.0)


def test_estimate_rejects_biased_pauli_axes():
    rec = sample_shots(RHO0, "pauli_z", 1000, 0)
    with pytest.raises(DomainError):
        estimate_observable(rec, Z)


def test_estimate_shape_errors():
    rec = sample_shots(RHO0, "octahedron", 10, 0)
    with pytest.raises(DomainError):
        estimate_observable(rec, np.eye(4))
    rec4 = sample_shots(np.eye(16) / 16, "octahedron", 10, 0)
    with pytest.raises(DomainError):
        estimate_observable(rec4, np.eye(16))
    assert estimate_observable(rec4, [I2] * 4).mean == pytest.approx(1.0)


def test_estimate_purity_examples():
    M = 20_000
    rep = estimate_purity(sample_shots(RHO0, "octahedron", M, 5))
    assert _within(rep, 1.0)
    rep = estimate_purity(sample_shots(np.eye(4) / 4, "octahedron", M, 6))
    assert _within(rep, 0.25)
    rep = estimate_purity(sample_shots(ket_to_dm(make_two_photon_state(0.5)), "octahedron", M, 7))
    assert _within(rep, 1.0)
    with pytest.raises(DomainError):
        estimate_purity(sample_shots(RHO0, "octahedron", 1, 0))


def test_estimate_purity_brute_force_and_permutation():
    rec = sample_shots(random_density_matrix(4, np.random.default_rng(1)), "octahedron", 60, 8)
    snaps = [snapshot_ideal(s).matrix() for s in rec]
    m = len(snaps)
    brute = sum(np.trace(snaps[i] @ snaps[j]).real for i in range(m) for j in range(i + 1, m)) * 2 / (m * (m - 1))
    assert estimate_purity(rec).mean == pytest.approx(brute, abs=1e-10)
    perm = np.random.default_rng(2).permutation(m)
    assert estimate_purity(rec.subset(perm)).mean == estimate_purity(rec).mean


def test_empirical_variance_examples():
    M = 100_000
    assert empirical_variance(sample_shots(RHO0, "octahedron", M, 9), P_PLUS) == pytest.approx(0.75, abs=0.02)
    assert empirical_variance(sample_shots(P_PLUS, "octahedron", M, 10), P_PLUS) == pytest.approx(0.5, abs=0.02)
    assert empirical_variance(sample_shots(P_PLUS, "octahedron", 100, 11), I2) == 0.0


def test_variance_divisor_is_M():
    rec = sample_shots(RHO0, "octahedron", 50, 12)
    v = shot_values(rec, P_PLUS)
    assert empirical_variance(rec, P_PLUS) == pytest.approx(np.var(v), abs=1e-14)
    rep = estimate_observable(rec, P_PLUS)
    assert rep.std_error == pytest.approx(np.std(v, ddof=1) / np.sqrt(50), abs=1e-14)


def test_variance_analytic_examples():
    octa = octahedron_povm()
    assert variance_analytic(RHO0, P_PLUS, octa) == pytest.approx(0.75, abs=1e-12)
    assert variance_analytic(I2 / 2, I2, octa) == pytest.approx(0.0, abs=1e-12)
    assert variance_analytic(I2 / 2, I2, sic_povm()) == pytest.approx(0.0, abs=1e-12)
    assert variance_analytic(P_PLUS, P_PLUS, octa) == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(DomainError):
        variance_analytic(RHO0, P_PLUS, pauli_povm("z"))


def test_shadow_norm_theoretical_examples():
    octa = octahedron_povm()
    assert shadow_norm_theoretical(P_PLUS, octa) == pytest.approx(1.5, abs=1e-12)
    assert shadow_norm_theoretical(RHO0, octa) == pytest.approx(1.5, abs=1e-12)
    assert shadow_norm_theoretical(I2, octa) == pytest.approx(1.0, abs=1e-12)
    assert shadow_norm_theoretical(I2, sic_povm()) == pytest.approx(1.0, abs=1e-12)


def test_variance_bounded_by_shadow_norm():
    rng = np.random.default_rng(13)
    for _ in range(200):
        rho = random_density_matrix(2, rng)
        O = random_density_matrix(2, rng)
        for povm in (octahedron_povm(), sic_povm()):
            assert variance_analytic(rho, O, povm) <= shadow_norm_theoretical(O, povm) + 1e-12


def test_empirical_variance_matches_analytic():
    rng = np.random.default_rng(14)
    M = 100_000
    for i in range(5):
        rho, O = random_density_matrix(2, rng), random_density_matrix(2, rng)
        emp = empirical_variance(sample_shots(rho, "octahedron", M, 200 + i), O)
        assert abs(emp - variance_analytic(rho, O, octahedron_povm())) <= 5 / np.sqrt(M)


def test_unbiased_mean_shadow():
    rng = np.random.default_rng(15)
    M = 100_000
    for i in range(20):
        rho = random_density_matrix(2, rng)
        err = np.max(np.abs(mean_shadow(sample_shots(rho, "octahedron", M, 300 + i)) - rho))
        assert err <= 4 * 3 / np.sqrt(M)
    rho2 = random_density_matrix(4, rng)
    assert np.max(np.abs(mean_shadow(sample_shots(rho2, "octahedron", M, 400)) - rho2)) <= 4 * 3 / np.sqrt(M)


def test_shadow_norm_empirical():
    rng = np.random.default_rng(16)
    kets = rng.normal(size=(20, 2)) + 1j * rng.normal(size=(20, 2))
    states = [k / np.linalg.norm(k) for k in kets]
    val = shadow_norm_empirical(states, P_PLUS, octahedron_povm(), 10_000, 17)
    assert val == pytest.approx(0.75, abs=0.05)
    single = shadow_norm_empirical(states[:1], P_PLUS, "octahedron", 500, 18)
    from metashadow.seeding import derive_seed

    direct = empirical_variance(sample_shots(states[0], "octahedron", 500, derive_seed(18, 0)), P_PLUS)
    assert single == pytest.approx(direct, abs=1e-12)
    many = shadow_norm_empirical_many(states[:3], [P_PLUS, RHO0], "sic", 300, 19)
    assert many[1] == pytest.approx(shadow_norm_empirical(states[:3], RHO0, "sic", 300, 19), abs=1e-12)
    with pytest.raises(DomainError):
        shadow_norm_empirical([], P_PLUS, "octahedron", 100, 0)


def test_record_set_round_trip_keeps_estimates(tmp_path):
    rec = sample_shots(RHO0, "octahedron", 300, 20)
    back = RecordSet.load(rec.save(tmp_path / "r.jsonl"))
    assert estimate_observable(back, P_PLUS) == estimate_observable(rec, P_PLUS)
    np.testing.assert_allclose(from_liouville(to_liouville(mean_shadow(back))), mean_shadow(rec), atol=1e-14)
