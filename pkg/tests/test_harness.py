import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from metashadow.calibrate import simulate_calibration
from metashadow.errors import DomainError
from metashadow.harness import (
    ExperimentConfig,
    config_hash,
    dumps,
    load,
    loads,
    loglog_slope,
    noise_grid,
    observable_grid,
    parse_state,
    read_csv,
    read_manifest,
    run_experiment,
    run_variance_convergence,
    save,
    state_grid,
)

# -- config ------------------------------------------------------------------------


def test_config_round_trip_shipped(config_dir):
    for path in sorted(config_dir.glob("*.cfg")):
        cfg = load(path)
        assert cfg.seed is not None
        text = dumps(cfg)
        assert dumps(loads(text)) == text
        assert loads(text) == cfg


@settings(max_examples=200, deadline=None)
@given(
    seed=st.one_of(st.none(), st.integers(0, 2**62)),
    M=st.integers(1, 10**7),
    delta=st.floats(0, 1, allow_nan=False),
    a1=st.one_of(st.none(), st.floats(1e-6, 1e6, allow_nan=False)),
    grid=st.lists(st.integers(1, 10**6), min_size=1, max_size=6).map(tuple),
    dgrid=st.lists(st.floats(0, 0.5, allow_nan=False), min_size=1, max_size=4).map(tuple),
    lattice=st.booleans(),
    exp_id=st.text("abcxyz_-0123", min_size=1, max_size=12),
)
def test_config_round_trip_property(seed, M, delta, a1, grid, dgrid, lattice, exp_id):
    cfg = ExperimentConfig(seed=seed, M=M, delta_bar=delta, a1=a1, M_grid=grid, delta_grid=dgrid,
                           state_lattice=lattice, experiment_id=exp_id)
    text = dumps(cfg)
    assert loads(text) == cfg
    assert dumps(loads(text)) == text


def test_config_parsing_rules(tmp_path):
    cfg = loads("# comment\n\nseed = 3  # trailing\nM = 1e4\nM_grid = 10, 20\nstate_lattice = false\n")
    assert cfg.seed == 3 and cfg.M == 10000 and cfg.M_grid == (10, 20) and cfg.state_lattice is False
    for bad in ("seed 3", "colour = red", "seed = 1\nseed = 2", "M = many", "experiment = dance", "M = 0", "M = 1.5"):
        with pytest.raises(DomainError):
            loads(bad)
    with pytest.raises(DomainError, match="missing.cfg"):
        load(tmp_path / "missing.cfg")
    with pytest.raises(DomainError):
        ExperimentConfig().require_seed()
    path = save(cfg, tmp_path / "c.cfg")
    assert load(path) == cfg


def test_config_hash_ignores_out_only():
    cfg = ExperimentConfig(seed=1)
    assert config_hash(cfg) == config_hash(cfg.with_(out="elsewhere"))
    assert config_hash(cfg) != config_hash(cfg.with_(M=999))
    assert len(config_hash(cfg)) == 64


def test_config_spsa_overrides_stay_with_main_preset():
    cfg = ExperimentConfig(seed=5, a1=2.0, k_max=7)
    main = cfg.spsa()
    assert (main.a1, main.k_max, main.seed) == (2.0, 7, 5)
    other = cfg.spsa("sgqt_single_qubit")
    assert other.a1 == 2.0 and other.k_max == 45  # preset value, unrelated to the override
    other = cfg.with_(a1=9.0).spsa("sgqt_single_qubit")
    assert other.a1 == 2.0


def test_noise_grid():
    cfg = ExperimentConfig(delta_grid=(0.0, 0.1), sigma_steps=2)
    assert noise_grid(cfg) == [(0.0, 0.0), (0.1, 0.0), (0.1, 0.05), (0.1, 0.1)]


# -- grids and states --------------------------------------------------------------


def test_observable_grid():
    grid = observable_grid(seed=3)
    assert len(grid) == 128 == grid.count
    for O in grid.observables:
        assert np.trace(O).real == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(O @ O, O, atol=1e-12)
    with pytest.raises(DomainError):
        observable_grid(0)


def test_observable_grid_uniform():
    grid = observable_grid(10_000, seed=4)
    X, Y, Z = np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1, -1])
    obs = np.array(grid.observables)
    bloch = np.stack([np.einsum("nab,ba->n", obs, P).real for P in (X, Y, Z)], axis=1)
    assert np.linalg.norm(bloch.mean(axis=0)) < 4 / np.sqrt(10_000) * np.sqrt(3)
    # area measure: z uniform on [-1, 1]
    assert stats.kstest(bloch[:, 2], stats.uniform(-1, 2).cdf).pvalue > 1e-4


def test_state_grid():
    grid = state_grid()
    assert len(grid) == 20
    for s in grid.states:
        assert abs(np.linalg.norm(s) - 1) < 1e-12
    np.testing.assert_array_equal(np.array(state_grid(seed=1).states), np.array(state_grid(seed=2).states))
    a = np.array(state_grid(seed=1, lattice=False).states)
    b = np.array(state_grid(seed=2, lattice=False).states)
    assert not np.allclose(a, b)
    np.testing.assert_array_equal(a, np.array(state_grid(seed=1, lattice=False).states))


def test_parse_state():
    np.testing.assert_allclose(parse_state("psi:0,0"), [1, 0])
    np.testing.assert_allclose(parse_state("eta:1"), [0, 1, 0, 0])
    np.testing.assert_allclose(parse_state("basis:10"), [0, 0, 1, 0])
    assert parse_state("random_pure:3", 1).shape == (8,)
    assert parse_state("random_mixed:2", 1).shape == (4, 4)
    np.testing.assert_array_equal(parse_state("random_pure:2", 7), parse_state("random_pure:2", 7))
    for bad in ("psi:1", "eta:2", "basis:12", "random_pure:0", "ghz:3"):
        with pytest.raises(DomainError):
            parse_state(bad)


# -- drivers on the shipped configs --------------------------------------------------


def test_rows_attributable(driver_run):
    for name in ("variance", "norm_sweep", "fidelity_curves", "robust", "scaling"):
        cfg, table, paths = driver_run(name)
        rows = read_csv(paths[0])
        assert rows and list(rows[0])[:2] == ["experiment_id", "seed"]
        assert {r["experiment_id"] for r in rows} == {cfg.experiment_id}
        assert {r["seed"] for r in rows} == {str(cfg.seed)}
        manifest = read_manifest(paths[1])
        assert manifest["config_hash"] == config_hash(cfg)
        assert manifest["seed"] == str(cfg.seed)
        assert manifest["outputs"] == paths[0].name
        for key in ("artifact_version", "start_params", "numpy_version", "scipy_version", "python_version"):
            assert manifest[key]


def test_variance_driver(driver_run):
    cfg, table, _ = driver_run("variance")
    assert len(table.rows) == len(cfg.M_grid)
    assert 0.70 <= table.rows[-1]["mean"] <= 0.80


def test_variance_std_shrinks():
    cfg = load_shipped("variance")
    stds = np.array([run_variance_convergence(cfg.with_(seed=s)).column("std") for s in range(1, 6)])
    med = np.median(stds, axis=0)
    run = longest = 1
    for a, b in zip(med, med[1:]):
        run = run + 1 if b < a else 1
        longest = max(longest, run)
    assert longest >= 3
    assert med[-1] < med[0]


def test_norm_sweep_driver(driver_run):
    _, table, _ = driver_run("norm_sweep")
    octa, sic = table.column("octahedron"), table.column("sic")
    assert len(octa) == 128
    assert octa.std(ddof=1) < 0.05
    assert np.mean(sic >= octa) >= 0.9
    assert sic.std(ddof=1) > octa.std(ddof=1)


def test_fidelity_driver(driver_run):
    cfg, table, _ = driver_run("fidelity_curves")
    for method in ("slst", "sgqt", "mle"):
        sub = table.where(method=method)
        rho = stats.spearmanr(sub.column("M"), sub.column("mean_fidelity")).statistic
        assert rho > 0.8, method
    plateau = table.where(method="mle").column("median_fidelity").max()
    assert np.all(table.where(method="slst").column("median_fidelity")[-3:] > plateau)


def test_robust_driver_noiseless_calibration():
    cal = simulate_calibration(1, 100_000, 9)
    assert abs(cal.coefficients[1] - 1 / 3) <= 4 * cal.std_errors[1]


def test_robust_driver_shape(driver_run):
    cfg, table, _ = driver_run("robust")
    assert len(table.rows) == len(noise_grid(cfg)) * cfg.repetitions
    assert set(table.column("delta_bar")) == set(cfg.delta_grid)


def test_scaling_driver(driver_run):
    cfg, table, _ = driver_run("scaling")
    for n in cfg.n_qubits_grid:
        sub = table.where(n_qubits=n)
        inf = sub.column("median_infidelity")
        assert stats.spearmanr(sub.column("M"), inf).statistic < -0.9
        assert -1.3 <= loglog_slope(sub.column("M"), inf) <= -0.7
        scaled = inf * sub.column("M")
        assert scaled.max() / scaled.min() <= 2.0
    for m in cfg.M_grid:
        inf = table.where(M=m).column("median_infidelity")
        assert np.all(np.diff(inf) > 0)


def test_scaling_refuses_large_n():
    with pytest.raises(DomainError):
        run_experiment(ExperimentConfig(seed=1, experiment="scaling", n_qubits_grid=(5,)))


def test_run_experiment_needs_kind():
    with pytest.raises(DomainError):
        run_experiment(ExperimentConfig(seed=1))


# -- determinism across worker counts -------------------------------------------------

SMALL = {
    "variance": dict(M_grid=(16, 64), n_states=4, repetitions=2),
    "norm_sweep": dict(M=200, n_states=3, n_observables=8),
    "fidelity_curves": dict(M_grid=(14, 35), n_states=2, repetitions=2),
    "robust": dict(M=300, M_prime=300, delta_grid=(0.0, 0.1), sigma_steps=1, repetitions=2, k_max=20),
    "scaling": dict(M_grid=(200, 400), n_qubits_grid=(2,), n_states=3, k_max=20),
}


def load_shipped(name):
    from pathlib import Path

    return load(Path(__file__).resolve().parents[1] / "configs" / f"{name}.cfg")


@pytest.mark.parametrize("name", sorted(SMALL))
def test_driver_independent_of_workers(name, tmp_path):
    cfg = load_shipped(name).with_(**SMALL[name])
    _, serial = run_experiment(cfg, tmp_path / "serial")
    _, parallel = run_experiment(cfg.with_(workers=2), tmp_path / "parallel")
    assert serial[0].read_bytes() == parallel[0].read_bytes()
