import numpy as np
import pytest

from metashadow.harness import read_csv, read_manifest
from metashadow.harness.cli import ESTIMATE_COLUMNS, main, parse_observable
from metashadow.errors import DomainError
from metashadow.reconstruct.trace import read_state_matrix

PIPELINE_CFG = """\
experiment_id = cli_pipeline
seed = 7
state = psi:0.4,0.3
povm = octahedron
M = 2000
M_prime = 2000
k_max = 30
observable = pauli:Z
runs_per_iteration = 7
"""


@pytest.fixture()
def cfg_file(tmp_path):
    path = tmp_path / "pipe.cfg"
    path.write_text(PIPELINE_CFG)
    return path


def _run(*argv):
    return main([str(a) for a in argv])


def test_full_pipeline(tmp_path, cfg_file, capsys):
    out = tmp_path / "out"
    base = ("--config", cfg_file, "--out", out)
    assert _run("sample", *base) == 0
    records = out / "records.jsonl"
    assert records.exists()
    assert _run("calibrate", *base) == 0
    cal = out / "calibration.txt"
    assert _run("estimate", *base, "--records", records, "--calibration", cal) == 0
    rows = read_csv(out / "estimate.csv")
    assert list(rows[0]) == list(ESTIMATE_COLUMNS)
    assert [r["quantity"] for r in rows] == ["mean", "variance"]
    assert rows[1]["std_error"] == ""
    mean, se = float(rows[0]["value"]), float(rows[0]["std_error"])
    assert abs(mean - np.cos(0.8)) <= 4 * se
    assert read_manifest(out / "manifest.txt")["command"] == "estimate"

    assert _run("slst", *base, "--records", records, "--reference") == 0
    rho = read_state_matrix(out / "state.txt")
    np.testing.assert_allclose(np.trace(rho), 1.0, atol=1e-12)
    trace_rows = read_csv(out / "trace.csv")
    assert len(trace_rows) == 30 and trace_rows[-1]["fidelity_vs_reference"] != ""

    for cmd in ("sgqt", "mle"):
        assert _run(cmd, *base, "--records", records, "--reference") == 0
    assert float(read_csv(out / "mle.csv")[0]["fidelity_vs_reference"]) > 0.98
    assert _run("metadesign", *base) == 0
    stokes = read_csv(out / "stokes.csv")
    assert [r["input"] for r in stokes] == ["H", "V", "+", "-", "R", "L"]
    assert float(stokes[4]["s3"]) == pytest.approx(1.0)


def test_experiment_command(tmp_path):
    cfg = tmp_path / "v.cfg"
    cfg.write_text("experiment = variance\nseed = 2\nM_grid = 16, 32\nn_states = 3\nrepetitions = 2\n")
    assert _run("experiment", "--config", cfg, "--out", tmp_path / "o") == 0
    assert len(read_csv(tmp_path / "o" / "run.csv")) == 2
    assert _run("variance", "--config", cfg, "--out", tmp_path / "o2") == 0


def test_missing_records_names_path(tmp_path, capsys):
    missing = tmp_path / "nowhere" / "records.jsonl"
    assert _run("slst", "--seed", 1, "--records", missing, "--out", tmp_path) == 1
    err = capsys.readouterr().err
    assert err.startswith("metashadow slst: error:")
    assert str(missing) in err


def test_missing_seed_is_domain_error(tmp_path, capsys):
    assert _run("sample", "--out", tmp_path) == 1
    assert "seed" in capsys.readouterr().err


def test_bad_config_is_domain_error(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("seed = 1\nflavour = odd\n")
    assert _run("sample", "--config", cfg, "--out", tmp_path) == 1
    assert "flavour" in capsys.readouterr().err


def test_usage_errors():
    assert _run("teleport") == 2
    assert _run() == 2
    assert _run("sample", "--seed", "one") == 2


def test_reruns_byte_identical(tmp_path, cfg_file):
    for name in ("a", "b"):
        out = tmp_path / name
        base = ("--config", cfg_file, "--out", out)
        assert _run("sample", *base) == 0
        assert _run("slst", *base, "--records", out / "records.jsonl") == 0
        assert _run("sgqt", *base) == 0
    for fname in ("records.jsonl", "state.txt", "trace.csv"):
        assert (tmp_path / "a" / fname).read_bytes() == (tmp_path / "b" / fname).read_bytes()


def test_parse_observable():
    obs = parse_observable("pauli:XZ", 2)
    assert len(obs) == 2
    proj = parse_observable("proj:0,0", 1)
    np.testing.assert_allclose(proj, np.diag([1, 0]), atol=1e-15)
    for text, n in (("pauli:X", 2), ("pauli:Q", 1), ("proj:0.1", 1), ("proj:0,0", 2), ("spin:up", 1)):
        with pytest.raises(DomainError):
            parse_observable(text, n)
