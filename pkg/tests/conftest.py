from pathlib import Path

import pytest

from metashadow.harness import load, run_experiment

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture(scope="session")
def config_dir() -> Path:
    return CONFIG_DIR


@pytest.fixture(scope="session")
def driver_run(tmp_path_factory):
    """Run a shipped config once per session; returns (config, table, output paths)."""
    cache = {}

    def run(name: str):
        if name not in cache:
            cfg = load(CONFIG_DIR / f"{name}.cfg")
            table, paths = run_experiment(cfg, tmp_path_factory.mktemp(name))
            cache[name] = (cfg, table, paths)
        return cache[name]

    return run
