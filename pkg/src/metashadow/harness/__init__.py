"""Configuration, experiment drivers, result files and the CLI."""

from .config import ExperimentConfig, config_hash, dumps, load, loads, save
from .experiments import (
    DRIVERS,
    Table,
    loglog_slope,
    noise_grid,
    parse_state,
    run_experiment,
    run_fidelity_curves,
    run_norm_sweep,
    run_robust_comparison,
    run_scaling_study,
    run_variance_convergence,
)
from .grids import ObservableGrid, StateGrid, observable_grid, state_grid
from .results import read_csv, read_manifest, write_csv, write_manifest
