# Centralised numerical defaults; the CLI `defaults` subcommand prints this.
DEFAULTS = {
    "dt": 0.01,
    "burn_in_fraction": 0.1,
    "grid_points": 400,
    "mle_alpha_grid": 2001,
    "mle_golden_tol": 1e-9,
    "limit_tail_mass": 1e-8,
    "limit_dz_fraction": 0.005,
    "limit_m_y": 400,
    "simple_limit_tail_prob": 1e-9,
    "simple_limit_cells": 400,
    "w_n_steps": 1000,
    "w_bridge_sup": True,
    "simple_truncation": [-10.0, 10.0],
    "simple_cells": 8000,
    "simple_tail_mass": 1e-8,
    "calibration_min_tail_count": 20,
    "calibration_min_replicates": 1000,
}
