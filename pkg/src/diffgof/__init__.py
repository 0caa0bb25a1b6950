"""Goodness-of-fit tests for ergodic diffusion processes observed continuously."""
from .calibration import CalibrationTable, Decision, calibrate, decide, load_table, save_table
from .errors import (DiffgofError, EstimationError, NumericalError, SimulationError,
                     UnsupportedRegimeError, ValidationError)
from .estimators import ThetaEstimate, edf, local_time, local_time_density, mle
from .model import (ParametricModel, Regime, SimpleModel, Theta, make_family, make_simple_model,
                    stationary_moments)
from .simulate import RngStream, Trajectory, simulate_path, simulate_stationary
from .statistics import StatisticKind, StatValue, compute_statistics

__version__ = "0.1.0"
