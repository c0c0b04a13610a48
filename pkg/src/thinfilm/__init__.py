"""Splitting simulator for the stochastic thin-film equation on a periodic interval."""

from .grid import Field, Grid
from .detstep import DetSolverConfig, MobilityParams, det_evolve, det_step
from .stochstep import CoefficientFn, RngStream, eta_moment, sample_eta_increment, stoch_step
from .splitting import SplittingConfig, concatenated_uN, flux_diagnostic, run_path
from .asymptotics import StabilityVerdict, classify, energy_bound, entropy_bound, mass_moment2
from .montecarlo import EnsembleConfig, EnsembleStats, estimate_sup_dev2, run_ensemble
from .quadmob import QuadMobConfig, energy_decay_rate, run_quadmob

__all__ = [
    "Grid", "Field", "MobilityParams", "DetSolverConfig", "det_step", "det_evolve",
    "CoefficientFn", "RngStream", "sample_eta_increment", "stoch_step", "eta_moment",
    "SplittingConfig", "run_path", "concatenated_uN", "flux_diagnostic",
    "StabilityVerdict", "classify", "mass_moment2", "energy_bound", "entropy_bound",
    "EnsembleConfig", "EnsembleStats", "run_ensemble", "estimate_sup_dev2",
    "QuadMobConfig", "run_quadmob", "energy_decay_rate",
]
